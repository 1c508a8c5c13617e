// SPDX-License-Identifier: Apache-2.0
//
// senselab - beamforming-feedback based angle-of-departure estimation
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "senselab/bff_codec.hpp"
#include "senselab/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace senselab
{

std::string_view to_string(AngleStep s) noexcept
{
    switch (s)
    {
    case AngleStep::pi4:
        return "pi4";
    case AngleStep::pi8:
        return "pi8";
    case AngleStep::pi16:
        return "pi16";
    case AngleStep::pi32:
        return "pi32";
    case AngleStep::none:
        return "none";
    }
    return "none";
}

AngleStep angle_step_from_string(std::string_view tag)
{
    for (auto s : {AngleStep::pi4, AngleStep::pi8, AngleStep::pi16, AngleStep::pi32, AngleStep::none})
        if (to_string(s) == tag)
            return s;
    throw ConfigError("unknown angle step '" + std::string(tag) + "' (expected pi4, pi8, pi16, pi32 or none)");
}

double QuantizationConfig::delta() const
{
    switch (angle_step)
    {
    case AngleStep::pi4:
        return kPi / 4.0;
    case AngleStep::pi8:
        return kPi / 8.0;
    case AngleStep::pi16:
        return kPi / 16.0;
    case AngleStep::pi32:
        return kPi / 32.0;
    case AngleStep::none:
        break;
    }
    throw ConfigError("lossless mode has no quantization step");
}

namespace
{

unsigned step_exponent(AngleStep s)
{
    switch (s)
    {
    case AngleStep::pi4:
        return 2;
    case AngleStep::pi8:
        return 3;
    case AngleStep::pi16:
        return 4;
    case AngleStep::pi32:
        return 5;
    case AngleStep::none:
        break;
    }
    throw ConfigError("lossless mode has no bit width");
}

std::uint8_t step_tag(AngleStep s) { return static_cast<std::uint8_t>(s); }

} // namespace

// delta = pi / 2^e: phi spans 2 pi -> 2^(e+1) levels, psi spans pi/2 -> 2^(e-1) levels.
unsigned QuantizationConfig::phi_bits() const { return step_exponent(angle_step) + 1; }
unsigned QuantizationConfig::psi_bits() const { return step_exponent(angle_step) - 1; }

void QuantizationConfig::validate() const
{
    if (!(gain_step_db > 0.0) || !std::isfinite(gain_step_db))
        throw ConfigError("gain step must be positive");
    switch (angle_step)
    {
    case AngleStep::pi4:
    case AngleStep::pi8:
    case AngleStep::pi16:
    case AngleStep::pi32:
    case AngleStep::none:
        return;
    }
    throw ConfigError("invalid angle step");
}

std::size_t GivensShape::iterations() const noexcept
{
    if (rows < 2)
        return 0;
    return std::min(cols, rows - 1);
}

std::size_t GivensShape::angle_pairs() const noexcept
{
    std::size_t n = 0;
    for (std::size_t i = 1; i <= iterations(); ++i)
        n += rows - i;
    return n;
}

namespace
{

void check_shape(const GivensShape &s)
{
    if (s.rows < 2 || s.cols < 1 || s.cols > s.rows || s.rows > 255)
        throw InputError("Givens shape " + std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                         " unsupported (need 2 <= rows <= 255, 1 <= cols <= rows)");
}

double wrap_two_pi(double x)
{
    double r = std::fmod(x, 2.0 * kPi);
    if (r < 0.0)
        r += 2.0 * kPi;
    if (r >= 2.0 * kPi)
        r = 0.0;
    return r;
}

} // namespace

GivensAngles givens_decompose(const ComplexMatrix &v)
{
    const GivensShape shape{v.rows(), v.cols()};
    check_shape(shape);
    if (!v.all_finite() || unitarity_error(v) > 1e-8)
        throw InputError("givens_decompose: columns are not orthonormal");

    const std::size_t nr = v.rows(), nc = v.cols();
    ComplexMatrix w = v;

    // Strip the phase of the last row so it is real and non-negative.
    for (std::size_t c = 0; c < nc; ++c)
    {
        const cplx z = w(nr - 1, c);
        if (std::abs(z) > 0.0)
        {
            const cplx f = std::conj(z) / std::abs(z);
            for (std::size_t r = 0; r < nr; ++r)
                w(r, c) *= f;
            w(nr - 1, c) = std::abs(z);
        }
    }

    GivensAngles out;
    out.shape = shape;
    out.phi.reserve(shape.angle_pairs());
    out.psi.reserve(shape.angle_pairs());

    for (std::size_t i = 0; i < shape.iterations(); ++i)
    {
        for (std::size_t l = i; l + 1 < nr; ++l)
        {
            const cplx z = w(l, i);
            const double phi = std::abs(z) > 0.0 ? wrap_two_pi(std::arg(z)) : 0.0;
            out.phi.push_back(phi);
            const cplx f = std::polar(1.0, -phi);
            for (std::size_t c = 0; c < nc; ++c)
                w(l, c) *= f;
            w(l, i) = std::abs(z);
        }
        for (std::size_t l = i + 1; l < nr; ++l)
        {
            const double psi = std::clamp(std::atan2(w(l, i).real(), w(i, i).real()), 0.0, kPi / 2.0);
            out.psi.push_back(psi);
            const double c = std::cos(psi), s = std::sin(psi);
            for (std::size_t col = 0; col < nc; ++col)
            {
                const cplx ri = w(i, col), rl = w(l, col);
                w(i, col) = c * ri + s * rl;
                w(l, col) = -s * ri + c * rl;
            }
        }
    }
    return out;
}

ComplexMatrix givens_reconstruct(const GivensAngles &angles)
{
    const auto &shape = angles.shape;
    check_shape(shape);
    const std::size_t pairs = shape.angle_pairs();
    if (angles.phi.size() != pairs || angles.psi.size() != pairs)
        throw InputError("givens_reconstruct: expected " + std::to_string(pairs) + " phi/psi angles for " +
                         std::to_string(shape.rows) + "x" + std::to_string(shape.cols) + ", got " +
                         std::to_string(angles.phi.size()) + "/" + std::to_string(angles.psi.size()));

    const std::size_t nr = shape.rows, nc = shape.cols;
    ComplexMatrix m(nr, nc);
    for (std::size_t c = 0; c < nc; ++c)
        m(c, c) = 1.0;

    // Offsets of each iteration's block inside the flat angle lists.
    std::vector<std::size_t> offset(shape.iterations() + 1, 0);
    for (std::size_t i = 0; i < shape.iterations(); ++i)
        offset[i + 1] = offset[i] + (nr - 1 - i);

    // V = prod_i [ D_i prod_l G_li^T ] I, applied right to left.
    for (std::size_t ii = shape.iterations(); ii-- > 0;)
    {
        for (std::size_t l = nr; l-- > ii + 1;)
        {
            const double psi = angles.psi[offset[ii] + (l - ii - 1)];
            const double c = std::cos(psi), s = std::sin(psi);
            for (std::size_t col = 0; col < nc; ++col)
            {
                const cplx ri = m(ii, col), rl = m(l, col);
                m(ii, col) = c * ri - s * rl;
                m(l, col) = s * ri + c * rl;
            }
        }
        for (std::size_t l = ii; l + 1 < nr; ++l)
        {
            const cplx f = std::polar(1.0, angles.phi[offset[ii] + (l - ii)]);
            for (std::size_t col = 0; col < nc; ++col)
                m(l, col) *= f;
        }
    }
    return m;
}

AngleIndices quantize_angles(const GivensAngles &angles, const QuantizationConfig &config)
{
    config.validate();
    const double delta = config.delta();
    const auto phi_levels = 1u << config.phi_bits();
    const auto psi_levels = 1u << config.psi_bits();

    AngleIndices out;
    out.phi.reserve(angles.phi.size());
    out.psi.reserve(angles.psi.size());
    for (double phi : angles.phi)
    {
        if (!std::isfinite(phi))
            throw InputError("quantize_angles: non-finite phi");
        const auto idx = static_cast<long>(std::floor(wrap_two_pi(phi) / delta));
        out.phi.push_back(static_cast<std::uint16_t>(std::clamp<long>(idx, 0, phi_levels - 1)));
    }
    for (double psi : angles.psi)
    {
        if (!std::isfinite(psi) || psi < 0.0 || psi > kPi / 2.0 + 1e-12)
            throw InputError("quantize_angles: psi " + std::to_string(psi) + " outside [0, pi/2]");
        const auto idx = static_cast<long>(std::floor(psi / delta));
        out.psi.push_back(static_cast<std::uint16_t>(std::clamp<long>(idx, 0, psi_levels - 1)));
    }
    return out;
}

GivensAngles dequantize_angles(const AngleIndices &indices, const GivensShape &shape,
                               const QuantizationConfig &config)
{
    config.validate();
    const double delta = config.delta();
    const auto phi_levels = 1u << config.phi_bits();
    const auto psi_levels = 1u << config.psi_bits();
    if (indices.phi.size() != shape.angle_pairs() || indices.psi.size() != shape.angle_pairs())
        throw DecodeError("dequantize_angles: angle count does not match shape");

    GivensAngles out;
    out.shape = shape;
    for (auto i : indices.phi)
    {
        if (i >= phi_levels)
            throw DecodeError("dequantize_angles: phi index " + std::to_string(i) + " out of range");
        out.phi.push_back((i + 0.5) * delta);
    }
    for (auto i : indices.psi)
    {
        if (i >= psi_levels)
            throw DecodeError("dequantize_angles: psi index " + std::to_string(i) + " out of range");
        out.psi.push_back((i + 0.5) * delta);
    }
    return out;
}

std::size_t BffReport::angle_bits_per_subcarrier() const
{
    if (config.lossless())
        return shape.angle_pairs() * 2 * 64;
    return shape.angle_pairs() * (config.phi_bits() + config.psi_bits());
}

void BffReport::validate() const
{
    try
    {
        check_shape(shape);
        config.validate();
    }
    catch (const Error &e)
    {
        throw DecodeError(std::string("BffReport: ") + e.what());
    }
    if (gains_db.size() != shape.cols)
        throw DecodeError("BffReport: " + std::to_string(gains_db.size()) + " gains for " +
                          std::to_string(shape.cols) + " streams");
    for (double g : gains_db)
        if (!std::isfinite(g))
            throw DecodeError("BffReport: non-finite gain");
    const std::size_t pairs = shape.angle_pairs();
    if (config.lossless())
    {
        if (!indices.empty())
            throw DecodeError("BffReport: lossless report carries quantized indices");
        for (const auto &a : angles)
            if (a.shape != shape || a.phi.size() != pairs || a.psi.size() != pairs)
                throw DecodeError("BffReport: angle list does not match shape");
        return;
    }
    if (!angles.empty())
        throw DecodeError("BffReport: quantized report carries raw angles");
    const auto phi_levels = 1u << config.phi_bits();
    const auto psi_levels = 1u << config.psi_bits();
    for (const auto &ix : indices)
    {
        if (ix.phi.size() != pairs || ix.psi.size() != pairs)
            throw DecodeError("BffReport: index list does not match shape");
        for (auto i : ix.phi)
            if (i >= phi_levels)
                throw DecodeError("BffReport: phi index out of range");
        for (auto i : ix.psi)
            if (i >= psi_levels)
                throw DecodeError("BffReport: psi index out of range");
    }
    for (double g : gains_db)
    {
        const double steps = g / config.gain_step_db;
        if (std::abs(steps - std::round(steps)) > 1e-9)
            throw DecodeError("BffReport: gain " + std::to_string(g) + " dB is not a multiple of the gain step");
    }
}

bool operator==(const BffReport &a, const BffReport &b)
{
    if (!(a.shape == b.shape) || a.config.angle_step != b.config.angle_step ||
        a.config.gain_step_db != b.config.gain_step_db || a.indices != b.indices || a.gains_db != b.gains_db)
        return false;
    if (a.angles.size() != b.angles.size())
        return false;
    for (std::size_t k = 0; k < a.angles.size(); ++k)
        if (a.angles[k].phi != b.angles[k].phi || a.angles[k].psi != b.angles[k].psi)
            return false;
    return true;
}

namespace
{

double largest_principal_angle(const ComplexMatrix &a, const ComplexMatrix &b)
{
    const auto angles = principal_angles(a, b);
    return angles.empty() ? 0.0 : angles.back();
}

// Greedy single-index moves that shrink the largest principal angle between
// the fed-back and the true column space.
void refine_indices(const ComplexMatrix &target, AngleIndices &idx, const GivensShape &shape,
                    const QuantizationConfig &config)
{
    const auto error = [&] {
        return largest_principal_angle(target, givens_reconstruct(dequantize_angles(idx, shape, config)));
    };
    const long phi_levels = 1L << config.phi_bits(), psi_levels = 1L << config.psi_bits();
    double best = error();
    for (bool improved = true; improved;)
    {
        improved = false;
        for (int pass = 0; pass < 2; ++pass)
        {
            auto &field = pass == 0 ? idx.phi : idx.psi;
            for (auto &entry : field)
                for (long step : {-1L, 1L})
                {
                    long next = long(entry) + step;
                    if (pass == 0)
                        next = (next + phi_levels) % phi_levels;
                    else if (next < 0 || next >= psi_levels)
                        continue;
                    const auto saved = entry;
                    entry = static_cast<std::uint16_t>(next);
                    const double e = error();
                    if (e < best - 1e-15)
                    {
                        best = e;
                        improved = true;
                    }
                    else
                    {
                        entry = saved;
                    }
                }
        }
    }
}

} // namespace

BffReport encode_bff(const CsiSet &csi, const QuantizationConfig &config, std::size_t streams)
{
    config.validate();
    csi.validate();
    const std::size_t max_streams = std::min(csi.rx(), csi.tx());
    if (streams == 0)
        streams = max_streams;
    if (streams > max_streams)
        throw ConfigError("encode_bff: " + std::to_string(streams) + " streams requested, channel supports " +
                          std::to_string(max_streams));

    BffReport report;
    report.shape = {csi.tx(), streams};
    check_shape(report.shape);
    report.config = config;

    std::vector<double> power(streams, 0.0);
    for (const auto &hk : csi.h)
    {
        const auto d = svd(hk);
        for (std::size_t s = 0; s < streams; ++s)
            power[s] += d.singular_values[s] * d.singular_values[s];
        if (config.lossless())
        {
            report.angles.push_back(givens_decompose(d.v.left_cols(streams)));
            continue;
        }
        const auto target = d.v.left_cols(streams);
        auto idx = quantize_angles(givens_decompose(target), config);
        if (streams < report.shape.rows)
            refine_indices(target, idx, report.shape, config);
        report.indices.push_back(std::move(idx));
    }

    const double k = static_cast<double>(std::max<std::size_t>(csi.subcarriers(), 1));
    for (std::size_t s = 0; s < streams; ++s)
    {
        const double mean = power[s] / k;
        double db = mean > 0.0 ? 10.0 * std::log10(mean) : kGainFloorDb;
        db = std::max(db, kGainFloorDb);
        if (!config.lossless())
            db = std::round(db / config.gain_step_db) * config.gain_step_db;
        report.gains_db.push_back(db);
    }
    return report;
}

DecodedFeedback decode_bff(const BffReport &report)
{
    report.validate();
    DecodedFeedback out;
    const std::size_t k = report.subcarriers();
    out.v.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
    {
        if (report.config.lossless())
            out.v.push_back(givens_reconstruct(report.angles[i]));
        else
            out.v.push_back(givens_reconstruct(dequantize_angles(report.indices[i], report.shape, report.config)));
    }
    for (double db : report.gains_db)
        out.gains.push_back(db <= kGainFloorDb ? 0.0 : std::pow(10.0, db / 10.0));
    return out;
}

namespace
{

class BitWriter
{
public:
    void put(std::uint64_t value, unsigned bits)
    {
        for (unsigned b = bits; b-- > 0;)
        {
            if (used_ % 8 == 0)
                bytes_.push_back(0);
            if ((value >> b) & 1u)
                bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (used_ % 8));
            ++used_;
        }
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t used_ = 0;
};

class BitReader
{
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t get(unsigned bits)
    {
        if (pos_ + bits > bytes_.size() * 8)
            throw DecodeError("unpack_report: truncated payload");
        std::uint64_t v = 0;
        for (unsigned b = 0; b < bits; ++b, ++pos_)
            v = (v << 1) | ((bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u);
        return v;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void put_be(std::vector<std::uint8_t> &out, std::uint64_t v, unsigned bytes)
{
    for (unsigned i = bytes; i-- > 0;)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t &pos, unsigned bytes)
{
    if (pos + bytes > in.size())
        throw DecodeError("unpack_report: truncated header");
    std::uint64_t v = 0;
    for (unsigned i = 0; i < bytes; ++i)
        v = (v << 8) | in[pos++];
    return v;
}

} // namespace

std::size_t packed_header_bytes(const GivensShape &shape, const QuantizationConfig &config)
{
    return 6 + shape.cols * (config.lossless() ? 8 : 2);
}

std::vector<std::uint8_t> pack_report(const BffReport &report)
{
    report.validate();
    const std::size_t k = report.subcarriers();
    if (k > 0xFFFF)
        throw InputError("pack_report: too many subcarriers");

    std::vector<std::uint8_t> out;
    put_be(out, k, 2);
    put_be(out, report.shape.rows, 1);
    put_be(out, report.shape.cols, 1);
    put_be(out, step_tag(report.config.angle_step), 1);
    put_be(out, 0, 1);
    for (double g : report.gains_db)
    {
        if (report.config.lossless())
        {
            put_be(out, std::bit_cast<std::uint64_t>(g), 8);
            continue;
        }
        const double steps = std::round(g / report.config.gain_step_db);
        if (steps < -32768.0 || steps > 32767.0)
            throw InputError("pack_report: gain " + std::to_string(g) + " dB does not fit the gain field");
        put_be(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(steps)), 2);
    }

    BitWriter bits;
    const std::size_t iters = report.shape.iterations();
    const std::size_t nr = report.shape.rows;
    for (std::size_t s = 0; s < k; ++s)
    {
        std::size_t off = 0;
        for (std::size_t i = 0; i < iters; ++i)
        {
            const std::size_t n = nr - 1 - i;
            if (report.config.lossless())
            {
                const auto &a = report.angles[s];
                for (std::size_t j = 0; j < n; ++j)
                    bits.put(std::bit_cast<std::uint64_t>(a.phi[off + j]), 64);
                for (std::size_t j = 0; j < n; ++j)
                    bits.put(std::bit_cast<std::uint64_t>(a.psi[off + j]), 64);
            }
            else
            {
                const auto &ix = report.indices[s];
                for (std::size_t j = 0; j < n; ++j)
                    bits.put(ix.phi[off + j], report.config.phi_bits());
                for (std::size_t j = 0; j < n; ++j)
                    bits.put(ix.psi[off + j], report.config.psi_bits());
            }
            off += n;
        }
    }
    const auto payload = bits.take();
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

BffReport unpack_report(std::span<const std::uint8_t> bytes, const GivensShape &shape,
                        const QuantizationConfig &config)
{
    check_shape(shape);
    config.validate();
    std::size_t pos = 0;
    const auto k = static_cast<std::size_t>(get_be(bytes, pos, 2));
    const auto rows = get_be(bytes, pos, 1);
    const auto cols = get_be(bytes, pos, 1);
    const auto tag = get_be(bytes, pos, 1);
    get_be(bytes, pos, 1);
    if (rows != shape.rows || cols != shape.cols)
        throw DecodeError("unpack_report: header shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " does not match expected " + std::to_string(shape.rows) + "x" +
                          std::to_string(shape.cols));
    if (tag != step_tag(config.angle_step))
        throw DecodeError("unpack_report: header step tag does not match configuration");

    BffReport r;
    r.shape = shape;
    r.config = config;
    for (std::size_t c = 0; c < shape.cols; ++c)
    {
        if (config.lossless())
            r.gains_db.push_back(std::bit_cast<double>(get_be(bytes, pos, 8)));
        else
            r.gains_db.push_back(static_cast<std::int16_t>(get_be(bytes, pos, 2)) * config.gain_step_db);
    }

    BffReport probe;
    probe.shape = shape;
    probe.config = config;
    const std::size_t payload_bits = k * probe.angle_bits_per_subcarrier();
    const std::size_t payload_bytes = (payload_bits + 7) / 8;
    const std::size_t available = bytes.size() - pos;
    if (available < payload_bytes)
        throw DecodeError("unpack_report: truncated payload (" + std::to_string(available) + " of " +
                          std::to_string(payload_bytes) + " bytes)");
    if (available > payload_bytes)
        throw DecodeError("unpack_report: " + std::to_string(available - payload_bytes) + " trailing bytes");

    BitReader bits(bytes.subspan(pos));
    const std::size_t iters = shape.iterations();
    for (std::size_t s = 0; s < k; ++s)
    {
        GivensAngles a;
        a.shape = shape;
        AngleIndices ix;
        for (std::size_t i = 0; i < iters; ++i)
        {
            const std::size_t n = shape.rows - 1 - i;
            if (config.lossless())
            {
                for (std::size_t j = 0; j < n; ++j)
                    a.phi.push_back(std::bit_cast<double>(bits.get(64)));
                for (std::size_t j = 0; j < n; ++j)
                    a.psi.push_back(std::bit_cast<double>(bits.get(64)));
            }
            else
            {
                for (std::size_t j = 0; j < n; ++j)
                    ix.phi.push_back(static_cast<std::uint16_t>(bits.get(config.phi_bits())));
                for (std::size_t j = 0; j < n; ++j)
                    ix.psi.push_back(static_cast<std::uint16_t>(bits.get(config.psi_bits())));
            }
        }
        if (config.lossless())
            r.angles.push_back(std::move(a));
        else
            r.indices.push_back(std::move(ix));
    }
    r.validate();
    return r;
}

std::vector<double> principal_angles(const ComplexMatrix &a, const ComplexMatrix &b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("principal_angles: shape mismatch");
    // cos from A^H B, sin from the residual of B outside span(A).
    const auto ab = adjoint_times(a, b);
    const auto cosines = svd(ab).singular_values;
    auto sines = svd(b - a * ab).singular_values;
    std::reverse(sines.begin(), sines.end());
    std::vector<double> out;
    for (std::size_t i = 0; i < cosines.size(); ++i)
        out.push_back(std::atan2(std::max(sines[i], 0.0), std::clamp(cosines[i], 0.0, 1.0)));
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace senselab
