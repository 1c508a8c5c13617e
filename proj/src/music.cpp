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

#include "senselab/music.hpp"
#include "senselab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace senselab
{

Covariance::Covariance(ComplexMatrix m) : m_(std::move(m))
{
    if (m_.empty() || m_.rows() != m_.cols())
        throw InputError("Covariance: matrix must be square");
    if (!m_.all_finite())
        throw InputError("Covariance: non-finite entry");
    if (hermitian_error(m_) > 1e-9)
        throw InputError("Covariance: matrix is not Hermitian");
}

Calibration Calibration::identity(std::size_t subcarriers, std::size_t antennas)
{
    Calibration c;
    c.w.assign(subcarriers, std::vector<cplx>(antennas, 1.0));
    return c;
}

std::vector<std::vector<double>> Calibration::arguments() const
{
    std::vector<std::vector<double>> out;
    out.reserve(w.size());
    for (const auto &wk : w)
    {
        std::vector<double> a;
        for (const auto &z : wk)
            a.push_back(std::arg(z));
        out.push_back(std::move(a));
    }
    return out;
}

Calibration Calibration::from_arguments(const std::vector<std::vector<double>> &args)
{
    Calibration c;
    for (const auto &ak : args)
    {
        std::vector<cplx> wk;
        for (std::size_t n = 0; n < ak.size(); ++n)
            wk.push_back(n == 0 ? cplx(1.0) : std::polar(1.0, ak[n]));
        c.w.push_back(std::move(wk));
    }
    c.validate();
    return c;
}

void Calibration::validate() const
{
    const std::size_t n = dimension();
    for (const auto &wk : w)
    {
        if (wk.size() != n || n == 0)
            throw InputError("Calibration: inconsistent dimension");
        if (wk[0] != cplx(1.0))
            throw InputError("Calibration: first diagonal entry must be 1");
        for (const auto &z : wk)
            if (!(std::abs(std::abs(z) - 1.0) <= 1e-10))
                throw InputError("Calibration: entries must have unit modulus");
    }
}

namespace
{

const std::vector<cplx> *calibration_row(const Calibration *cal, std::size_t k, std::size_t subcarriers,
                                         std::size_t dim)
{
    if (cal == nullptr)
        return nullptr;
    if (cal->dimension() != dim)
        throw InputError("calibration dimension " + std::to_string(cal->dimension()) + " does not match " +
                         std::to_string(dim) + " antennas");
    // A single-entry calibration applies to every subcarrier.
    if (cal->subcarriers() == 1)
        return &cal->w.front();
    if (cal->subcarriers() != subcarriers)
        throw InputError("calibration covers " + std::to_string(cal->subcarriers()) + " subcarriers, data has " +
                         std::to_string(subcarriers));
    return &cal->w[k];
}

// acc += weight * x x^H
void add_outer(ComplexMatrix &acc, std::span<const cplx> x, double weight)
{
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
    {
        const cplx xi = weight * x[i];
        for (std::size_t j = 0; j < n; ++j)
            acc(i, j) += xi * std::conj(x[j]);
    }
}

double median_of(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1)
        return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

} // namespace

Covariance covariance_from_bff(std::span<const ComplexMatrix> v, std::span<const double> gains,
                               const Calibration *calibration)
{
    if (v.empty())
        throw InputError("covariance_from_bff: no subcarriers");
    const std::size_t n = v.front().rows(), s = v.front().cols();
    if (gains.size() != s)
        throw InputError("covariance_from_bff: " + std::to_string(gains.size()) + " gains for " +
                         std::to_string(s) + " streams");
    for (double g : gains)
        if (!(g >= 0.0) || !std::isfinite(g))
            throw InputError("covariance_from_bff: stream gains must be finite and non-negative");

    ComplexMatrix acc(n, n);
    std::vector<cplx> x(n);
    for (std::size_t k = 0; k < v.size(); ++k)
    {
        const auto &vk = v[k];
        if (vk.rows() != n || vk.cols() != s)
            throw InputError("covariance_from_bff: subcarrier matrices differ in shape");
        const auto *w = calibration_row(calibration, k, v.size(), n);
        for (std::size_t c = 0; c < s; ++c)
        {
            for (std::size_t r = 0; r < n; ++r)
                x[r] = w ? (*w)[r] * vk(r, c) : vk(r, c);
            add_outer(acc, x, gains[c]);
        }
    }
    acc *= 1.0 / static_cast<double>(v.size());
    return Covariance(std::move(acc));
}

Covariance covariance_from_bff(const DecodedFeedback &feedback, const Calibration *calibration)
{
    return covariance_from_bff(feedback.v, feedback.gains, calibration);
}

Covariance covariance_from_csi(const CsiSet &csi, CsiCovarianceMode mode, const Calibration *calibration)
{
    if (csi.h.empty())
        throw InputError("covariance_from_csi: empty CSI");
    const std::size_t n = csi.tx();
    const std::size_t rows = mode == CsiCovarianceMode::full ? csi.rx() : 1;

    // Row r of H_k contributes conj(h)^T h, i.e. the outer product of conj(h).
    ComplexMatrix acc(n, n);
    std::vector<cplx> x(n);
    for (std::size_t k = 0; k < csi.h.size(); ++k)
    {
        const auto &hk = csi.h[k];
        if (hk.rows() != csi.rx() || hk.cols() != n)
            throw InputError("covariance_from_csi: subcarrier matrices differ in shape");
        const auto *w = calibration_row(calibration, k, csi.h.size(), n);
        for (std::size_t r = 0; r < rows; ++r)
        {
            for (std::size_t c = 0; c < n; ++c)
                x[c] = w ? (*w)[c] * std::conj(hk(r, c)) : std::conj(hk(r, c));
            add_outer(acc, x, 1.0);
        }
    }
    acc *= 1.0 / static_cast<double>(csi.h.size());
    return Covariance(std::move(acc));
}

Covariance average_covariances(std::span<const Covariance> covs)
{
    if (covs.empty())
        throw InputError("average_covariances: empty list");
    ComplexMatrix acc(covs.front().dimension(), covs.front().dimension());
    for (const auto &c : covs)
    {
        if (c.dimension() != acc.rows())
            throw InputError("average_covariances: dimension mismatch");
        acc += c.matrix();
    }
    acc *= 1.0 / static_cast<double>(covs.size());
    return Covariance(std::move(acc));
}

Covariance spatial_smooth(const Covariance &c, std::size_t subarray_size)
{
    const std::size_t m = c.dimension();
    if (subarray_size < 2 || subarray_size > m)
        throw InputError("spatial_smooth: sub-array size " + std::to_string(subarray_size) + " outside [2, " +
                         std::to_string(m) + "]");
    const std::size_t blocks = m - subarray_size + 1;
    ComplexMatrix acc(subarray_size, subarray_size);
    for (std::size_t j = 0; j < blocks; ++j)
        acc += c.matrix().block(j, j, subarray_size, subarray_size);
    acc *= 1.0 / static_cast<double>(blocks);
    return Covariance(std::move(acc));
}

ComplexMatrix noise_subspace(const Covariance &c, std::size_t paths)
{
    const std::size_t m = c.dimension();
    if (paths >= m)
        throw ConfigError("insufficient subarray size for L paths (L = " + std::to_string(paths) +
                          ", sub-array size = " + std::to_string(m) + ")");
    const auto eig = hermitian_eig(c.matrix());
    return eig.eigenvectors.left_cols(m - paths);
}

std::vector<double> angle_grid(double step_deg)
{
    if (!(step_deg > 0.0) || step_deg > 90.0)
        throw InputError("angle_grid: step must be in (0, 90] degrees");
    const auto n = static_cast<std::size_t>(std::floor(180.0 / step_deg + 1e-9));
    std::vector<double> grid;
    grid.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        grid.push_back(-90.0 + static_cast<double>(i) * step_deg);
    return grid;
}

MusicSpectrum music_spectrum(std::span<const std::vector<cplx>> noise_basis, std::size_t elements,
                             double element_spacing, double wavelength, std::span<const double> grid_deg)
{
    if (grid_deg.empty())
        throw InputError("music_spectrum: empty grid");
    for (std::size_t i = 1; i < grid_deg.size(); ++i)
        if (!(grid_deg[i] > grid_deg[i - 1]))
            throw InputError("music_spectrum: grid must be strictly increasing");
    if (grid_deg.front() < -90.0 || grid_deg.back() > 90.0)
        throw InputError("music_spectrum: grid outside [-90, 90]");
    if (!(wavelength > 0.0) || !(element_spacing > 0.0))
        throw InputError("music_spectrum: spacing and wavelength must be positive");
    for (const auto &e : noise_basis)
        if (e.size() != elements)
            throw DimensionError("music_spectrum: noise vector length does not match element count");

    // Projector P = E E^H; quadform = a^H P a.
    ComplexMatrix proj(elements, elements);
    for (const auto &e : noise_basis)
        add_outer(proj, e, 1.0);

    MusicSpectrum out;
    out.angles_deg.assign(grid_deg.begin(), grid_deg.end());
    out.quadform.resize(grid_deg.size());
    out.g.resize(grid_deg.size());
    const double ratio = element_spacing / wavelength;
    for (std::size_t i = 0; i < grid_deg.size(); ++i)
    {
        double q = 0.0;
        if (!noise_basis.empty())
        {
            const auto a = steering_response(grid_deg[i], elements, ratio);
            cplx acc = 0.0;
            for (std::size_t r = 0; r < elements; ++r)
            {
                cplx pr = 0.0;
                for (std::size_t c = 0; c < elements; ++c)
                    pr += proj(r, c) * a[c];
                acc += std::conj(a[r]) * pr;
            }
            q = std::max(acc.real(), 0.0);
        }
        out.quadform[i] = q;
        out.g[i] = q > 0.0 ? 1.0 / q : std::numeric_limits<double>::infinity();
    }
    return out;
}

MusicSpectrum music_spectrum(const ComplexMatrix &noise, double element_spacing, double wavelength,
                             std::span<const double> grid_deg)
{
    std::vector<std::vector<cplx>> basis;
    for (std::size_t c = 0; c < noise.cols(); ++c)
        basis.push_back(noise.col(c));
    return music_spectrum(basis, noise.rows(), element_spacing, wavelength, grid_deg);
}

namespace
{

double refine_minimum(const MusicSpectrum &s, std::size_t i)
{
    const auto &x = s.angles_deg;
    const auto &q = s.quadform;
    if (q[i] <= 0.0 || q[i - 1] <= 0.0 || q[i + 1] <= 0.0)
        return x[i];
    // Parabola through (x - x_i, log q) at the three neighbours.
    const double a = x[i - 1] - x[i], b = x[i + 1] - x[i];
    const double y1 = std::log(q[i]);
    const double d0 = std::log(q[i - 1]) - y1, d2 = std::log(q[i + 1]) - y1;
    const double curv = (d0 * b - d2 * a) / (a * b * (a - b));
    if (!(curv > 0.0))
        return x[i];
    const double slope = (d0 - curv * a * a) / a;
    const double t = std::clamp(-slope / (2.0 * curv), a, b);
    return x[i] + t;
}

} // namespace

AodEstimate find_peaks(const MusicSpectrum &spectrum, std::size_t paths)
{
    const auto &q = spectrum.quadform;
    if (q.size() < 3 || spectrum.angles_deg.size() != q.size())
        throw InputError("find_peaks: need at least 3 grid points");

    std::vector<std::size_t> minima;
    for (std::size_t i = 1; i + 1 < q.size(); ++i)
        if (q[i] < q[i - 1] && q[i] <= q[i + 1])
            minima.push_back(i);
    std::stable_sort(minima.begin(), minima.end(), [&](auto a, auto b) { return q[a] < q[b]; });

    AodEstimate out;
    out.spectrum = spectrum;
    const std::size_t take = std::min(paths, minima.size());
    for (std::size_t j = 0; j < take; ++j)
        out.angles_deg.push_back(refine_minimum(spectrum, minima[j]));
    std::sort(out.angles_deg.begin(), out.angles_deg.end());
    if (minima.size() < paths)
        throw PeakDeficit("find_peaks: found " + std::to_string(minima.size()) + " of " + std::to_string(paths) +
                              " spectrum peaks",
                          out.angles_deg);
    return out;
}

std::vector<double> dominant_peaks(const MusicSpectrum &spectrum, double floor_ratio)
{
    const auto &g = spectrum.g;
    std::vector<double> out;
    if (g.size() < 3)
        return out;
    const double floor = floor_ratio * median_of(g);
    for (std::size_t i = 1; i + 1 < g.size(); ++i)
        if (g[i] > g[i - 1] && g[i] >= g[i + 1] && g[i] >= floor)
            out.push_back(spectrum.angles_deg[i]);
    return out;
}

namespace
{

Calibration calibration_from_covariances(const std::vector<ComplexMatrix> &per_subcarrier, double known_aod_deg,
                                         const ArrayGeometry &geometry, std::span<const double> wavelengths)
{
    const std::size_t n = per_subcarrier.front().rows();
    if (geometry.num_elements != n)
        throw DimensionError("estimate_calibration: geometry has " + std::to_string(geometry.num_elements) +
                             " elements, data has " + std::to_string(n));
    if (wavelengths.size() != 1 && wavelengths.size() != per_subcarrier.size())
        throw DimensionError("estimate_calibration: " + std::to_string(wavelengths.size()) + " wavelengths for " +
                             std::to_string(per_subcarrier.size()) + " subcarriers");

    Calibration cal;
    for (std::size_t k = 0; k < per_subcarrier.size(); ++k)
    {
        const auto a = steering_vector(known_aod_deg, geometry, wavelengths[wavelengths.size() == 1 ? 0 : k]);
        const auto eig = hermitian_eig(per_subcarrier[k]);
        auto x = eig.eigenvectors.col(n - 1);
        if (std::abs(x[0]) < 1e-6 * vector_norm(x))
            throw NumericalError("estimate_calibration: degenerate geometry at subcarrier " + std::to_string(k) +
                                 " (first eigenvector entry vanishes)");
        const cplx x0 = x[0];
        for (auto &z : x)
            z /= x0;
        // x ~ conj(W) a  =>  W = a conj(x), kept to unit modulus.
        std::vector<cplx> wk(n);
        wk[0] = 1.0;
        for (std::size_t i = 1; i < n; ++i)
            wk[i] = std::polar(1.0, std::arg(a[i] * std::conj(x[i])));
        cal.w.push_back(std::move(wk));
    }
    return cal;
}

} // namespace

Calibration estimate_calibration(std::span<const DecodedFeedback> reports, double known_aod_deg,
                                 const ArrayGeometry &geometry, std::span<const double> wavelengths)
{
    if (reports.empty())
        throw InputError("estimate_calibration: no reports");
    const std::size_t k = reports.front().v.size();
    if (k == 0)
        throw InputError("estimate_calibration: report without subcarriers");
    const std::size_t n = reports.front().v.front().rows();
    std::vector<ComplexMatrix> acc(k, ComplexMatrix(n, n));
    for (const auto &r : reports)
    {
        if (r.v.size() != k)
            throw InputError("estimate_calibration: reports differ in subcarrier count");
        for (std::size_t i = 0; i < k; ++i)
        {
            if (r.v[i].rows() != n || r.v[i].cols() != r.gains.size())
                throw InputError("estimate_calibration: report shape mismatch");
            for (std::size_t c = 0; c < r.gains.size(); ++c)
                add_outer(acc[i], r.v[i].col(c), r.gains[c]);
        }
    }
    return calibration_from_covariances(acc, known_aod_deg, geometry, wavelengths);
}

Calibration estimate_calibration(std::span<const CsiSet> packets, double known_aod_deg,
                                 const ArrayGeometry &geometry, std::span<const double> wavelengths)
{
    if (packets.empty())
        throw InputError("estimate_calibration: no packets");
    const std::size_t k = packets.front().subcarriers();
    if (k == 0)
        throw InputError("estimate_calibration: packet without subcarriers");
    const std::size_t n = packets.front().tx();
    std::vector<ComplexMatrix> acc(k, ComplexMatrix(n, n));
    for (const auto &p : packets)
    {
        if (p.subcarriers() != k || p.tx() != n)
            throw InputError("estimate_calibration: packets differ in shape");
        for (std::size_t i = 0; i < k; ++i)
            acc[i] += adjoint_times(p.h[i], p.h[i]);
    }
    if (!wavelengths.empty())
        return calibration_from_covariances(acc, known_aod_deg, geometry, wavelengths);
    const auto &grid = packets.front().grid;
    if (grid.size() != k)
        throw InputError("estimate_calibration: subcarrier grid does not match the packets");
    std::vector<double> own(k);
    for (std::size_t i = 0; i < k; ++i)
        own[i] = grid.wavelength(i);
    return calibration_from_covariances(acc, known_aod_deg, geometry, own);
}

void MusicParams::validate() const
{
    if (paths < 1)
        throw ConfigError("MusicParams: need at least one path");
    if (packets < 1)
        throw ConfigError("MusicParams: need at least one packet");
    if (!(grid_step_deg > 0.0) || grid_step_deg > 90.0)
        throw ConfigError("MusicParams: grid step must be in (0, 90] degrees");
    if (!(element_spacing > 0.0) || !(wavelength > 0.0))
        throw ConfigError("MusicParams: spacing and wavelength must be positive");
    if (subarray_size < 1)
        throw ConfigError("MusicParams: sub-array parameter must be positive");
    if (subarray_mode == SubarrayMode::size && subarray_size <= paths)
        throw ConfigError("insufficient subarray size for L paths (L = " + std::to_string(paths) +
                          ", sub-array size = " + std::to_string(subarray_size) + ")");
}

std::size_t MusicParams::block_size(std::size_t dimension) const
{
    if (subarray_mode == SubarrayMode::size)
        return subarray_size;
    if (subarray_size > dimension)
        throw ConfigError("MusicParams: " + std::to_string(subarray_size) + " sub-arrays do not fit " +
                          std::to_string(dimension) + " elements");
    return dimension - subarray_size + 1;
}

AodEstimate estimate_aod(std::span<const Covariance> packet_covariances, const MusicParams &params)
{
    params.validate();
    if (packet_covariances.size() < params.packets)
        throw InputError("estimate_aod: " + std::to_string(packet_covariances.size()) + " packets supplied, " +
                         std::to_string(params.packets) + " required");
    const auto avg = average_covariances(packet_covariances.first(params.packets));
    const std::size_t block = params.block_size(avg.dimension());
    if (block <= params.paths)
        throw ConfigError("insufficient subarray size for L paths (L = " + std::to_string(params.paths) +
                          ", sub-array size = " + std::to_string(block) + ")");
    const auto smoothed = spatial_smooth(avg, block);
    const auto en = noise_subspace(smoothed, params.paths);
    const auto grid = angle_grid(params.grid_step_deg);
    const auto spectrum = music_spectrum(en, params.element_spacing, params.wavelength, grid);
    return find_peaks(spectrum, params.paths);
}

AodEstimate estimate_aod(std::span<const DecodedFeedback> reports, const MusicParams &params)
{
    std::vector<Covariance> covs;
    const Calibration *cal = params.calibration ? &*params.calibration : nullptr;
    for (std::size_t i = 0; i < std::min(reports.size(), params.packets); ++i)
        covs.push_back(covariance_from_bff(reports[i], cal));
    return estimate_aod(std::span<const Covariance>(covs), params);
}

AodEstimate estimate_aod(std::span<const BffReport> reports, const MusicParams &params)
{
    std::vector<DecodedFeedback> decoded;
    for (std::size_t i = 0; i < std::min(reports.size(), params.packets); ++i)
        decoded.push_back(decode_bff(reports[i]));
    return estimate_aod(std::span<const DecodedFeedback>(decoded), params);
}

AodEstimate estimate_aod(std::span<const CsiSet> packets, const MusicParams &params)
{
    std::vector<Covariance> covs;
    const Calibration *cal = params.calibration ? &*params.calibration : nullptr;
    for (std::size_t i = 0; i < std::min(packets.size(), params.packets); ++i)
        covs.push_back(covariance_from_csi(packets[i], params.csi_mode, cal));
    return estimate_aod(std::span<const Covariance>(covs), params);
}

} // namespace senselab
