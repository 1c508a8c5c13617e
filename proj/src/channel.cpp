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

#include "senselab/channel.hpp"
#include "senselab/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace senselab
{

void ArrayGeometry::validate() const
{
    if (num_elements < 2)
        throw InputError("ArrayGeometry: need at least 2 elements");
    if (!(element_spacing > 0.0) || !std::isfinite(element_spacing))
        throw InputError("ArrayGeometry: element spacing must be positive");
}

SubcarrierGrid SubcarrierGrid::legacy_20mhz(double center_hz)
{
    SubcarrierGrid g;
    g.center_hz = center_hz;
    g.spacing_hz = 312.5e3;
    for (int i = -26; i <= 26; ++i)
        if (i != 0)
            g.indices.push_back(i);
    return g;
}

double SubcarrierGrid::bandwidth() const noexcept
{
    // Nominal channel width: 64 FFT bins of the legacy layout.
    return 64.0 * spacing_hz;
}

void SubcarrierGrid::validate() const
{
    if (!(center_hz > 0.0) || !(spacing_hz > 0.0))
        throw InputError("SubcarrierGrid: center and spacing must be positive");
    for (std::size_t k = 1; k < indices.size(); ++k)
        if (indices[k] <= indices[k - 1])
            throw InputError("SubcarrierGrid: indices must be strictly increasing");
    for (std::size_t k = 0; k < indices.size(); ++k)
        if (!(frequency(k) > 0.0))
            throw InputError("SubcarrierGrid: non-positive subcarrier frequency");
}

void CsiSet::validate() const
{
    if (h.size() != grid.size())
        throw DimensionError("CsiSet: " + std::to_string(h.size()) + " matrices for " +
                             std::to_string(grid.size()) + " subcarriers");
    for (const auto &m : h)
    {
        if (m.rows() != rx() || m.cols() != tx())
            throw DimensionError("CsiSet: subcarrier matrices differ in shape");
        if (!m.all_finite())
            throw InputError("CsiSet: non-finite entry");
    }
    grid.validate();
}

std::vector<cplx> steering_response(double angle_deg, std::size_t num_elements, double spacing_over_wavelength)
{
    std::vector<cplx> a(num_elements);
    const double phase = 2.0 * kPi * spacing_over_wavelength * std::sin(deg2rad(angle_deg));
    a[0] = 1.0;
    for (std::size_t m = 1; m < num_elements; ++m)
        a[m] = std::polar(1.0, phase * static_cast<double>(m));
    return a;
}

std::vector<cplx> steering_vector(double angle_deg, const ArrayGeometry &geometry, double wavelength)
{
    if (!(std::abs(angle_deg) < 90.0))
        throw DomainError("steering_vector: angle " + std::to_string(angle_deg) + " deg outside (-90, 90)");
    if (!(wavelength > 0.0))
        throw InputError("steering_vector: wavelength must be positive");
    geometry.validate();
    return steering_response(angle_deg, geometry.num_elements, geometry.element_spacing / wavelength);
}

CsiSet synthesize_csi(const PathSet &paths, const ArrayGeometry &tx, const ArrayGeometry &rx,
                      const SubcarrierGrid &grid)
{
    if (paths.empty())
        throw InputError("synthesize_csi: empty path set");
    tx.validate();
    rx.validate();
    grid.validate();

    CsiSet out;
    out.grid = grid;
    out.h.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        const double lambda = grid.wavelength(k);
        const double f = grid.frequency(k);
        ComplexMatrix hk(rx.num_elements, tx.num_elements);
        for (const auto &p : paths)
        {
            const auto ar = steering_vector(p.aoa_deg, rx, lambda);
            const auto at = steering_vector(p.aod_deg, tx, lambda);
            const cplx r = p.gain * std::polar(1.0, -2.0 * kPi * f * p.excess_length / kSpeedOfLight);
            for (std::size_t m = 0; m < rx.num_elements; ++m)
                for (std::size_t n = 0; n < tx.num_elements; ++n)
                    hk(m, n) += ar[m] * r * std::conj(at[n]);
        }
        out.h.push_back(std::move(hk));
    }
    return out;
}

double noise_power_for_snr(const CsiSet &csi, double snr_db)
{
    if (csi.h.empty())
        throw InputError("noise_power_for_snr: empty CSI");
    double power = 0.0;
    for (const auto &m : csi.h)
        power += frobenius_norm_sq(m);
    power /= static_cast<double>(csi.h.size() * csi.rx() * csi.tx());
    return power / std::pow(10.0, snr_db / 10.0);
}

CsiSet add_noise_with_power(const CsiSet &csi, double noise_power, std::uint64_t rng_seed)
{
    if (csi.h.empty())
        throw InputError("add_noise: empty CSI");
    CsiSet out = csi;
    if (noise_power <= 0.0)
        return out;
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(noise_power / 2.0));
    for (auto &m : out.h)
        for (auto &z : m.data())
        {
            const double re = normal(rng);
            const double im = normal(rng);
            z += cplx(re, im);
        }
    return out;
}

CsiSet add_noise(const CsiSet &csi, double snr_db, std::uint64_t rng_seed)
{
    if (csi.h.empty())
        throw InputError("add_noise: empty CSI");
    if (std::isinf(snr_db) && snr_db > 0.0)
        return csi;
    double sigma2 = noise_power_for_snr(csi, snr_db);
    // All-zero CSI has no signal to reference; fall back to unit noise power.
    if (sigma2 == 0.0)
        sigma2 = 1.0;
    return add_noise_with_power(csi, sigma2, rng_seed);
}

CsiSet apply_tx_phase_offsets(const CsiSet &csi, std::span<const double> offsets_rad)
{
    if (offsets_rad.size() != csi.tx())
        throw DimensionError("apply_tx_phase_offsets: " + std::to_string(offsets_rad.size()) + " offsets for " +
                             std::to_string(csi.tx()) + " transmit antennas");
    CsiSet out = csi;
    for (auto &m : out.h)
        for (std::size_t n = 0; n < m.cols(); ++n)
        {
            const cplx f = std::polar(1.0, offsets_rad[n]);
            for (std::size_t r = 0; r < m.rows(); ++r)
                m(r, n) *= f;
        }
    return out;
}

} // namespace senselab
