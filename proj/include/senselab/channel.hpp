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

#pragma once

#include "senselab/numerics.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace senselab
{

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) noexcept { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) noexcept { return rad * 180.0 / kPi; }

// Uniform linear array. Element m sits at m * element_spacing along the array
// axis; angles are measured from broadside, positive toward increasing index.
struct ArrayGeometry
{
    std::size_t num_elements = 4;
    double element_spacing = 0.025; // meters

    void validate() const;
};

struct Path
{
    double aod_deg = 0.0;
    double aoa_deg = 0.0;
    cplx gain = 1.0;
    double excess_length = 0.0; // meters, relative to the reference path
};

using PathSet = std::vector<Path>;

struct SubcarrierGrid
{
    double center_hz = 5.18e9;
    double spacing_hz = 312.5e3;
    std::vector<int> indices;

    /// 20 MHz legacy layout: indices -26..-1, 1..26 around 5.18 GHz.
    static SubcarrierGrid legacy_20mhz(double center_hz = 5.18e9);

    std::size_t size() const noexcept { return indices.size(); }
    double frequency(std::size_t k) const noexcept { return center_hz + indices[k] * spacing_hz; }
    double wavelength(std::size_t k) const noexcept { return kSpeedOfLight / frequency(k); }
    double center_wavelength() const noexcept { return kSpeedOfLight / center_hz; }
    double bandwidth() const noexcept;

    void validate() const;
};

/// Channel matrices of one sounding packet: H_k is rx x tx (M x N).
struct CsiSet
{
    std::vector<ComplexMatrix> h;
    SubcarrierGrid grid;

    std::size_t rx() const noexcept { return h.empty() ? 0 : h.front().rows(); }
    std::size_t tx() const noexcept { return h.empty() ? 0 : h.front().cols(); }
    std::size_t subcarriers() const noexcept { return h.size(); }

    void validate() const;
};

/// exp(j 2 pi d sin(angle) m / lambda), m = 0..M-1. Throws DomainError for |angle| >= 90 deg.
std::vector<cplx> steering_vector(double angle_deg, const ArrayGeometry &geometry, double wavelength);

/// Same response without the domain guard; used for spectrum grids that
/// include the endfire points.
std::vector<cplx> steering_response(double angle_deg, std::size_t num_elements, double spacing_over_wavelength);

/// H_k = sum_l r_{l,k} a_rx(aoa_l) a_tx(aod_l)^H with
/// r_{l,k} = gain_l exp(-j 2 pi f_k excess_length_l / c).
CsiSet synthesize_csi(const PathSet &paths, const ArrayGeometry &tx, const ArrayGeometry &rx,
                      const SubcarrierGrid &grid);

/// Noise power per matrix entry for the requested SNR:
/// snr = mean_k ||H_k||_F^2 / (M N sigma^2).
double noise_power_for_snr(const CsiSet &csi, double snr_db);

inline constexpr double kNoiseDisabled = std::numeric_limits<double>::infinity();

/// Adds i.i.d. circular complex Gaussian noise (variance sigma^2/2 per real
/// component). snr_db = +inf returns the input unchanged.
CsiSet add_noise(const CsiSet &csi, double snr_db, std::uint64_t rng_seed);

/// Same, with an explicit per-entry noise power.
CsiSet add_noise_with_power(const CsiSet &csi, double noise_power, std::uint64_t rng_seed);

/// Multiplies transmit column n of every H_k by exp(j offsets_rad[n]),
/// emulating per-antenna phase offsets at the transmitter.
CsiSet apply_tx_phase_offsets(const CsiSet &csi, std::span<const double> offsets_rad);

} // namespace senselab
