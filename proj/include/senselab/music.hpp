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

#include "senselab/bff_codec.hpp"
#include "senselab/channel.hpp"
#include "senselab/numerics.hpp"

#include <optional>
#include <span>
#include <vector>

namespace senselab
{

/// Hermitian PSD matrix used as MUSIC input.
class Covariance
{
public:
    /// Throws InputError if `m` is not square or not Hermitian to 1e-9.
    explicit Covariance(ComplexMatrix m);

    const ComplexMatrix &matrix() const noexcept { return m_; }
    std::size_t dimension() const noexcept { return m_.rows(); }

private:
    ComplexMatrix m_;
};

/// Per-subcarrier diagonal unit-modulus compensation W_k, first entry 1.
struct Calibration
{
    std::vector<std::vector<cplx>> w; // [subcarrier][antenna]

    static Calibration identity(std::size_t subcarriers, std::size_t antennas);

    std::size_t subcarriers() const noexcept { return w.size(); }
    std::size_t dimension() const noexcept { return w.empty() ? 0 : w.front().size(); }

    /// Argument of every diagonal entry, radians, [subcarrier][antenna].
    std::vector<std::vector<double>> arguments() const;
    static Calibration from_arguments(const std::vector<std::vector<double>> &args);

    void validate() const;
};

enum class CsiCovarianceMode
{
    full,      // (1/K) sum_k H_k^H H_k
    first_row, // (1/K) sum_k h_k^H h_k, h_k the first CSI row
};

/// C = (1/K) sum_k W_k V_k diag(gains) V_k^H W_k^H.
Covariance covariance_from_bff(std::span<const ComplexMatrix> v, std::span<const double> gains,
                               const Calibration *calibration = nullptr);

Covariance covariance_from_bff(const DecodedFeedback &feedback, const Calibration *calibration = nullptr);

Covariance covariance_from_csi(const CsiSet &csi, CsiCovarianceMode mode = CsiCovarianceMode::full,
                               const Calibration *calibration = nullptr);

Covariance average_covariances(std::span<const Covariance> covs);

/// Mean of the contiguous subarray_size x subarray_size diagonal blocks.
Covariance spatial_smooth(const Covariance &c, std::size_t subarray_size);

/// Eigenvectors of the (dimension - paths) smallest eigenvalues.
ComplexMatrix noise_subspace(const Covariance &c, std::size_t paths);

struct MusicSpectrum
{
    std::vector<double> angles_deg;
    std::vector<double> quadform; // a^H E E^H a
    std::vector<double> g;        // 1 / quadform, +inf where quadform == 0
};

/// Closed interval [-90, 90] sampled every `step_deg` (endpoints included).
std::vector<double> angle_grid(double step_deg);

/// Evaluates the MUSIC pseudo-spectrum for a noise basis of `elements`-long
/// vectors. An empty basis yields quadform = 0 everywhere.
MusicSpectrum music_spectrum(std::span<const std::vector<cplx>> noise_basis, std::size_t elements,
                             double element_spacing, double wavelength, std::span<const double> grid_deg);

/// Same, with the basis as the columns of `noise`.
MusicSpectrum music_spectrum(const ComplexMatrix &noise, double element_spacing, double wavelength,
                             std::span<const double> grid_deg);

struct AodEstimate
{
    std::vector<double> angles_deg; // ascending
    MusicSpectrum spectrum;
};

/// The `paths` deepest interior local minima of the quadform, refined by a
/// parabola through log-quadform at the three neighbouring grid points.
/// Throws PeakDeficit when fewer minima exist.
AodEstimate find_peaks(const MusicSpectrum &spectrum, std::size_t paths);

/// Local maxima of g that rise at least `floor_ratio` times above the
/// spectrum median. Boundary points never qualify.
std::vector<double> dominant_peaks(const MusicSpectrum &spectrum, double floor_ratio = 10.0);

/// Per-subcarrier W_k from single-path measurements at a known AoD.
/// Covariances are averaged over all inputs before the eigendecomposition.
/// `wavelengths` holds one entry per subcarrier, or a single entry for all;
/// for CSI input an empty list selects the packets' own subcarrier grid.
Calibration estimate_calibration(std::span<const DecodedFeedback> reports, double known_aod_deg,
                                 const ArrayGeometry &geometry, std::span<const double> wavelengths);
Calibration estimate_calibration(std::span<const CsiSet> packets, double known_aod_deg,
                                 const ArrayGeometry &geometry, std::span<const double> wavelengths = {});

inline Calibration estimate_calibration(std::span<const DecodedFeedback> reports, double known_aod_deg,
                                        const ArrayGeometry &geometry, double wavelength)
{
    return estimate_calibration(reports, known_aod_deg, geometry, std::span<const double>(&wavelength, 1));
}
inline Calibration estimate_calibration(std::span<const CsiSet> packets, double known_aod_deg,
                                        const ArrayGeometry &geometry, double wavelength)
{
    return estimate_calibration(packets, known_aod_deg, geometry, std::span<const double>(&wavelength, 1));
}

// How MusicParams::subarray_size is read: as the number of elements per
// smoothing block (default) or as the number of blocks.
enum class SubarrayMode
{
    size,
    count,
};

struct MusicParams
{
    std::size_t paths = 2;          // L
    std::size_t subarray_size = 3;  // M'
    SubarrayMode subarray_mode = SubarrayMode::size;
    std::size_t packets = 10;       // N_pct
    double grid_step_deg = 0.02;
    double element_spacing = 0.025; // meters
    double wavelength = kSpeedOfLight / 5.18e9;
    CsiCovarianceMode csi_mode = CsiCovarianceMode::full;
    std::optional<Calibration> calibration;

    void validate() const;

    /// Block size actually used for an array of `dimension` elements.
    std::size_t block_size(std::size_t dimension) const;
};

/// Full pipeline from a list of per-packet covariances (the first
/// params.packets are used).
AodEstimate estimate_aod(std::span<const Covariance> packet_covariances, const MusicParams &params);

AodEstimate estimate_aod(std::span<const DecodedFeedback> reports, const MusicParams &params);
AodEstimate estimate_aod(std::span<const BffReport> reports, const MusicParams &params);
AodEstimate estimate_aod(std::span<const CsiSet> packets, const MusicParams &params);

} // namespace senselab
