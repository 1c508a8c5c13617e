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
#include "senselab/music.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace senselab
{

struct Point2
{
    double x = 0.0;
    double y = 0.0;
};

double distance(const Point2 &a, const Point2 &b) noexcept;

/// AP, STA and one specular reflector in the plane. Both arrays lie along
/// the x axis with element index increasing toward +x.
struct Scene
{
    Point2 ap{-3.0, 0.0};
    Point2 sta{0.0, 10.0};
    Point2 reflector{5.5, 3.0};
    ArrayGeometry ap_array{4, 0.025};
    ArrayGeometry sta_array{4, 0.025};
    double reflection_amplitude = 0.3;

    /// AP at (n_a - 5 m, 0 m), n_a in [0, 10].
    static Scene evaluation_layout(int ap_index);

    void validate() const;
};

/// Direct path (reference, excess length 0, gain 1/length) and the
/// reflected path (gain reflection_amplitude/length, excess length relative
/// to the direct path).
PathSet two_path_scene(const Scene &scene);
PathSet two_path_scene(int ap_index);

/// Geometric AoDs of the scene's paths, degrees, in path order.
std::vector<double> true_aods(const PathSet &paths);

enum class Method
{
    csi,
    bff,
};

std::string_view to_string(Method m) noexcept;
Method method_from_string(std::string_view s); // throws ConfigError

/// Per-path absolute errors after choosing the assignment of estimates to
/// truths that minimises the total absolute error. Aligned to `truth`.
std::vector<double> aod_error(std::span<const double> estimated, std::span<const double> truth);

struct TrialConfig
{
    std::vector<double> snr_db{5.0, 10.0, 20.0};
    int ap_index_min = 0;
    int ap_index_max = 10;
    std::size_t trials = 200;
    std::size_t packets = 10;
    AngleStep delta = AngleStep::pi32;
    std::size_t subarray_size = 3;
    SubarrayMode subarray_mode = SubarrayMode::size;
    std::size_t paths = 2;
    double grid_step_deg = 0.02;
    std::uint64_t seed = 1;
    unsigned threads = 0; // 0: SENSELAB_THREADS or hardware concurrency

    void validate() const;
};

struct ErrorRow
{
    double snr_db = 0.0;
    Method method = Method::csi;
    std::string path; // "direct" or "indirect"
    double median_abs_error_deg = 0.0;
};

struct ErrorTable
{
    std::vector<ErrorRow> rows;
    std::size_t samples_per_row = 0;
    std::size_t peak_deficits = 0; // estimates that returned fewer than L peaks

    /// Lookup; throws InputError when absent.
    double median(double snr_db, Method method, const std::string &path) const;
};

/// Thread count from SENSELAB_THREADS, falling back to hardware concurrency.
unsigned default_thread_count();

/// Deterministic seed for one (snr, position, trial, packet) cell.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                          std::uint64_t d = 0) noexcept;

/// Noisy packets of one trial: N_pct independent noise draws on `truth`.
std::vector<CsiSet> noisy_packets(const CsiSet &truth, double snr_db, std::size_t packets, std::uint64_t seed);

/// Runs both estimators on one set of packets. Peak deficits are padded by
/// repeating the deepest peak found (or 0 deg if none).
struct TrialOutcome
{
    std::vector<double> estimate_deg;
    bool peak_deficit = false;
};
TrialOutcome run_estimator(std::span<const CsiSet> packets, Method method, const MusicParams &params, AngleStep delta);

ErrorTable run_numerical_eval(const TrialConfig &config);

void write_error_table_csv(const ErrorTable &table, std::ostream &os);
void print_error_table(const ErrorTable &table, std::ostream &os);

/// One estimate on the evaluation layout; returns the spectrum for dumping.
AodEstimate spectrum_for_scene(const Scene &scene, double snr_db, Method method, std::uint64_t seed,
                               const MusicParams &params, AngleStep delta);

void write_spectrum_csv(const MusicSpectrum &spectrum, std::ostream &os);

} // namespace senselab
