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

#include "senselab/sim.hpp"
#include "senselab/error.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace senselab
{

double distance(const Point2 &a, const Point2 &b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

Scene Scene::evaluation_layout(int ap_index)
{
    if (ap_index < 0 || ap_index > 10)
        throw InputError("AP index " + std::to_string(ap_index) + " outside [0, 10]");
    Scene s;
    s.ap = {static_cast<double>(ap_index) - 5.0, 0.0};
    return s;
}

void Scene::validate() const
{
    ap_array.validate();
    sta_array.validate();
    if (!(reflection_amplitude > 0.0 && reflection_amplitude <= 1.0))
        throw InputError("Scene: reflection amplitude must be in (0, 1]");
    if (distance(ap, sta) == 0.0 || distance(ap, reflector) == 0.0 || distance(sta, reflector) == 0.0)
        throw InputError("Scene: positions must be distinct");
    // Everything has to lie in front of both arrays for the angles to stay in (-90, 90).
    if (!(sta.y > ap.y) || !(reflector.y > ap.y) || !(reflector.y < sta.y))
        throw InputError("Scene: reflector and STA must lie in front of the AP array (and vice versa)");
}

namespace
{

double angle_toward(const Point2 &from, const Point2 &to)
{
    return rad2deg(std::asin((to.x - from.x) / distance(from, to)));
}

} // namespace

PathSet two_path_scene(const Scene &scene)
{
    scene.validate();
    const double direct_len = distance(scene.ap, scene.sta);
    const double leg1 = distance(scene.ap, scene.reflector);
    const double leg2 = distance(scene.reflector, scene.sta);

    Path direct;
    direct.aod_deg = angle_toward(scene.ap, scene.sta);
    direct.aoa_deg = angle_toward(scene.sta, scene.ap);
    direct.gain = 1.0 / direct_len;
    direct.excess_length = 0.0;

    Path indirect;
    indirect.aod_deg = angle_toward(scene.ap, scene.reflector);
    indirect.aoa_deg = angle_toward(scene.sta, scene.reflector);
    indirect.gain = scene.reflection_amplitude / (leg1 + leg2);
    indirect.excess_length = leg1 + leg2 - direct_len;

    return {direct, indirect};
}

PathSet two_path_scene(int ap_index) { return two_path_scene(Scene::evaluation_layout(ap_index)); }

std::vector<double> true_aods(const PathSet &paths)
{
    std::vector<double> out;
    for (const auto &p : paths)
        out.push_back(p.aod_deg);
    return out;
}

std::string_view to_string(Method m) noexcept { return m == Method::csi ? "csi" : "bff"; }

Method method_from_string(std::string_view s)
{
    if (s == "csi")
        return Method::csi;
    if (s == "bff")
        return Method::bff;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected csi or bff)");
}

std::vector<double> aod_error(std::span<const double> estimated, std::span<const double> truth)
{
    if (estimated.size() != truth.size())
        throw InputError("aod_error: " + std::to_string(estimated.size()) + " estimates for " +
                         std::to_string(truth.size()) + " true angles");
    const std::size_t n = truth.size();
    std::vector<std::size_t> perm(n), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_total = std::numeric_limits<double>::infinity();
    do
    {
        double total = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            total += std::abs(estimated[perm[t]] - truth[t]);
        if (total < best_total)
        {
            best_total = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<double> err(n);
    for (std::size_t t = 0; t < n; ++t)
        err[t] = std::abs(estimated[best[t]] - truth[t]);
    return err;
}

void TrialConfig::validate() const
{
    if (snr_db.empty())
        throw ConfigError("TrialConfig: empty SNR list");
    for (double s : snr_db)
        if (std::isnan(s))
            throw ConfigError("TrialConfig: NaN SNR");
    if (ap_index_min < 0 || ap_index_max > 10 || ap_index_min > ap_index_max)
        throw ConfigError("TrialConfig: AP index range must lie within [0, 10]");
    if (trials < 1)
        throw ConfigError("TrialConfig: trials must be >= 1");
    if (packets < 1)
        throw ConfigError("TrialConfig: packet count must be >= 1");
    if (paths != 2)
        throw ConfigError("TrialConfig: the evaluation layout has exactly 2 paths");
    MusicParams p;
    p.paths = paths;
    p.subarray_size = subarray_size;
    p.subarray_mode = subarray_mode;
    p.packets = packets;
    p.grid_step_deg = grid_step_deg;
    p.validate();
    p.block_size(4);
}

double ErrorTable::median(double snr_db, Method method, const std::string &path) const
{
    for (const auto &r : rows)
        if (r.snr_db == snr_db && r.method == method && r.path == path)
            return r.median_abs_error_deg;
    throw InputError("ErrorTable: no row for snr " + std::to_string(snr_db) + ", " + std::string(to_string(method)) +
                     ", " + path);
}

unsigned default_thread_count()
{
    if (const char *env = std::getenv("SENSELAB_THREADS"))
    {
        char *end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                          std::uint64_t d) noexcept
{
    // splitmix64 over the tuple
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(seed);
    for (std::uint64_t v : {a, b, c, d})
        h = mix(h ^ mix(v));
    return h;
}

std::vector<CsiSet> noisy_packets(const CsiSet &truth, double snr_db, std::size_t packets, std::uint64_t seed)
{
    std::vector<CsiSet> out;
    out.reserve(packets);
    const bool noiseless = std::isinf(snr_db) && snr_db > 0.0;
    const double sigma2 = noiseless ? 0.0 : noise_power_for_snr(truth, snr_db);
    for (std::size_t p = 0; p < packets; ++p)
        out.push_back(noiseless ? truth : add_noise_with_power(truth, sigma2, derive_seed(seed, p)));
    return out;
}

TrialOutcome run_estimator(std::span<const CsiSet> packets, Method method, const MusicParams &params, AngleStep delta)
{
    TrialOutcome out;
    try
    {
        if (method == Method::csi)
        {
            out.estimate_deg = estimate_aod(packets, params).angles_deg;
        }
        else
        {
            QuantizationConfig q;
            q.angle_step = delta;
            std::vector<DecodedFeedback> decoded;
            decoded.reserve(packets.size());
            for (const auto &p : packets)
                decoded.push_back(decode_bff(encode_bff(p, q)));
            out.estimate_deg = estimate_aod(std::span<const DecodedFeedback>(decoded), params).angles_deg;
        }
    }
    catch (const PeakDeficit &e)
    {
        out.peak_deficit = true;
        out.estimate_deg = e.found();
        const double pad = out.estimate_deg.empty() ? 0.0 : out.estimate_deg.front();
        out.estimate_deg.resize(params.paths, pad);
    }
    return out;
}

namespace
{

MusicParams params_for(const TrialConfig &config, const Scene &scene, const SubcarrierGrid &grid)
{
    MusicParams p;
    p.paths = config.paths;
    p.subarray_size = config.subarray_size;
    p.subarray_mode = config.subarray_mode;
    p.packets = config.packets;
    p.grid_step_deg = config.grid_step_deg;
    p.element_spacing = scene.ap_array.element_spacing;
    p.wavelength = grid.center_wavelength();
    return p;
}

double median_of(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn &&fn)
{
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1)
    {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;)
            {
                const std::size_t i = next.fetch_add(1);
                if (i >= count)
                    return;
                try
                {
                    fn(i);
                }
                catch (...)
                {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    for (auto &th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace

ErrorTable run_numerical_eval(const TrialConfig &config)
{
    config.validate();
    const auto grid = SubcarrierGrid::legacy_20mhz();
    const std::size_t n_snr = config.snr_db.size();
    const std::size_t n_pos = static_cast<std::size_t>(config.ap_index_max - config.ap_index_min + 1);
    const std::size_t n_trials = config.trials;

    std::vector<Scene> scenes;
    std::vector<PathSet> path_sets;
    std::vector<CsiSet> truths;
    for (std::size_t p = 0; p < n_pos; ++p)
    {
        scenes.push_back(Scene::evaluation_layout(config.ap_index_min + static_cast<int>(p)));
        path_sets.push_back(two_path_scene(scenes.back()));
        truths.push_back(synthesize_csi(path_sets.back(), scenes.back().ap_array, scenes.back().sta_array, grid));
    }

    // [task][method][path]
    const std::size_t tasks = n_snr * n_pos * n_trials;
    std::vector<std::array<std::array<double, 2>, 2>> errors(tasks);
    std::vector<std::array<bool, 2>> deficits(tasks);

    parallel_for(tasks, config.threads ? config.threads : default_thread_count(), [&](std::size_t task) {
        const std::size_t s = task / (n_pos * n_trials);
        const std::size_t p = (task / n_trials) % n_pos;
        const std::size_t t = task % n_trials;
        const auto packets = noisy_packets(truths[p], config.snr_db[s], config.packets,
                                           derive_seed(config.seed, s, static_cast<std::uint64_t>(p), t));
        const auto params = params_for(config, scenes[p], grid);
        const auto truth = true_aods(path_sets[p]);
        for (Method m : {Method::csi, Method::bff})
        {
            const auto outcome = run_estimator(packets, m, params, config.delta);
            const auto err = aod_error(outcome.estimate_deg, truth);
            const auto mi = static_cast<std::size_t>(m);
            errors[task][mi] = {err[0], err[1]};
            deficits[task][mi] = outcome.peak_deficit;
        }
    });

    ErrorTable table;
    table.samples_per_row = n_pos * n_trials;
    for (std::size_t s = 0; s < n_snr; ++s)
        for (Method m : {Method::csi, Method::bff})
            for (std::size_t path = 0; path < 2; ++path)
            {
                std::vector<double> sample;
                sample.reserve(n_pos * n_trials);
                for (std::size_t i = s * n_pos * n_trials; i < (s + 1) * n_pos * n_trials; ++i)
                    sample.push_back(errors[i][static_cast<std::size_t>(m)][path]);
                table.rows.push_back({config.snr_db[s], m, path == 0 ? "direct" : "indirect", median_of(sample)});
            }
    for (const auto &d : deficits)
        table.peak_deficits += static_cast<std::size_t>(d[0]) + static_cast<std::size_t>(d[1]);
    return table;
}

namespace
{

std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

void write_error_table_csv(const ErrorTable &table, std::ostream &os)
{
    os << "snr_db,method,path,median_abs_error_deg\n";
    for (const auto &r : table.rows)
        os << format_number(r.snr_db) << ',' << to_string(r.method) << ',' << r.path << ','
           << format_number(r.median_abs_error_deg) << '\n';
}

void print_error_table(const ErrorTable &table, std::ostream &os)
{
    std::vector<double> snrs;
    for (const auto &r : table.rows)
        if (std::find(snrs.begin(), snrs.end(), r.snr_db) == snrs.end())
            snrs.push_back(r.snr_db);

    os << "Median absolute AoD error [deg] (" << table.samples_per_row << " estimates per cell)\n";
    os << std::left << std::setw(10) << "SNR" << std::right << std::setw(12) << "CSI direct" << std::setw(14)
       << "CSI indirect" << std::setw(12) << "BFF direct" << std::setw(14) << "BFF indirect" << '\n';
    os << std::fixed << std::setprecision(3);
    for (double s : snrs)
    {
        os << std::left << std::setw(10) << (format_number(s) + " dB") << std::right;
        os << std::setw(12) << table.median(s, Method::csi, "direct") << std::setw(14)
           << table.median(s, Method::csi, "indirect") << std::setw(12) << table.median(s, Method::bff, "direct")
           << std::setw(14) << table.median(s, Method::bff, "indirect") << '\n';
    }
    os << std::defaultfloat;
    if (table.peak_deficits > 0)
        os << "note: " << table.peak_deficits << " estimates returned fewer peaks than paths\n";
}

AodEstimate spectrum_for_scene(const Scene &scene, double snr_db, Method method, std::uint64_t seed,
                               const MusicParams &params, AngleStep delta)
{
    const auto grid = SubcarrierGrid::legacy_20mhz();
    const auto paths = two_path_scene(scene);
    const auto truth = synthesize_csi(paths, scene.ap_array, scene.sta_array, grid);
    const auto packets = noisy_packets(truth, snr_db, params.packets, derive_seed(seed, 0));

    std::vector<Covariance> covs;
    if (method == Method::csi)
    {
        for (const auto &p : packets)
            covs.push_back(covariance_from_csi(p, params.csi_mode));
    }
    else
    {
        QuantizationConfig q;
        q.angle_step = delta;
        for (const auto &p : packets)
            covs.push_back(covariance_from_bff(decode_bff(encode_bff(p, q))));
    }
    params.validate();
    const auto avg = average_covariances(covs);
    const auto en = noise_subspace(spatial_smooth(avg, params.block_size(avg.dimension())), params.paths);
    const auto angles = angle_grid(params.grid_step_deg);
    const auto spectrum = music_spectrum(en, params.element_spacing, params.wavelength, angles);
    try
    {
        return find_peaks(spectrum, params.paths);
    }
    catch (const PeakDeficit &e)
    {
        return {e.found(), spectrum};
    }
}

void write_spectrum_csv(const MusicSpectrum &spectrum, std::ostream &os)
{
    os << "angle_deg,quadform,g\n";
    char buf[128];
    for (std::size_t i = 0; i < spectrum.angles_deg.size(); ++i)
    {
        std::snprintf(buf, sizeof buf, "%.6f,%.17g,%.17g\n", spectrum.angles_deg[i], spectrum.quadform[i],
                      spectrum.g[i]);
        os << buf;
    }
}

} // namespace senselab
