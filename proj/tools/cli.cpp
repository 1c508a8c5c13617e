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

#include "cli.hpp"

#include "senselab/bff_codec.hpp"
#include "senselab/channel.hpp"
#include "senselab/error.hpp"
#include "senselab/io.hpp"
#include "senselab/music.hpp"
#include "senselab/numerics.hpp"
#include "senselab/sim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#ifndef SENSELAB_VERSION
#define SENSELAB_VERSION "0.0.0"
#endif

namespace senselab::cli
{

namespace fs = std::filesystem;
using nlohmann::json;

const char *version() noexcept { return SENSELAB_VERSION; }

json RunManifest::to_json() const
{
    return json{{"command", command}, {"argv", argv},       {"params", params},
                {"seed", seed},       {"version", version}, {"outputs", outputs}};
}

RunManifest RunManifest::from_json(const json &j)
{
    RunManifest m;
    try
    {
        m.command = j.at("command").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.params = j.value("params", json::object());
        m.seed = j.value("seed", std::uint64_t{0});
        m.version = j.value("version", std::string{});
        m.outputs = j.value("outputs", std::vector<std::string>{});
    }
    catch (const json::exception &e)
    {
        throw DecodeError(std::string("manifest: ") + e.what());
    }
    if (m.argv.empty() || m.argv.front() != m.command)
        throw DecodeError("manifest: 'argv' must start with the command name");
    return m;
}

namespace
{

std::string num(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::string join(const std::vector<T> &values)
{
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (i)
            s += ',';
        if constexpr (std::is_floating_point_v<T>)
            s += num(values[i]);
        else
            s += std::to_string(values[i]);
    }
    return s;
}

double parse_snr(const std::string &s)
{
    if (s == "none" || s == "inf")
        return kNoiseDisabled;
    try
    {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v))
            throw std::invalid_argument(s);
        return v;
    }
    catch (const std::exception &)
    {
        throw ConfigError("--snr: expected a number in dB or 'none', got '" + s + "'");
    }
}

// Resolved flag list of one run; doubles as the manifest argv and params.
class Resolved
{
public:
    explicit Resolved(std::string command) : argv_{std::move(command)} {}
    Resolved(std::string command, std::string subcommand) : argv_{std::move(command), subcommand}
    {
        params_["subcommand"] = std::move(subcommand);
    }

    Resolved &flag(const std::string &name, const std::string &value)
    {
        argv_.push_back(name);
        argv_.push_back(value);
        params_[name.substr(2)] = value;
        return *this;
    }

    Resolved &flag(const std::string &name, double value) { return flag(name, num(value)); }
    Resolved &flag(const std::string &name, std::size_t value) { return flag(name, std::to_string(value)); }
    Resolved &flag(const std::string &name, int value) { return flag(name, std::to_string(value)); }
    Resolved &flag(const std::string &name, std::uint64_t value, bool) { return flag(name, std::to_string(value)); }

    Resolved &switch_on(const std::string &name)
    {
        argv_.push_back(name);
        params_[name.substr(2)] = true;
        return *this;
    }

    RunManifest manifest(std::uint64_t seed) const
    {
        RunManifest m;
        m.command = argv_.front();
        m.argv = argv_;
        m.params = params_;
        m.seed = seed;
        m.version = version();
        return m;
    }

private:
    std::vector<std::string> argv_;
    json params_ = json::object();
};

class Outputs
{
public:
    Outputs(fs::path dir, RunManifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

    fs::path path(const std::string &name)
    {
        const auto p = dir_ / name;
        manifest_.outputs.push_back(p.generic_string());
        return p;
    }

    void write_text(const fs::path &p, const std::string &content) const
    {
        ensure_dir();
        std::ofstream f(p, std::ios::binary);
        if (!f || !(f << content) || !f.flush())
            throw IoError("cannot write '" + p.string() + "'");
    }

    void write_bytes(const fs::path &p, const std::vector<std::uint8_t> &bytes) const
    {
        ensure_dir();
        std::ofstream f(p, std::ios::binary);
        f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f.flush())
            throw IoError("cannot write '" + p.string() + "'");
    }

    void write_json(const fs::path &p, const json &j) const { write_text(p, j.dump(1) + "\n"); }

    /// One manifest per artifact, each listing every output of the run.
    void finish() const
    {
        for (const auto &o : manifest_.outputs)
            write_text(o + ".manifest.json", manifest_.to_json().dump(1) + "\n");
    }

private:
    void ensure_dir() const
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec)
            throw IoError("cannot create '" + dir_.string() + "': " + ec.message());
    }

    fs::path dir_;
    RunManifest manifest_;
};

// Options shared by the estimation commands.
struct MusicFlags
{
    std::size_t npct = 10;
    std::size_t subarray_size = 0; // 0: paths + 1
    std::string subarray_mode = "size";
    std::size_t paths = 2;
    double grid_step = 0.02;
    std::string delta = "pi32";

    void add_to(CLI::App *app)
    {
        app->add_option("--npct", npct, "Feedback packets averaged per estimate")->capture_default_str();
        app->add_option("--subarray-size", subarray_size,
                        "Smoothing sub-array size M' (default: paths + 1)");
        app->add_option("--subarray-mode", subarray_mode, "Read --subarray-size as a block size or a block count")
            ->check(CLI::IsMember({"size", "count"}))
            ->capture_default_str();
        app->add_option("--paths", paths, "Number of paths L")->capture_default_str();
        app->add_option("--grid-step", grid_step, "Spectrum grid step, degrees")->capture_default_str();
        app->add_option("--delta", delta, "Angle quantization step: pi4|pi8|pi16|pi32|none")->capture_default_str();
    }

    void resolve(std::ostream &err)
    {
        if (subarray_size == 0)
            subarray_size = subarray_mode == "size" ? paths + 1 : 2;
        if (subarray_mode == "size" && paths == 2 && subarray_size == 3)
            err << "note: two-path estimation uses sub-array size 3; size 2 leaves an empty noise subspace\n";
    }

    void record(Resolved &r) const
    {
        r.flag("--npct", npct)
            .flag("--subarray-size", subarray_size)
            .flag("--subarray-mode", subarray_mode)
            .flag("--paths", paths)
            .flag("--grid-step", grid_step)
            .flag("--delta", delta);
    }

    SubarrayMode mode() const { return subarray_mode == "count" ? SubarrayMode::count : SubarrayMode::size; }

    MusicParams params() const
    {
        MusicParams p;
        p.paths = paths;
        p.subarray_size = subarray_size;
        p.subarray_mode = mode();
        p.packets = npct;
        p.grid_step_deg = grid_step;
        p.validate();
        return p;
    }
};

std::vector<CsiSet> load_csi_packets(const fs::path &path)
{
    std::vector<CsiSet> out;
    for (const auto &p : io::packets_of(io::read_json_file(path)))
    {
        if (io::detect_kind(p) != io::DumpKind::csi)
            throw DecodeError(path.string() + ": expected a CSI dump");
        out.push_back(io::csi_from_json(p));
    }
    return out;
}

json packets_json(const std::vector<json> &items)
{
    return items.size() == 1 ? items.front() : json(items);
}

CsiSet random_csi(std::size_t rx, std::size_t tx, std::size_t subcarriers, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    CsiSet csi;
    csi.grid = SubcarrierGrid::legacy_20mhz();
    csi.grid.indices.resize(std::min(subcarriers, csi.grid.indices.size()));
    while (csi.grid.indices.size() < subcarriers)
        csi.grid.indices.push_back(static_cast<int>(csi.grid.indices.size()) - 26);
    for (std::size_t k = 0; k < subcarriers; ++k)
    {
        ComplexMatrix h(rx, tx);
        for (auto &z : h.data())
            z = cplx(n(rng), n(rng));
        csi.h.push_back(std::move(h));
    }
    return csi;
}

double to_db(double linear) { return linear > 0.0 ? 10.0 * std::log10(linear) : kGainFloorDb; }

// ---------------------------------------------------------------- eval

struct EvalCommand
{
    std::vector<double> snr{5.0, 10.0, 20.0};
    std::vector<int> ap_index{0, 10};
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    MusicFlags music;
    std::string output = ".";

    void add_to(CLI::App *app)
    {
        app->add_option("--snr", snr, "SNR list, dB")->delimiter(',')->capture_default_str();
        app->add_option("--ap-index", ap_index, "AP position index, or a range lo,hi")
            ->delimiter(',')
            ->expected(1, 2)
            ->capture_default_str();
        app->add_option("--trials", trials, "Monte-Carlo trials per SNR and position")->capture_default_str();
        app->add_option("--seed", seed, "Master seed")->capture_default_str();
        app->add_option("--threads", threads, "Worker threads (0: SENSELAB_THREADS or all cores)");
        music.add_to(app);
        app->add_option("-o,--output", output, "Output directory")->capture_default_str();
    }

    int run(std::ostream &out, std::ostream &err)
    {
        music.resolve(err);
        if (ap_index.size() == 1)
            ap_index.push_back(ap_index.front());

        TrialConfig c;
        c.snr_db = snr;
        c.ap_index_min = ap_index[0];
        c.ap_index_max = ap_index[1];
        c.trials = trials;
        c.packets = music.npct;
        c.delta = angle_step_from_string(music.delta);
        c.subarray_size = music.subarray_size;
        c.subarray_mode = music.mode();
        c.paths = music.paths;
        c.grid_step_deg = music.grid_step;
        c.seed = seed;
        c.threads = threads;
        c.validate();
        music.params();

        Resolved r("eval");
        r.flag("--snr", join(snr)).flag("--ap-index", join(ap_index)).flag("--trials", trials).flag("--seed", seed,
                                                                                                      true);
        music.record(r);

        const auto table = run_numerical_eval(c);
        print_error_table(table, out);

        Outputs o(output, r.manifest(seed));
        const auto csv = o.path("error_table.csv");
        std::ostringstream ss;
        write_error_table_csv(table, ss);
        o.write_text(csv, ss.str());
        o.finish();
        out << "wrote " << csv.generic_string() << '\n';
        return kOk;
    }
};

// ------------------------------------------------------------ spectrum

struct SpectrumCommand
{
    int ap_index = 2;
    std::string snr = "20";
    std::string method = "bff";
    std::uint64_t seed = 1;
    MusicFlags music;
    std::string output = ".";

    void add_to(CLI::App *app)
    {
        app->add_option("--ap-index", ap_index, "AP position index 0..10")->capture_default_str();
        app->add_option("--snr", snr, "SNR, dB, or 'none'")->capture_default_str();
        app->add_option("--method", method, "csi|bff")->check(CLI::IsMember({"csi", "bff"}))->capture_default_str();
        app->add_option("--seed", seed, "Seed")->capture_default_str();
        music.add_to(app);
        app->add_option("-o,--output", output, "Output directory")->capture_default_str();
    }

    int run(std::ostream &out, std::ostream &err)
    {
        music.resolve(err);
        const double snr_db = parse_snr(snr);
        const auto params = music.params();
        const auto delta = angle_step_from_string(music.delta);
        const auto scene = Scene::evaluation_layout(ap_index);

        Resolved r("spectrum");
        r.flag("--ap-index", ap_index).flag("--snr", snr).flag("--method", method).flag("--seed", seed, true);
        music.record(r);

        const auto est = spectrum_for_scene(scene, snr_db, method_from_string(method), seed, params, delta);
        const auto truth = true_aods(two_path_scene(scene));

        out << "estimated AoD [deg]:";
        for (double a : est.angles_deg)
            out << ' ' << num(a);
        out << "\ngeometric AoD [deg]:";
        for (double a : truth)
            out << ' ' << num(a);
        out << "\ndominant peaks: " << dominant_peaks(est.spectrum).size() << '\n';

        Outputs o(output, r.manifest(seed));
        const auto csv = o.path("spectrum.csv");
        std::ostringstream ss;
        write_spectrum_csv(est.spectrum, ss);
        o.write_text(csv, ss.str());
        o.finish();
        out << "wrote " << csv.generic_string() << '\n';
        return kOk;
    }
};

// ------------------------------------------------------------ simulate

struct SimulateCommand
{
    int ap_index = 2;
    std::string snr = "none";
    std::size_t npct = 1;
    std::uint64_t seed = 1;
    std::vector<double> offsets_deg;
    bool direct_only = false;
    std::string output = ".";

    void add_to(CLI::App *app)
    {
        app->add_option("--ap-index", ap_index, "AP position index 0..10")->capture_default_str();
        app->add_option("--snr", snr, "SNR, dB, or 'none'")->capture_default_str();
        app->add_option("--npct", npct, "Packets to emit")->capture_default_str();
        app->add_option("--seed", seed, "Seed")->capture_default_str();
        app->add_option("--tx-offsets", offsets_deg, "Per-antenna AP phase offsets, degrees")->delimiter(',');
        app->add_flag("--direct-only", direct_only, "Keep only the direct path");
        app->add_option("-o,--output", output, "Output directory")->capture_default_str();
    }

    int run(std::ostream &out, std::ostream &)
    {
        const double snr_db = parse_snr(snr);
        if (npct == 0)
            throw ConfigError("--npct must be at least 1");
        const auto scene = Scene::evaluation_layout(ap_index);
        auto paths = two_path_scene(scene);
        if (direct_only)
            paths.resize(1);
        auto truth = synthesize_csi(paths, scene.ap_array, scene.sta_array, SubcarrierGrid::legacy_20mhz());
        if (!offsets_deg.empty())
        {
            if (offsets_deg.size() != truth.tx())
                throw ConfigError("--tx-offsets: expected " + std::to_string(truth.tx()) + " values");
            std::vector<double> rad;
            for (double d : offsets_deg)
                rad.push_back(deg2rad(d));
            truth = apply_tx_phase_offsets(truth, rad);
        }
        std::vector<CsiSet> packets(npct, truth);
        if (std::isfinite(snr_db))
            packets = noisy_packets(truth, snr_db, npct, derive_seed(seed, 0));

        Resolved r("simulate");
        r.flag("--ap-index", ap_index).flag("--snr", snr).flag("--npct", npct).flag("--seed", seed, true);
        if (!offsets_deg.empty())
            r.flag("--tx-offsets", join(offsets_deg));
        if (direct_only)
            r.switch_on("--direct-only");

        std::vector<json> items;
        for (const auto &p : packets)
            items.push_back(io::csi_to_json(p));

        Outputs o(output, r.manifest(seed));
        const auto file = o.path("csi.json");
        o.write_json(file, packets_json(items));
        o.finish();
        out << "geometric AoD [deg]:";
        for (double a : true_aods(paths))
            out << ' ' << num(a);
        out << "\nwrote " << file.generic_string() << '\n';
        return kOk;
    }
};

// --------------------------------------------------------------- codec

struct CodecCommand
{
    std::string input;
    std::string delta = "pi32";
    std::size_t streams = 0;
    std::size_t rx = 2;
    std::size_t tx = 3;
    std::size_t subcarriers = 52;
    std::uint64_t seed = 1;
    std::string output = ".";

    CLI::App *encode = nullptr;
    CLI::App *decode = nullptr;
    CLI::App *roundtrip = nullptr;

    void add_to(CLI::App *app)
    {
        app->require_subcommand(1);
        encode = app->add_subcommand("encode", "CSI dump to BFF dump and packed reports");
        decode = app->add_subcommand("decode", "BFF dump to feedback matrices and gains");
        roundtrip = app->add_subcommand("roundtrip", "Encode, pack, unpack and decode; report distortion");

        encode->add_option("-i,--input", input, "CSI dump")->required();
        decode->add_option("-i,--input", input, "BFF dump")->required();
        roundtrip->add_option("-i,--input", input, "CSI dump (default: random channel)");
        for (auto *s : {encode, roundtrip})
        {
            s->add_option("--delta", delta, "pi4|pi8|pi16|pi32|none")->capture_default_str();
            s->add_option("--streams", streams, "Fed-back streams (0: min(M, N))")->capture_default_str();
        }
        roundtrip->add_option("--rx", rx, "Random channel receive antennas")->capture_default_str();
        roundtrip->add_option("--tx", tx, "Random channel transmit antennas")->capture_default_str();
        roundtrip->add_option("--subcarriers", subcarriers, "Random channel subcarriers")->capture_default_str();
        roundtrip->add_option("--seed", seed, "Random channel seed")->capture_default_str();
        for (auto *s : {encode, decode, roundtrip})
            s->add_option("-o,--output", output, "Output directory")->capture_default_str();
    }

    QuantizationConfig config() const
    {
        QuantizationConfig q;
        q.angle_step = angle_step_from_string(delta);
        q.validate();
        return q;
    }

    int run(std::ostream &out, std::ostream &)
    {
        if (encode->parsed())
            return run_encode(out);
        if (decode->parsed())
            return run_decode(out);
        return run_roundtrip(out);
    }

    int run_encode(std::ostream &out)
    {
        const auto q = config();
        const auto packets = load_csi_packets(input);
        Resolved r("codec", "encode");
        r.flag("--input", input).flag("--delta", delta).flag("--streams", streams);

        std::vector<json> items;
        std::vector<std::uint8_t> packed;
        std::size_t bits = 0;
        for (const auto &p : packets)
        {
            const auto report = encode_bff(p, q, streams);
            items.push_back(io::bff_to_json(report));
            const auto bytes = pack_report(report);
            packed.insert(packed.end(), bytes.begin(), bytes.end());
            bits = q.lossless() ? 0 : report.angle_bits_per_subcarrier();
        }

        Outputs o(output, r.manifest(0));
        const auto dump = o.path("bff.json");
        const auto bin = o.path("bff.bin");
        o.write_json(dump, packets_json(items));
        o.write_bytes(bin, packed);
        o.finish();
        if (!q.lossless())
            out << "angle bits per subcarrier: " << bits << '\n';
        out << "packed bytes: " << packed.size() << '\n';
        out << "wrote " << dump.generic_string() << ", " << bin.generic_string() << '\n';
        return kOk;
    }

    int run_decode(std::ostream &out)
    {
        std::vector<json> items;
        for (const auto &p : io::packets_of(io::read_json_file(input)))
        {
            if (io::detect_kind(p) != io::DumpKind::bff)
                throw DecodeError(input + ": expected a BFF dump");
            items.push_back(io::decoded_to_json(decode_bff(io::bff_from_json(p))));
        }
        Resolved r("codec", "decode");
        r.flag("--input", input);
        Outputs o(output, r.manifest(0));
        const auto file = o.path("decoded.json");
        o.write_json(file, packets_json(items));
        o.finish();
        out << "wrote " << file.generic_string() << '\n';
        return kOk;
    }

    int run_roundtrip(std::ostream &out)
    {
        const auto q = config();
        std::vector<CsiSet> packets;
        if (input.empty())
        {
            if (rx == 0 || tx == 0 || subcarriers == 0)
                throw ConfigError("--rx, --tx and --subcarriers must be at least 1");
            packets.push_back(random_csi(rx, tx, subcarriers, seed));
        }
        else
        {
            packets = load_csi_packets(input);
        }

        double worst_angle = 0.0;
        double worst_gain_db = 0.0;
        std::size_t bits = 0;
        std::size_t bytes = 0;
        bool packed_ok = true;
        GivensShape shape{};
        for (const auto &p : packets)
        {
            const auto report = encode_bff(p, q, streams);
            shape = report.shape;
            bits = q.lossless() ? 0 : report.angle_bits_per_subcarrier();
            const auto packed = pack_report(report);
            bytes = packed.size();
            const auto back = unpack_report(packed, report.shape, report.config);
            packed_ok = packed_ok && back == report;
            const auto decoded = decode_bff(back);

            std::vector<double> exact_gain(report.shape.cols, 0.0);
            for (std::size_t k = 0; k < p.subcarriers(); ++k)
            {
                const auto s = svd(p.h[k]);
                const auto v = s.v.left_cols(report.shape.cols);
                for (double a : principal_angles(v, decoded.v[k]))
                    worst_angle = std::max(worst_angle, a);
                for (std::size_t c = 0; c < report.shape.cols; ++c)
                    exact_gain[c] += s.singular_values[c] * s.singular_values[c] / double(p.subcarriers());
            }
            for (std::size_t c = 0; c < report.shape.cols; ++c)
                worst_gain_db = std::max(worst_gain_db, std::abs(to_db(decoded.gains[c]) - to_db(exact_gain[c])));
        }

        Resolved r("codec", "roundtrip");
        r.flag("--delta", delta).flag("--streams", streams);
        if (input.empty())
            r.flag("--rx", rx).flag("--tx", tx).flag("--subcarriers", subcarriers).flag("--seed", seed, true);
        else
            r.flag("--input", input);

        const json report{{"packets", packets.size()},
                          {"shape", {shape.rows, shape.cols}},
                          {"delta", delta},
                          {"angle_bits_per_subcarrier", bits},
                          {"packed_bytes", bytes},
                          {"packed_roundtrip_exact", packed_ok},
                          {"max_subspace_angle_rad", worst_angle},
                          {"max_gain_error_db", worst_gain_db}};

        Outputs o(output, r.manifest(input.empty() ? seed : 0));
        const auto file = o.path("roundtrip.json");
        o.write_json(file, report);
        o.finish();

        out << "feedback shape: " << shape.rows << "x" << shape.cols << '\n';
        if (!q.lossless())
            out << "angle bits per subcarrier: " << bits << '\n';
        out << "packed bytes per report: " << bytes << '\n';
        out << "packed round trip exact: " << (packed_ok ? "yes" : "no") << '\n';
        out << "max subspace angle [rad]: " << num(worst_angle) << '\n';
        out << "max gain error [dB]: " << num(worst_gain_db) << '\n';
        out << "wrote " << file.generic_string() << '\n';
        return packed_ok ? kOk : kNumerical;
    }
};

// ----------------------------------------------------------- calibrate

struct CalibrateCommand
{
    std::string input;
    double known_aod = 0.0;
    double spacing = 0.025;
    double center_hz = 0.0;
    std::string output = ".";

    void add_to(CLI::App *app)
    {
        app->add_option("-i,--input", input, "CSI or BFF dump of a single-path measurement")->required();
        app->add_option("--known-aod", known_aod, "Known AoD of the measurement, degrees")->required();
        app->add_option("--spacing", spacing, "Element spacing, meters")->capture_default_str();
        app->add_option("--center-hz", center_hz, "Carrier frequency (default: from the CSI dump, else 5.18 GHz)");
        app->add_option("-o,--output", output, "Output directory")->capture_default_str();
    }

    int run(std::ostream &out, std::ostream &)
    {
        const auto items = io::packets_of(io::read_json_file(input));
        const auto kind = io::detect_kind(items.front());

        Calibration cal;
        std::vector<CsiSet> csi;
        std::vector<DecodedFeedback> bff;
        std::size_t elements = 0;
        double fc = center_hz;
        for (const auto &p : items)
        {
            if (io::detect_kind(p) != kind)
                throw DecodeError(input + ": mixed CSI and BFF packets");
            if (kind == io::DumpKind::csi)
            {
                csi.push_back(io::csi_from_json(p));
                elements = csi.back().tx();
                if (fc == 0.0)
                    fc = csi.back().grid.center_hz;
            }
            else
            {
                bff.push_back(decode_bff(io::bff_from_json(p)));
                elements = bff.back().v.front().rows();
            }
        }
        if (fc == 0.0)
            fc = 5.18e9;
        if (!(fc > 0.0) || !std::isfinite(fc))
            throw ConfigError("--center-hz must be positive");

        const ArrayGeometry geometry{elements, spacing};
        geometry.validate();
        // Per-subcarrier wavelengths: the CSI grid when present, the legacy
        // 20 MHz layout for 52-tone BFF dumps, else the carrier alone.
        std::vector<double> wavelengths;
        SubcarrierGrid grid = kind == io::DumpKind::csi ? csi.front().grid : SubcarrierGrid::legacy_20mhz(fc);
        grid.center_hz = fc;
        const std::size_t k = kind == io::DumpKind::csi ? csi.front().subcarriers() : bff.front().v.size();
        if (grid.size() == k)
            for (std::size_t i = 0; i < k; ++i)
                wavelengths.push_back(grid.wavelength(i));
        else
            wavelengths.push_back(kSpeedOfLight / fc);
        cal = kind == io::DumpKind::csi
                  ? estimate_calibration(std::span<const CsiSet>(csi), known_aod, geometry, wavelengths)
                  : estimate_calibration(std::span<const DecodedFeedback>(bff), known_aod, geometry, wavelengths);

        Resolved r("calibrate");
        r.flag("--input", input).flag("--known-aod", known_aod).flag("--spacing", spacing).flag("--center-hz", fc);

        Outputs o(output, r.manifest(0));
        const auto file = o.path("calibration.json");
        o.write_json(file, io::calibration_to_json(cal));
        o.finish();

        const auto args = cal.arguments();
        out << "subcarriers: " << args.size() << ", antennas: " << elements << '\n';
        out << "mean argument per antenna [deg]:";
        for (std::size_t n = 0; n < elements; ++n)
        {
            cplx acc{};
            for (const auto &row : args)
                acc += std::polar(1.0, row[n]);
            out << ' ' << num(rad2deg(std::arg(acc)));
        }
        out << "\nwrote " << file.generic_string() << '\n';
        return kOk;
    }
};

int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err, int depth);

struct RerunCommand
{
    std::string manifest;
    std::string output;

    void add_to(CLI::App *app)
    {
        app->add_option("manifest", manifest, "Run manifest to replay")->required();
        app->add_option("-o,--output", output, "Output directory (default: the recorded one)");
    }

    int run(std::ostream &out, std::ostream &err, int depth)
    {
        if (depth > 0)
            throw ConfigError("rerun cannot replay another rerun");
        const auto m = RunManifest::from_json(io::read_json_file(manifest));
        if (m.command == "rerun")
            throw DecodeError("manifest: cannot replay a rerun");
        if (!m.version.empty() && m.version != version())
            err << "note: manifest written by version " << m.version << ", running " << version() << '\n';
        std::string dir = output;
        if (dir.empty())
            dir = m.outputs.empty() ? std::string(".") : fs::path(m.outputs.front()).parent_path().generic_string();
        if (dir.empty())
            dir = ".";
        auto argv = m.argv;
        argv.push_back("-o");
        argv.push_back(dir);
        return dispatch(argv, out, err, depth + 1);
    }
};

int classify(const std::exception &e, std::ostream &err)
{
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const DecodeError *>(&e))
        return kParse;
    if (dynamic_cast<const IoError *>(&e) || dynamic_cast<const fs::filesystem_error *>(&e))
        return kIo;
    if (dynamic_cast<const NumericalError *>(&e))
        return kNumerical;
    if (dynamic_cast<const ConfigError *>(&e) || dynamic_cast<const InputError *>(&e) ||
        dynamic_cast<const DimensionError *>(&e))
        return kUsage;
    return kFailure;
}

int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err, int depth)
{
    CLI::App app{"Angle-of-departure estimation from beamforming feedback", "senselab"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);

    EvalCommand eval;
    SpectrumCommand spectrum;
    SimulateCommand simulate;
    CodecCommand codec;
    CalibrateCommand calibrate;
    RerunCommand rerun;

    auto *eval_app = app.add_subcommand("eval", "Median AoD error table over the evaluation layout");
    auto *spectrum_app = app.add_subcommand("spectrum", "MUSIC spectrum dump for one scene");
    auto *simulate_app = app.add_subcommand("simulate", "Synthesize CSI dumps for one scene");
    auto *codec_app = app.add_subcommand("codec", "Beamforming feedback codec");
    auto *calibrate_app = app.add_subcommand("calibrate", "AP phase-offset calibration from a known AoD");
    auto *rerun_app = app.add_subcommand("rerun", "Replay a run manifest");
    eval.add_to(eval_app);
    spectrum.add_to(spectrum_app);
    simulate.add_to(simulate_app);
    codec.add_to(codec_app);
    calibrate.add_to(calibrate_app);
    rerun.add_to(rerun_app);

    try
    {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try
    {
        if (eval_app->parsed())
            return eval.run(out, err);
        if (spectrum_app->parsed())
            return spectrum.run(out, err);
        if (simulate_app->parsed())
            return simulate.run(out, err);
        if (codec_app->parsed())
            return codec.run(out, err);
        if (calibrate_app->parsed())
            return calibrate.run(out, err);
        return rerun.run(out, err, depth);
    }
    catch (const std::exception &e)
    {
        return classify(e, err);
    }
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    return dispatch(args, out, err, 0);
}

} // namespace senselab::cli
