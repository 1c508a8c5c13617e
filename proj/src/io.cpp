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

#include "senselab/io.hpp"
#include "senselab/error.hpp"

#include <fstream>
#include <sstream>

namespace senselab::io
{

namespace
{

const json &field(const json &j, const char *name)
{
    if (!j.is_object())
        throw DecodeError("expected a JSON object");
    auto it = j.find(name);
    if (it == j.end())
        throw DecodeError("missing field '" + std::string(name) + "'");
    return *it;
}

template <typename T>
T get_as(const json &j, const std::string &where)
{
    try
    {
        return j.get<T>();
    }
    catch (const json::exception &e)
    {
        throw DecodeError("field '" + where + "': " + e.what());
    }
}

std::size_t get_count(const json &j, const char *name)
{
    const auto &v = field(j, name);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw DecodeError("field '" + std::string(name) + "': expected a non-negative integer");
    return v.get<std::size_t>();
}

} // namespace

json csi_to_json(const CsiSet &csi)
{
    json j;
    j["m"] = csi.rx();
    j["n"] = csi.tx();
    j["k"] = csi.subcarriers();
    j["center_hz"] = csi.grid.center_hz;
    j["spacing_hz"] = csi.grid.spacing_hz;
    j["indices"] = csi.grid.indices;
    json h = json::array();
    for (const auto &m : csi.h)
    {
        json entries = json::array();
        for (const auto &z : m.data())
            entries.push_back({z.real(), z.imag()});
        h.push_back(std::move(entries));
    }
    j["h"] = std::move(h);
    return j;
}

CsiSet csi_from_json(const json &j)
{
    const std::size_t m = get_count(j, "m");
    const std::size_t n = get_count(j, "n");
    const std::size_t k = get_count(j, "k");
    if (m == 0 || n == 0)
        throw DecodeError("fields 'm'/'n' must be at least 1");

    CsiSet csi;
    csi.grid.center_hz = get_as<double>(field(j, "center_hz"), "center_hz");
    csi.grid.spacing_hz = get_as<double>(field(j, "spacing_hz"), "spacing_hz");
    csi.grid.indices = get_as<std::vector<int>>(field(j, "indices"), "indices");
    if (csi.grid.indices.size() != k)
        throw DecodeError("field 'indices': " + std::to_string(csi.grid.indices.size()) + " entries, expected " +
                          std::to_string(k));

    const auto &h = field(j, "h");
    if (!h.is_array() || h.size() != k)
        throw DecodeError("field 'h': expected an array of " + std::to_string(k) + " subcarriers");
    for (std::size_t s = 0; s < k; ++s)
    {
        const auto &entries = h[s];
        if (!entries.is_array() || entries.size() != m * n)
            throw DecodeError("field 'h[" + std::to_string(s) + "]': expected " + std::to_string(m * n) +
                              " [re, im] pairs");
        ComplexMatrix hk(m, n);
        for (std::size_t e = 0; e < m * n; ++e)
        {
            const auto &pair = entries[e];
            const std::string where = "h[" + std::to_string(s) + "][" + std::to_string(e) + "]";
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
                throw DecodeError("field '" + where + "': expected [re, im]");
            hk.data()[e] = cplx(pair[0].get<double>(), pair[1].get<double>());
        }
        csi.h.push_back(std::move(hk));
    }
    try
    {
        csi.validate();
    }
    catch (const Error &e)
    {
        throw DecodeError(std::string("CSI dump: ") + e.what());
    }
    return csi;
}

json bff_to_json(const BffReport &report)
{
    report.validate();
    json j;
    j["rows"] = report.shape.rows;
    j["cols"] = report.shape.cols;
    j["k"] = report.subcarriers();
    j["delta"] = std::string(to_string(report.config.angle_step));
    j["gain_step_db"] = report.config.gain_step_db;
    j["gains_db"] = report.gains_db;
    json angles = json::array();
    for (std::size_t s = 0; s < report.subcarriers(); ++s)
    {
        if (report.config.lossless())
            angles.push_back({{"phi", report.angles[s].phi}, {"psi", report.angles[s].psi}});
        else
            angles.push_back({{"phi", report.indices[s].phi}, {"psi", report.indices[s].psi}});
    }
    j["angles"] = std::move(angles);
    return j;
}

BffReport bff_from_json(const json &j)
{
    BffReport r;
    r.shape.rows = get_count(j, "rows");
    r.shape.cols = get_count(j, "cols");
    const std::size_t k = get_count(j, "k");
    try
    {
        r.config.angle_step = angle_step_from_string(get_as<std::string>(field(j, "delta"), "delta"));
    }
    catch (const ConfigError &e)
    {
        throw DecodeError(std::string("field 'delta': ") + e.what());
    }
    if (j.contains("gain_step_db"))
        r.config.gain_step_db = get_as<double>(j["gain_step_db"], "gain_step_db");
    r.gains_db = get_as<std::vector<double>>(field(j, "gains_db"), "gains_db");

    const auto &angles = field(j, "angles");
    if (!angles.is_array() || angles.size() != k)
        throw DecodeError("field 'angles': expected an array of " + std::to_string(k) + " subcarriers");
    for (std::size_t s = 0; s < k; ++s)
    {
        const std::string where = "angles[" + std::to_string(s) + "]";
        const auto &a = angles[s];
        if (!a.is_object())
            throw DecodeError("field '" + where + "': expected an object");
        if (r.config.lossless())
        {
            GivensAngles g;
            g.shape = r.shape;
            g.phi = get_as<std::vector<double>>(field(a, "phi"), where + ".phi");
            g.psi = get_as<std::vector<double>>(field(a, "psi"), where + ".psi");
            r.angles.push_back(std::move(g));
        }
        else
        {
            AngleIndices ix;
            ix.phi = get_as<std::vector<std::uint16_t>>(field(a, "phi"), where + ".phi");
            ix.psi = get_as<std::vector<std::uint16_t>>(field(a, "psi"), where + ".psi");
            r.indices.push_back(std::move(ix));
        }
    }
    r.validate();
    return r;
}

json calibration_to_json(const Calibration &cal)
{
    json j;
    j["k"] = cal.subcarriers();
    j["n"] = cal.dimension();
    j["arguments_rad"] = cal.arguments();
    return j;
}

Calibration calibration_from_json(const json &j)
{
    const std::size_t k = get_count(j, "k");
    const std::size_t n = get_count(j, "n");
    const auto args = get_as<std::vector<std::vector<double>>>(field(j, "arguments_rad"), "arguments_rad");
    if (args.size() != k)
        throw DecodeError("field 'arguments_rad': expected " + std::to_string(k) + " subcarriers");
    for (std::size_t s = 0; s < k; ++s)
        if (args[s].size() != n)
            throw DecodeError("field 'arguments_rad[" + std::to_string(s) + "]': expected " + std::to_string(n) +
                              " entries");
    try
    {
        return Calibration::from_arguments(args);
    }
    catch (const Error &e)
    {
        throw DecodeError(std::string("calibration dump: ") + e.what());
    }
}

json read_json_file(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    try
    {
        return json::parse(text);
    }
    catch (const json::parse_error &e)
    {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
            if (text[i] == '\n')
                ++line;
        throw DecodeError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path &path, const json &j)
{
    std::error_code ec;
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
        throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path);
    if (!out || !(out << j.dump(1) << '\n') || !out.flush())
        throw IoError("cannot write '" + path.string() + "'");
}

json decoded_to_json(const DecodedFeedback &feedback)
{
    json j;
    j["k"] = feedback.v.size();
    j["rows"] = feedback.v.empty() ? 0 : feedback.v.front().rows();
    j["cols"] = feedback.v.empty() ? 0 : feedback.v.front().cols();
    j["gains"] = feedback.gains;
    json v = json::array();
    for (const auto &m : feedback.v)
    {
        json entries = json::array();
        for (const auto &z : m.data())
            entries.push_back({z.real(), z.imag()});
        v.push_back(std::move(entries));
    }
    j["v"] = std::move(v);
    return j;
}

DumpKind detect_kind(const json &j)
{
    if (j.is_object() && j.contains("h"))
        return DumpKind::csi;
    if (j.is_object() && j.contains("angles"))
        return DumpKind::bff;
    throw DecodeError("unrecognized dump: expected a CSI ('h') or BFF ('angles') object");
}

std::vector<json> packets_of(const json &j)
{
    if (j.is_array())
    {
        if (j.empty())
            throw DecodeError("dump array is empty");
        return {j.begin(), j.end()};
    }
    return {j};
}

} // namespace senselab::io
