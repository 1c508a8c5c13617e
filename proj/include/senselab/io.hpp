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

// JSON dump formats shared by the CLI and external tooling.
//
// CSI dump:
//   { "m", "n", "k", "center_hz", "spacing_hz", "indices": [...],
//     "h": [ [ [re, im], ... m*n row-major ... ], ... k entries ... ] }
// BFF dump:
//   { "rows", "cols", "k", "delta": "pi4"|"pi8"|"pi16"|"pi32"|"none",
//     "gain_step_db", "gains_db": [...],
//     "angles": [ { "phi": [...], "psi": [...] }, ... k entries ... ] }
//   Angle entries are integer indices, or radians when delta is "none".
// Calibration dump:
//   { "k", "n", "arguments_rad": [ [...n...], ... k entries ... ] }
//
// A file may hold one dump object or an array of them (one per packet).

#include "senselab/bff_codec.hpp"
#include "senselab/channel.hpp"
#include "senselab/music.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace senselab::io
{

using json = nlohmann::json;

json csi_to_json(const CsiSet &csi);
CsiSet csi_from_json(const json &j);

json bff_to_json(const BffReport &report);
BffReport bff_from_json(const json &j);

/// Decoded feedback: { "k", "rows", "cols", "gains": [...linear...],
///   "v": [ [ [re, im], ... rows*cols row-major ... ], ... ] }
json decoded_to_json(const DecodedFeedback &feedback);

json calibration_to_json(const Calibration &cal);
Calibration calibration_from_json(const json &j);

/// Parses a file; syntax errors become DecodeError naming the line.
json read_json_file(const std::filesystem::path &path);
void write_json_file(const std::filesystem::path &path, const json &j);

enum class DumpKind
{
    csi,
    bff,
};

/// Detects the dump kind of one object ("h" -> csi, "angles" -> bff).
DumpKind detect_kind(const json &j);

/// Splits a file's contents into per-packet objects.
std::vector<json> packets_of(const json &j);

} // namespace senselab::io
