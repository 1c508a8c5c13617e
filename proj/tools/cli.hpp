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

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace senselab::cli
{

enum ExitCode : int
{
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kParse = 3,
    kNumerical = 4,
    kIo = 5,
};

/// Written next to every artifact as `<artifact>.manifest.json`.
struct RunManifest
{
    std::string command;
    std::vector<std::string> argv; // fully resolved, without the output flag
    nlohmann::json params;
    std::uint64_t seed = 0;
    std::string version;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json &j);
};

const char *version() noexcept;

/// Runs one invocation; `args` excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace senselab::cli
