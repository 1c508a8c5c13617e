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

#include <stdexcept>
#include <string>
#include <vector>

namespace senselab
{

// Every error raised by the library derives from Error, so callers can catch
// one type; the subclasses let the CLI map failures onto exit codes.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Shape mismatch between operands.
class DimensionError : public Error
{
public:
    using Error::Error;
};

// Malformed or out-of-domain input values.
class InputError : public Error
{
public:
    using Error::Error;
};

class DomainError : public InputError
{
public:
    using InputError::InputError;
};

// Invalid configuration (quantization step, sub-array size, path count).
class ConfigError : public Error
{
public:
    using Error::Error;
};

// Malformed serialized data (packed reports, JSON dumps).
class DecodeError : public Error
{
public:
    using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error
{
public:
    using Error::Error;
};

// Iteration failed to converge, degenerate geometry, etc.
class NumericalError : public Error
{
public:
    using Error::Error;
};

// find_peaks located fewer local minima than requested. The peaks that were
// found are kept so the caller can decide how to pad.
class PeakDeficit : public NumericalError
{
public:
    PeakDeficit(const std::string &what, std::vector<double> found)
        : NumericalError(what), found_(std::move(found))
    {
    }

    const std::vector<double> &found() const noexcept { return found_; }

private:
    std::vector<double> found_;
};

} // namespace senselab
