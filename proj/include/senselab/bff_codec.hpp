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

#include "senselab/channel.hpp"
#include "senselab/numerics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace senselab
{

// Quantization step for the Givens angles. `none` is a lossless mode that
// keeps full-precision angles and gains.
enum class AngleStep
{
    pi4,
    pi8,
    pi16,
    pi32,
    none
};

std::string_view to_string(AngleStep s) noexcept;
AngleStep angle_step_from_string(std::string_view tag); // throws ConfigError

struct QuantizationConfig
{
    AngleStep angle_step = AngleStep::pi32;
    double gain_step_db = 0.25;

    bool lossless() const noexcept { return angle_step == AngleStep::none; }

    /// Step in radians; throws ConfigError in lossless mode.
    double delta() const;

    /// Bits per phi angle: log2(2 pi / delta).
    unsigned phi_bits() const;

    /// Bits per psi angle: log2((pi/2) / delta).
    unsigned psi_bits() const;

    void validate() const;
};

/// Shape of the fed-back matrix V: rows = transmit antennas, cols = streams.
struct GivensShape
{
    std::size_t rows = 0;
    std::size_t cols = 0;

    /// Number of Givens iterations, min(cols, rows - 1).
    std::size_t iterations() const noexcept;

    /// phi count == psi count == sum_{i=1..p} (rows - i).
    std::size_t angle_pairs() const noexcept;

    friend bool operator==(const GivensShape &, const GivensShape &) = default;
};

// Angles stored flat, column-major by Givens iteration: for iteration i the
// phi entries for rows i..R-2 come first, then the psi entries for rows
// i+1..R-1 (0-based). The same order is used for packing.
struct GivensAngles
{
    GivensShape shape;
    std::vector<double> phi; // [0, 2 pi)
    std::vector<double> psi; // [0, pi/2]
};

/// Decomposes an orthonormal-column matrix (rows >= 2) into Givens angles.
/// Reconstruction reproduces V * D where D makes the last row of V real and
/// non-negative.
GivensAngles givens_decompose(const ComplexMatrix &v);

ComplexMatrix givens_reconstruct(const GivensAngles &angles);

/// Quantized angle indices, same layout as GivensAngles.
struct AngleIndices
{
    std::vector<std::uint16_t> phi;
    std::vector<std::uint16_t> psi;

    friend bool operator==(const AngleIndices &, const AngleIndices &) = default;
};

AngleIndices quantize_angles(const GivensAngles &angles, const QuantizationConfig &config);
GivensAngles dequantize_angles(const AngleIndices &indices, const GivensShape &shape,
                               const QuantizationConfig &config);

/// Gain floor used when a stream carries no energy at all.
inline constexpr double kGainFloorDb = -300.0;

/// One beamforming feedback report (one sounding packet).
struct BffReport
{
    GivensShape shape;
    QuantizationConfig config;
    std::vector<AngleIndices> indices;  // per subcarrier, quantized modes
    std::vector<GivensAngles> angles;   // per subcarrier, lossless mode
    std::vector<double> gains_db;       // diagonal of the averaged stream gain, dB

    std::size_t subcarriers() const noexcept { return config.lossless() ? angles.size() : indices.size(); }

    /// Angle payload bits per subcarrier (quantized modes).
    std::size_t angle_bits_per_subcarrier() const;

    void validate() const; // throws DecodeError

    friend bool operator==(const BffReport &a, const BffReport &b);
};

struct DecodedFeedback
{
    std::vector<ComplexMatrix> v;   // per subcarrier, tx x streams
    std::vector<double> gains;      // linear power, diagonal of the averaged stream gain
};

/// SVD per subcarrier, Givens compression of V_k, subcarrier-averaged
/// squared singular values in dB. `streams` = 0 selects min(M, N).
BffReport encode_bff(const CsiSet &csi, const QuantizationConfig &config, std::size_t streams = 0);

DecodedFeedback decode_bff(const BffReport &report);

/// Bit-packed wire form. Layout (big-endian):
///   u16 subcarrier count, u8 rows, u8 cols, u8 step tag, u8 reserved,
///   cols x gain field, then subcarrier-major angle fields, MSB first,
///   zero-padded to a byte boundary.
/// Gain fields are i16 quarter-dB steps (f64 in lossless mode); angle
/// fields are phi_bits / psi_bits wide (f64 in lossless mode).
std::vector<std::uint8_t> pack_report(const BffReport &report);

BffReport unpack_report(std::span<const std::uint8_t> bytes, const GivensShape &shape,
                        const QuantizationConfig &config);

/// Header size of the packed form for a given shape and config.
std::size_t packed_header_bytes(const GivensShape &shape, const QuantizationConfig &config);

/// Principal angles (radians) between the column spaces of two
/// orthonormal-column matrices of equal shape, ascending.
std::vector<double> principal_angles(const ComplexMatrix &a, const ComplexMatrix &b);

} // namespace senselab
