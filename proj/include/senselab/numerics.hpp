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

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace senselab
{

using cplx = std::complex<double>;

/// Dense complex matrix, row-major storage. Sized for the small arrays
/// used in WiFi sensing (a handful of antennas), not for large problems.
class ComplexMatrix
{
public:
    ComplexMatrix() = default;

    /// Zero-filled rows x cols matrix. Throws DimensionError for empty shapes.
    ComplexMatrix(std::size_t rows, std::size_t cols);

    /// Row-major construction from nested initializer lists (tests and small literals).
    ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows);

    static ComplexMatrix identity(std::size_t n);
    static ComplexMatrix diagonal(std::span<const cplx> d);
    static ComplexMatrix diagonal(std::span<const double> d);
    static ComplexMatrix column(std::span<const cplx> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    cplx &operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const cplx &operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    std::vector<cplx> col(std::size_t c) const;
    std::vector<cplx> row(std::size_t r) const;

    /// Conjugate transpose.
    ComplexMatrix adjoint() const;
    ComplexMatrix transpose() const;

    /// Submatrix of `nr` x `nc` starting at (r0, c0).
    ComplexMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;

    /// First `n` columns.
    ComplexMatrix left_cols(std::size_t n) const;

    ComplexMatrix &operator+=(const ComplexMatrix &o);
    ComplexMatrix &operator-=(const ComplexMatrix &o);
    ComplexMatrix &operator*=(cplx s);

    bool all_finite() const noexcept;

    friend bool operator==(const ComplexMatrix &, const ComplexMatrix &) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix &b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix &b);
ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix operator*(ComplexMatrix a, cplx s);
ComplexMatrix operator*(cplx s, ComplexMatrix a);
std::vector<cplx> operator*(const ComplexMatrix &a, std::span<const cplx> x);

/// A^H * B without forming the adjoint.
ComplexMatrix adjoint_times(const ComplexMatrix &a, const ComplexMatrix &b);

double frobenius_norm(const ComplexMatrix &a);
double frobenius_norm_sq(const ComplexMatrix &a);
double vector_norm(std::span<const cplx> v);
cplx dot(std::span<const cplx> a, std::span<const cplx> b); // a^H b
cplx trace(const ComplexMatrix &a);

/// ||Q^H Q - I||_F
double unitarity_error(const ComplexMatrix &q);

/// max |A - A^H| relative to max |A|
double hermitian_error(const ComplexMatrix &a);

struct EigenDecomposition
{
    std::vector<double> eigenvalues; // ascending
    ComplexMatrix eigenvectors;      // columns match eigenvalues
};

struct SvdDecomposition
{
    ComplexMatrix u;                     // m x p, p = min(m, n)
    std::vector<double> singular_values; // descending, length p
    ComplexMatrix v;                     // n x p
};

/// Cyclic complex Jacobi eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized as (A + A^H)/2 before iterating. Eigenvalues come
/// back ascending and every eigenvector is rotated so that its largest
/// magnitude entry is real and positive. Repeated eigenvalues get an arbitrary
/// orthonormal basis of their eigenspace.
EigenDecomposition hermitian_eig(const ComplexMatrix &a);

/// Thin SVD by one-sided (Hestenes) Jacobi. Singular values descending; the
/// phase of each (u_i, v_i) pair is fixed by making the largest entry of v_i
/// real and positive.
SvdDecomposition svd(const ComplexMatrix &a);

/// Rotates `v` in place so that its largest-magnitude entry is real positive.
/// Returns the unit-modulus factor that was applied.
cplx normalize_phase(std::span<cplx> v) noexcept;

} // namespace senselab
