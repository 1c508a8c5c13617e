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

// Random generators and small independent oracles shared by the test suites.

#include "senselab/channel.hpp"
#include "senselab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace senselab::test
{

using Rng = std::mt19937_64;

inline cplx random_cplx(Rng &rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    return {n(rng), n(rng)};
}

inline ComplexMatrix random_matrix(Rng &rng, std::size_t rows, std::size_t cols)
{
    ComplexMatrix m(rows, cols);
    for (auto &z : m.data())
        z = random_cplx(rng);
    return m;
}

inline ComplexMatrix random_hermitian(Rng &rng, std::size_t n)
{
    const auto a = random_matrix(rng, n, n);
    return a + a.adjoint();
}

inline void orthonormalize(ComplexMatrix &m);

inline ComplexMatrix random_orthonormal(Rng &rng, std::size_t rows, std::size_t cols)
{
    auto m = random_matrix(rng, rows, cols);
    orthonormalize(m);
    return m;
}

inline ComplexMatrix diag_real(const std::vector<double> &d)
{
    return ComplexMatrix::diagonal(std::span<const double>(d));
}

/// CSI whose every subcarrier has the same singular values `sigma`.
inline CsiSet flat_gain_csi(Rng &rng, std::size_t m, std::size_t n, std::size_t k, const std::vector<double> &sigma)
{
    const std::size_t p = std::min(m, n);
    CsiSet csi;
    csi.grid = SubcarrierGrid::legacy_20mhz();
    csi.grid.indices.resize(k);
    std::iota(csi.grid.indices.begin(), csi.grid.indices.end(), 1);
    for (std::size_t s = 0; s < k; ++s)
    {
        const auto u = random_orthonormal(rng, m, p);
        const auto v = random_orthonormal(rng, n, p);
        csi.h.push_back(u * diag_real(std::vector<double>(sigma.begin(), sigma.begin() + p)) * v.adjoint());
    }
    return csi;
}

/// Orthonormalizes the columns of `m` in place (modified Gram-Schmidt).
inline void orthonormalize(ComplexMatrix &m)
{
    for (std::size_t c = 0; c < m.cols(); ++c)
    {
        for (std::size_t p = 0; p < c; ++p)
        {
            cplx proj = 0.0;
            for (std::size_t r = 0; r < m.rows(); ++r)
                proj += std::conj(m(r, p)) * m(r, c);
            for (std::size_t r = 0; r < m.rows(); ++r)
                m(r, c) -= proj * m(r, p);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r)
            norm += std::norm(m(r, c));
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < m.rows(); ++r)
            m(r, c) /= norm;
    }
}

/// Flat-gain CSI (every subcarrier has singular values `sigma`) whose leading
/// right singular vectors span the transmit steering vectors of `aods_deg`
/// at the grid's center wavelength. Remaining columns are random.
inline CsiSet flat_gain_steered_csi(Rng &rng, std::size_t m, const ArrayGeometry &tx,
                                    const std::vector<double> &aods_deg, const std::vector<double> &sigma,
                                    std::size_t k = 52)
{
    const std::size_t n = tx.num_elements;
    const std::size_t p = std::min(m, n);
    CsiSet csi;
    csi.grid = SubcarrierGrid::legacy_20mhz();
    csi.grid.indices.resize(k);
    std::iota(csi.grid.indices.begin(), csi.grid.indices.end(), -static_cast<int>(k / 2));
    for (auto &i : csi.grid.indices)
        if (i >= 0)
            ++i;
    for (std::size_t s = 0; s < k; ++s)
    {
        auto v = random_matrix(rng, n, p);
        // Random mixtures of the steering vectors fill the leading columns.
        for (std::size_t c = 0; c < aods_deg.size() && c < p; ++c)
            for (std::size_t r = 0; r < n; ++r)
            {
                cplx z = 0.0;
                for (double aod : aods_deg)
                    z += random_cplx(rng) * steering_vector(aod, tx, csi.grid.center_wavelength())[r];
                v(r, c) = z;
            }
        orthonormalize(v);
        const auto u = random_orthonormal(rng, m, p);
        csi.h.push_back(u * diag_real(std::vector<double>(sigma.begin(), sigma.begin() + p)) * v.adjoint());
    }
    return csi;
}

/// Cofactor-expansion determinant, for n <= 4.
inline cplx cofactor_det(const ComplexMatrix &a)
{
    const std::size_t n = a.rows();
    if (n == 1)
        return a(0, 0);
    cplx det = 0.0;
    for (std::size_t c = 0; c < n; ++c)
    {
        ComplexMatrix minor(n - 1, n - 1);
        for (std::size_t r = 1; r < n; ++r)
            for (std::size_t cc = 0, mc = 0; cc < n; ++cc)
                if (cc != c)
                    minor(r - 1, mc++) = a(r, cc);
        det += (c % 2 ? -1.0 : 1.0) * a(0, c) * cofactor_det(minor);
    }
    return det;
}

/// Real roots of a Hermitian 3x3 characteristic polynomial, ascending, via
/// the trigonometric cubic formula.
inline std::vector<double> hermitian3_eigenvalues(const ComplexMatrix &a)
{
    const double c2 = -trace(a).real();
    double c1 = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
            c1 += (a(i, i) * a(j, j) - a(i, j) * a(j, i)).real();
    const double c0 = -cofactor_det(a).real();
    // t = x + c2/3 reduces x^3 + c2 x^2 + c1 x + c0 to t^3 + p t + q.
    const double p = c1 - c2 * c2 / 3.0;
    const double q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    std::vector<double> roots;
    if (std::abs(p) < 1e-300)
    {
        roots.assign(3, std::cbrt(-q) - c2 / 3.0);
    }
    else
    {
        const double r = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k)
            roots.push_back(r * std::cos(phi - 2.0 * kPi * k / 3.0) - c2 / 3.0);
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

/// Minimal property harness: runs `body` for `cases` seeds and reports the
/// first failing case. `body` returns an empty string on success.
struct PropertyResult
{
    std::size_t passed = 0;
    std::string failure;
    bool ok() const { return failure.empty(); }
};

inline PropertyResult check_property(std::size_t cases, std::uint64_t seed,
                                     const std::function<std::string(Rng &)> &body)
{
    PropertyResult res;
    for (std::size_t i = 0; i < cases; ++i)
    {
        Rng rng(seed * 1000003ULL + i);
        std::string msg;
        try
        {
            msg = body(rng);
        }
        catch (const std::exception &e)
        {
            msg = std::string("exception: ") + e.what();
        }
        if (!msg.empty())
        {
            std::ostringstream os;
            os << "case " << i << " (seed " << seed << "): " << msg;
            res.failure = os.str();
            return res;
        }
        ++res.passed;
    }
    return res;
}

/// Minimum total absolute error over all assignments, by enumeration.
inline double brute_force_total(std::vector<double> est, const std::vector<double> &truth)
{
    std::sort(est.begin(), est.end());
    double best = std::numeric_limits<double>::infinity();
    do
    {
        double total = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i)
            total += std::abs(est[i] - truth[i]);
        best = std::min(best, total);
    } while (std::next_permutation(est.begin(), est.end()));
    return best;
}

} // namespace senselab::test
