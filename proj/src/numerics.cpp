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

#include "senselab/numerics.hpp"
#include "senselab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace senselab
{

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols)
{
    if (rows == 0 || cols == 0)
        throw DimensionError("ComplexMatrix: rows and cols must be at least 1");
}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows)
{
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    if (rows_ == 0 || cols_ == 0)
        throw DimensionError("ComplexMatrix: rows and cols must be at least 1");
    data_.reserve(rows_ * cols_);
    for (const auto &r : rows)
    {
        if (r.size() != cols_)
            throw DimensionError("ComplexMatrix: ragged initializer list");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n)
{
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const cplx> d)
{
    ComplexMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        m(i, i) = d[i];
    return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const double> d)
{
    ComplexMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        m(i, i) = d[i];
    return m;
}

ComplexMatrix ComplexMatrix::column(std::span<const cplx> v)
{
    ComplexMatrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
}

std::vector<cplx> ComplexMatrix::col(std::size_t c) const
{
    std::vector<cplx> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        out[r] = (*this)(r, c);
    return out;
}

std::vector<cplx> ComplexMatrix::row(std::size_t r) const
{
    return {data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_)};
}

ComplexMatrix ComplexMatrix::adjoint() const
{
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            out(c, r) = std::conj((*this)(r, c));
    return out;
}

ComplexMatrix ComplexMatrix::transpose() const
{
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            out(c, r) = (*this)(r, c);
    return out;
}

ComplexMatrix ComplexMatrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const
{
    if (r0 + nr > rows_ || c0 + nc > cols_)
        throw DimensionError("ComplexMatrix::block: out of range");
    ComplexMatrix out(nr, nc);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c)
            out(r, c) = (*this)(r0 + r, c0 + c);
    return out;
}

ComplexMatrix ComplexMatrix::left_cols(std::size_t n) const
{
    return block(0, 0, rows_, n);
}

ComplexMatrix &ComplexMatrix::operator+=(const ComplexMatrix &o)
{
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw DimensionError("ComplexMatrix: shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += o.data_[i];
    return *this;
}

ComplexMatrix &ComplexMatrix::operator-=(const ComplexMatrix &o)
{
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw DimensionError("ComplexMatrix: shape mismatch in -=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] -= o.data_[i];
    return *this;
}

ComplexMatrix &ComplexMatrix::operator*=(cplx s)
{
    for (auto &x : data_)
        x *= s;
    return *this;
}

bool ComplexMatrix::all_finite() const noexcept
{
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx &z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix &b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix &b) { return a -= b; }
ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b)
{
    if (a.cols() != b.rows())
        throw DimensionError("ComplexMatrix: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + ")");
    ComplexMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k)
        {
            const cplx aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                out(i, j) += aik * b(k, j);
        }
    return out;
}

std::vector<cplx> operator*(const ComplexMatrix &a, std::span<const cplx> x)
{
    if (a.cols() != x.size())
        throw DimensionError("ComplexMatrix: matrix-vector size mismatch");
    std::vector<cplx> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
    {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j)
            acc += a(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

ComplexMatrix adjoint_times(const ComplexMatrix &a, const ComplexMatrix &b)
{
    if (a.rows() != b.rows())
        throw DimensionError("adjoint_times: row counts differ");
    ComplexMatrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i)
        {
            const cplx aki = std::conj(a(k, i));
            for (std::size_t j = 0; j < b.cols(); ++j)
                out(i, j) += aki * b(k, j);
        }
    return out;
}

double frobenius_norm_sq(const ComplexMatrix &a)
{
    double s = 0.0;
    for (const auto &z : a.data())
        s += std::norm(z);
    return s;
}

double frobenius_norm(const ComplexMatrix &a) { return std::sqrt(frobenius_norm_sq(a)); }

double vector_norm(std::span<const cplx> v)
{
    double s = 0.0;
    for (const auto &z : v)
        s += std::norm(z);
    return std::sqrt(s);
}

cplx dot(std::span<const cplx> a, std::span<const cplx> b)
{
    if (a.size() != b.size())
        throw DimensionError("dot: length mismatch");
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::conj(a[i]) * b[i];
    return s;
}

cplx trace(const ComplexMatrix &a)
{
    cplx s = 0.0;
    for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i)
        s += a(i, i);
    return s;
}

double unitarity_error(const ComplexMatrix &q)
{
    return frobenius_norm(adjoint_times(q, q) - ComplexMatrix::identity(q.cols()));
}

double hermitian_error(const ComplexMatrix &a)
{
    if (a.rows() != a.cols())
        return std::numeric_limits<double>::infinity();
    double scale = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
        {
            scale = std::max(scale, std::abs(a(i, j)));
            diff = std::max(diff, std::abs(a(i, j) - std::conj(a(j, i))));
        }
    return scale == 0.0 ? 0.0 : diff / scale;
}

cplx normalize_phase(std::span<cplx> v) noexcept
{
    if (v.empty())
        return 1.0;
    // First index within a relative hair of the maximum, so near-ties resolve
    // the same way on every platform.
    double vmax = 0.0;
    for (const auto &z : v)
        vmax = std::max(vmax, std::abs(z));
    if (vmax == 0.0)
        return 1.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) >= vmax * (1.0 - 1e-12))
        {
            idx = i;
            break;
        }
    const cplx f = std::conj(v[idx]) / std::abs(v[idx]);
    for (auto &z : v)
        z *= f;
    v[idx] = std::abs(v[idx]);
    return f;
}

namespace
{

constexpr int kMaxSweeps = 100;
constexpr double kOffTolerance = 1e-12;
constexpr double kCapResidual = 1e-8;

// 2x2 unitary J = [[c, s], [-s conj(e), c conj(e)]] that diagonalizes the
// Hermitian block [[app, g], [conj(g), aqq]] as J^H B J.
struct Rotation
{
    cplx jpp, jpq, jqp, jqq;
};

Rotation jacobi_rotation(double app, double aqq, cplx g)
{
    const double absg = std::abs(g);
    const cplx e = g / absg;
    const double theta = (aqq - app) / (2.0 * absg);
    const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    return {c, s, -s * std::conj(e), c * std::conj(e)};
}

// M <- M J restricted to columns p, q.
void rotate_cols(ComplexMatrix &m, std::size_t p, std::size_t q, const Rotation &j)
{
    for (std::size_t r = 0; r < m.rows(); ++r)
    {
        const cplx mp = m(r, p), mq = m(r, q);
        m(r, p) = mp * j.jpp + mq * j.jqp;
        m(r, q) = mp * j.jpq + mq * j.jqq;
    }
}

// M <- J^H M restricted to rows p, q.
void rotate_rows(ComplexMatrix &m, std::size_t p, std::size_t q, const Rotation &j)
{
    for (std::size_t c = 0; c < m.cols(); ++c)
    {
        const cplx mp = m(p, c), mq = m(q, c);
        m(p, c) = std::conj(j.jpp) * mp + std::conj(j.jqp) * mq;
        m(q, c) = std::conj(j.jpq) * mp + std::conj(j.jqq) * mq;
    }
}

double off_diagonal_norm(const ComplexMatrix &a)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j)
                s += std::norm(a(i, j));
    return std::sqrt(s);
}

void check_finite(const ComplexMatrix &a, const char *who)
{
    if (a.empty())
        throw DimensionError(std::string(who) + ": empty matrix");
    if (!a.all_finite())
        throw InputError(std::string(who) + ": non-finite entries");
}

// Replace column `c` of `q` by a unit vector orthogonal to every column in
// `keep`. Used when a singular value is exactly zero.
void complete_column(ComplexMatrix &q, std::size_t c, const std::vector<std::size_t> &keep)
{
    const std::size_t m = q.rows();
    std::vector<cplx> best;
    double best_norm = -1.0;
    for (std::size_t k = 0; k < m; ++k)
    {
        std::vector<cplx> v(m, 0.0);
        v[k] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (auto j : keep)
            {
                cplx proj = 0.0;
                for (std::size_t r = 0; r < m; ++r)
                    proj += std::conj(q(r, j)) * v[r];
                for (std::size_t r = 0; r < m; ++r)
                    v[r] -= proj * q(r, j);
            }
        const double nv = vector_norm(v);
        if (nv > best_norm)
        {
            best_norm = nv;
            best = std::move(v);
        }
    }
    for (std::size_t r = 0; r < m; ++r)
        q(r, c) = best[r] / best_norm;
}

SvdDecomposition svd_tall(const ComplexMatrix &a)
{
    const std::size_t m = a.rows(), n = a.cols();
    ComplexMatrix w = a;
    ComplexMatrix v = ComplexMatrix::identity(n);
    const double norm_a = frobenius_norm(a);

    std::vector<double> col_norm_sq(n);
    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged && norm_a > 0.0; ++sweep)
    {
        converged = true;
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
            {
                double alpha = 0.0, beta = 0.0;
                cplx gamma = 0.0;
                for (std::size_t r = 0; r < m; ++r)
                {
                    alpha += std::norm(w(r, i));
                    beta += std::norm(w(r, j));
                    gamma += std::conj(w(r, i)) * w(r, j);
                }
                if (alpha == 0.0 || beta == 0.0)
                    continue;
                if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta))
                    continue;
                converged = false;
                const Rotation rot = jacobi_rotation(alpha, beta, gamma);
                rotate_cols(w, i, j, rot);
                rotate_cols(v, i, j, rot);
            }
    }

    SvdDecomposition out{ComplexMatrix(m, n), std::vector<double>(n), ComplexMatrix(n, n)};
    std::vector<double> sigma(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        double s = 0.0;
        for (std::size_t r = 0; r < m; ++r)
            s += std::norm(w(r, i));
        sigma[i] = std::sqrt(s);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return sigma[x] > sigma[y]; });

    std::vector<std::size_t> valid, missing;
    for (std::size_t k = 0; k < n; ++k)
    {
        const std::size_t src = order[k];
        out.singular_values[k] = sigma[src];
        for (std::size_t r = 0; r < n; ++r)
            out.v(r, k) = v(r, src);
        if (sigma[src] > 0.0)
        {
            for (std::size_t r = 0; r < m; ++r)
                out.u(r, k) = w(r, src) / sigma[src];
            valid.push_back(k);
        }
        else
        {
            missing.push_back(k);
        }
    }
    for (auto k : missing)
    {
        complete_column(out.u, k, valid);
        valid.push_back(k);
    }

    if (!converged && norm_a > 0.0)
    {
        ComplexMatrix us = out.u;
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t k = 0; k < n; ++k)
                us(r, k) *= out.singular_values[k];
        const double resid = frobenius_norm(a - us * out.v.adjoint()) / norm_a;
        if (resid > kCapResidual)
            throw NumericalError("svd: sweep limit reached with residual " + std::to_string(resid));
    }
    return out;
}

void fix_pair_phases(SvdDecomposition &d)
{
    const std::size_t p = d.singular_values.size();
    for (std::size_t k = 0; k < p; ++k)
    {
        auto vk = d.v.col(k);
        const cplx f = normalize_phase(vk);
        for (std::size_t r = 0; r < d.v.rows(); ++r)
            d.v(r, k) = vk[r];
        for (std::size_t r = 0; r < d.u.rows(); ++r)
            d.u(r, k) *= f;
    }
}

} // namespace

EigenDecomposition hermitian_eig(const ComplexMatrix &input)
{
    check_finite(input, "hermitian_eig");
    if (input.rows() != input.cols())
        throw DimensionError("hermitian_eig: matrix is " + std::to_string(input.rows()) + "x" +
                             std::to_string(input.cols()) + ", expected square");
    const std::size_t n = input.rows();

    ComplexMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a(i, j) = 0.5 * (input(i, j) + std::conj(input(j, i)));
    ComplexMatrix vecs = ComplexMatrix::identity(n);
    const double norm_a = frobenius_norm(a);

    bool converged = norm_a == 0.0;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep)
    {
        if (off_diagonal_norm(a) <= kOffTolerance * norm_a)
        {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
            {
                const cplx g = a(p, q);
                if (std::abs(g) == 0.0)
                    continue;
                const Rotation rot = jacobi_rotation(a(p, p).real(), a(q, q).real(), g);
                rotate_cols(a, p, q, rot);
                rotate_rows(a, p, q, rot);
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                rotate_cols(vecs, p, q, rot);
            }
    }
    if (!converged)
    {
        const double off = off_diagonal_norm(a) / norm_a;
        if (off > kCapResidual)
            throw NumericalError("hermitian_eig: sweep limit reached with off-diagonal " + std::to_string(off));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x).real() < a(y, y).real(); });

    EigenDecomposition out{std::vector<double>(n), ComplexMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k)
    {
        out.eigenvalues[k] = a(order[k], order[k]).real();
        auto v = vecs.col(order[k]);
        normalize_phase(v);
        for (std::size_t r = 0; r < n; ++r)
            out.eigenvectors(r, k) = v[r];
    }
    return out;
}

SvdDecomposition svd(const ComplexMatrix &a)
{
    check_finite(a, "svd");
    if (a.rows() >= a.cols())
    {
        auto d = svd_tall(a);
        fix_pair_phases(d);
        return d;
    }
    // A^H = U' S V'^H  =>  A = V' S U'^H
    auto t = svd_tall(a.adjoint());
    SvdDecomposition d{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
    fix_pair_phases(d);
    return d;
}

} // namespace senselab
