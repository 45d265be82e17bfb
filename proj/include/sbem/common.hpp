// SPDX-License-Identifier: Apache-2.0
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

#ifndef SBEM_COMMON_HPP
#define SBEM_COMMON_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbem {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline constexpr double pi = std::numbers::pi;

/// Raised when an argument lies outside the mathematical domain of an operation
/// (angle outside (-pi/2, pi/2), shift outside [-pi/M, pi/M], ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised on inconsistent sizes or configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class LinkDirection { uplink, downlink };

inline double deg2rad(double deg) { return deg * pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / pi; }
inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin2db(double lin) { return 10.0 * std::log10(lin); }

/// |z|^2 without the hypot call std::norm makes in libstdc++.
inline double abs2(cplx z) { return z.real() * z.real() + z.imag() * z.imag(); }

/// x * y without the inf/nan recovery path of std::complex multiplication.
inline cplx cmul(cplx x, cplx y) { return {x.real() * y.real() - x.imag() * y.imag(), x.real() * y.imag() + x.imag() * y.real()}; }

inline double norm2(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& z : v) s += abs2(z);
    return s;
}

/// x^H y
inline cplx inner(std::span<const cplx> x, std::span<const cplx> y) {
    if (x.size() != y.size()) throw ConfigError("inner: size mismatch");
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < x.size(); ++i) s += cmul(std::conj(x[i]), y[i]);
    return s;
}

inline double distance2(std::span<const cplx> x, std::span<const cplx> y) {
    if (x.size() != y.size()) throw ConfigError("distance2: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += abs2(x[i] - y[i]);
    return s;
}

/// Neumaier-compensated accumulator. Sums taken in a fixed order are bit-reproducible.
class StableSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Dense row-major complex matrix; only what the training simulations need.
struct CMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    CVector data;

    CMatrix() = default;
    CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, cplx{0.0, 0.0}) {}

    cplx& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    CMatrix adjoint() const {
        CMatrix out(cols, rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) out(c, r) = std::conj((*this)(r, c));
        return out;
    }
};

inline CMatrix matmul(const CMatrix& a, const CMatrix& b) {
    if (a.cols != b.rows) throw ConfigError("matmul: inner dimensions differ");
    CMatrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const cplx v = a(i, k);
            if (v == cplx{0.0, 0.0}) continue;
            for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += v * b(k, j);
        }
    return out;
}

/// Gauss-Jordan inverse with partial pivoting.
inline CMatrix inverse(CMatrix a) {
    if (a.rows != a.cols) throw ConfigError("inverse: matrix not square");
    const std::size_t n = a.rows;
    CMatrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) < 1e-300) throw DomainError("inverse: singular matrix");
        if (piv != col)
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(a(piv, c), a(col, c));
                std::swap(inv(piv, c), inv(col, c));
            }
        const cplx d = a(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            a(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const cplx f = a(r, col);
            if (f == cplx{0.0, 0.0}) continue;
            for (std::size_t c = 0; c < n; ++c) {
                a(r, c) -= f * a(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

/// Moore-Penrose pseudo-inverse of a full-row-rank matrix: A^H (A A^H)^{-1}.
inline CMatrix pseudo_inverse_rows(const CMatrix& a) {
    const CMatrix ah = a.adjoint();
    return matmul(ah, inverse(matmul(a, ah)));
}

// ---- seeded random streams -------------------------------------------------

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a parent seed and a list of tags
/// (trial index, user index, phase id, ...).
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = splitmix64(parent);
    for (auto t : tags) s = splitmix64(s ^ splitmix64(t + 0x632BE59BD9B4E019ULL));
    return s;
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cplx complex_gaussian(Rng& rng, double variance = 1.0) {
    if (!(variance > 0.0)) return {0.0, 0.0};
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

inline CVector complex_gaussian_vector(Rng& rng, std::size_t n, double variance = 1.0) {
    CVector v(n);
    for (auto& z : v) z = complex_gaussian(rng, variance);
    return v;
}

inline std::size_t circular_mod(long long v, std::size_t m) {
    const long long mm = static_cast<long long>(m);
    long long r = v % mm;
    if (r < 0) r += mm;
    return static_cast<std::size_t>(r);
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace sbem

#endif  // SBEM_COMMON_HPP
