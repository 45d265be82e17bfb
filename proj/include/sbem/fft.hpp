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


#ifndef SBEM_FFT_HPP
#define SBEM_FFT_HPP

#include <sbem/common.hpp>

#include <map>
#include <memory>

namespace sbem {

/// In-place complex DFT of a fixed size. Radix-2 iterative when the size is a
/// power of two, direct O(n^2) summation otherwise. Unnormalized:
///   forward:  X[k] = sum_m x[m] e^{-j 2 pi k m / n}
///   inverse:  x[m] = sum_k X[k] e^{+j 2 pi k m / n}
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n), roots_(n) {
        if (n == 0) throw ConfigError("Fft: size must be positive");
        for (std::size_t k = 0; k < n; ++k) roots_[k] = std::polar(1.0, -2.0 * pi * static_cast<double>(k) / static_cast<double>(n));
        if (is_power_of_two(n)) {
            bitrev_.resize(n);
            std::size_t bits = 0;
            while ((std::size_t{1} << bits) < n) ++bits;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t r = 0;
                for (std::size_t b = 0; b < bits; ++b)
                    if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
                bitrev_[i] = r;
            }
        }
    }

    std::size_t size() const { return n_; }

    /// e^{-j 2 pi k / n}, k taken mod n.
    cplx root(std::size_t k) const { return roots_[k % n_]; }

    void forward(std::span<cplx> data) const { transform(data, false); }
    void inverse(std::span<cplx> data) const { transform(data, true); }

private:
    void transform(std::span<cplx> data, bool inverse) const {
        if (data.size() != n_) throw ConfigError("Fft: buffer size mismatch");
        if (n_ == 1) return;
        if (bitrev_.empty()) {
            direct(data, inverse);
            return;
        }
        for (std::size_t i = 0; i < n_; ++i)
            if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t step = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    const cplx w = inverse ? std::conj(roots_[j * step]) : roots_[j * step];
                    const cplx u = data[start + j];
                    const cplx v = cmul(data[start + j + half], w);
                    data[start + j] = u + v;
                    data[start + j + half] = u - v;
                }
            }
        }
    }

    void direct(std::span<cplx> data, bool inverse) const {
        CVector out(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            cplx s{0.0, 0.0};
            for (std::size_t m = 0; m < n_; ++m) {
                const cplx w = roots_[(k * m) % n_];
                s += cmul(data[m], inverse ? std::conj(w) : w);
            }
            out[k] = s;
        }
        std::copy(out.begin(), out.end(), data.begin());
    }

    std::size_t n_;
    CVector roots_;
    std::vector<std::size_t> bitrev_;
};

/// Per-thread plan cache.
inline const Fft& fft_plan(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<Fft>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<Fft>(n)).first;
    return *it->second;
}

/// Computes `width` consecutive bins X[(start + r) mod M], r = 0..width-1, of the
/// unnormalized forward DFT of x.
///
/// When M and width are powers of two the input is decimated into M/width
/// interleaved subsequences, each gets a width-point FFT, and the requested
/// bins are recombined with one twiddle per subsequence. That costs
/// (M/2) log2(width) butterflies plus M twiddle multiplies, against
/// (M/2) log2(M) for the full transform. Other sizes fall back to direct
/// per-bin summation.
inline CVector partial_dft(std::span<const cplx> x, std::size_t start, std::size_t width) {
    const std::size_t m = x.size();
    if (width == 0 || width > m) throw ConfigError("partial_dft: width must be in [1, M]");
    const Fft& big = fft_plan(m);
    CVector out(width);

    if (!is_power_of_two(m) || !is_power_of_two(width)) {
        for (std::size_t r = 0; r < width; ++r) {
            const std::size_t q = (start + r) % m;
            cplx s{0.0, 0.0};
            for (std::size_t i = 0; i < m; ++i) s += cmul(x[i], big.root(i * q));
            out[r] = s;
        }
        return out;
    }

    const std::size_t stride = m / width;
    const Fft& small = fft_plan(width);
    CVector sub(width);
    std::fill(out.begin(), out.end(), cplx{0.0, 0.0});
    for (std::size_t n = 0; n < stride; ++n) {
        for (std::size_t s = 0; s < width; ++s) sub[s] = x[n + stride * s];
        small.forward(sub);
        for (std::size_t r = 0; r < width; ++r) {
            const std::size_t q = (start + r) % m;
            out[r] += cmul(big.root(n * q), sub[q % width]);
        }
    }
    return out;
}

}  // namespace sbem

#endif  // SBEM_FFT_HPP
