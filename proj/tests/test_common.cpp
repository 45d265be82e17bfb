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


#include "oracle.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace sbem;

TEST(Fft, MatchesNaiveDftForPowerOfTwo) {
    Rng rng(7);
    for (std::size_t m : {1u, 2u, 8u, 64u, 128u}) {
        const CVector x = oracle::random_vector(rng, m);
        CVector y = x;
        fft_plan(m).forward(y);
        for (auto& v : y) v /= std::sqrt(static_cast<double>(m));
        EXPECT_LT(oracle::rel_err(y, oracle::dft(x)), 1e-12) << "M=" << m;
    }
}

TEST(Fft, DirectPathForOtherSizes) {
    Rng rng(8);
    for (std::size_t m : {3u, 12u, 100u}) {
        const CVector x = oracle::random_vector(rng, m);
        CVector y = x;
        fft_plan(m).forward(y);
        for (auto& v : y) v /= std::sqrt(static_cast<double>(m));
        EXPECT_LT(oracle::rel_err(y, oracle::dft(x)), 1e-12) << "M=" << m;
    }
}

TEST(Fft, InverseUndoesForward) {
    Rng rng(9);
    const CVector x = oracle::random_vector(rng, 256);
    CVector y = x;
    fft_plan(256).forward(y);
    fft_plan(256).inverse(y);
    for (auto& v : y) v /= 256.0;
    EXPECT_LT(oracle::rel_err(y, x), 1e-13);
}

TEST(Fft, RejectsWrongBufferSize) {
    CVector x(5);
    EXPECT_THROW(fft_plan(8).forward(x), ConfigError);
}

TEST(PartialDft, MatchesFullTransformSubset) {
    Rng rng(10);
    for (std::size_t m : {16u, 128u, 96u}) {
        const CVector x = oracle::random_vector(rng, m);
        CVector full = x;
        fft_plan(m).forward(full);
        for (std::size_t width : {1u, 4u, 16u}) {
            for (std::size_t start : {0u, 5u, static_cast<unsigned>(m - 3)}) {
                const CVector part = partial_dft(x, start, width);
                ASSERT_EQ(part.size(), width);
                for (std::size_t r = 0; r < width; ++r)
                    EXPECT_LT(std::abs(part[r] - full[(start + r) % m]), 1e-12 * std::sqrt(norm2(full)))
                        << "M=" << m << " start=" << start << " r=" << r;
            }
        }
    }
}

TEST(PartialDft, FullWidthIsFullTransform) {
    Rng rng(11);
    const CVector x = oracle::random_vector(rng, 64);
    CVector full = x;
    fft_plan(64).forward(full);
    EXPECT_LT(oracle::rel_err(partial_dft(x, 0, 64), full), 1e-13);
}

TEST(PartialDft, RejectsBadWidth) {
    const CVector x(8);
    EXPECT_THROW(partial_dft(x, 0, 0), ConfigError);
    EXPECT_THROW(partial_dft(x, 0, 9), ConfigError);
}

// timing only, no correctness claim
TEST(PartialDft, PrunedFasterThanFullAtTau16M1024) {
    Rng rng(12);
    const CVector x = oracle::random_vector(rng, 1024);
    const int reps = 400;
    auto time = [&](auto&& fn) {
        double best = 1e9;
        for (int round = 0; round < 5; ++round) {
            const auto t0 = std::chrono::steady_clock::now();
            for (int i = 0; i < reps; ++i) fn();
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    };
    double sink = 0.0;
    const double pruned = time([&] { sink += partial_dft(x, 100, 16)[0].real(); });
    const double full = time([&] {
        CVector y = x;
        fft_plan(1024).forward(y);
        sink += y[100].real();
    });
    EXPECT_LT(pruned, full) << "pruned " << pruned << " s, full " << full << " s (" << sink << ")";
}

TEST(LinearAlgebra, InverseAndPseudoInverse) {
    Rng rng(13);
    CMatrix a(3, 5);
    for (auto& v : a.data) v = complex_gaussian(rng);
    const CMatrix p = pseudo_inverse_rows(a);
    const CMatrix id = matmul(a, p);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_LT(std::abs(id(i, j) - (i == j ? 1.0 : 0.0)), 1e-12);
    CMatrix sing(2, 2);
    EXPECT_THROW(inverse(sing), DomainError);
    EXPECT_THROW(matmul(a, a), ConfigError);
}

TEST(StableSum, RecoversCancellation) {
    StableSum s;
    s.add(1e16);
    s.add(1.0);
    s.add(-1e16);
    EXPECT_EQ(s.value(), 1.0);
}

TEST(Seeds, DerivedStreamsAreDistinctAndStable) {
    EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
    EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
}

TEST(Gaussian, UnitVarianceOnAverage) {
    Rng rng(14);
    StableSum s;
    const int n = 200000;
    for (int i = 0; i < n; ++i) s.add(abs2(complex_gaussian(rng)));
    EXPECT_NEAR(s.value() / n, 1.0, 0.01);
}

TEST(Helpers, CircularModAndPowerOfTwo) {
    EXPECT_EQ(circular_mod(-1, 128), 127u);
    EXPECT_EQ(circular_mod(130, 128), 2u);
    EXPECT_TRUE(is_power_of_two(1024));
    EXPECT_FALSE(is_power_of_two(96));
    EXPECT_FALSE(is_power_of_two(0));
}
