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

#include <type_traits>

using namespace sbem;

namespace {

const ArrayConfig kArray{};

ChannelVector dl_one_ring(Rng& rng, double mean_deg) {
    return generate_channel(kArray, UserProfile{deg2rad(mean_deg), deg2rad(2.0), 100}, rng, LinkDirection::downlink);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

}  // namespace

// the user-side estimator consumes only the received row and S_k
static_assert(std::is_invocable_r_v<CVector, decltype(&estimate_downlink_coefficients), std::span<const cplx>, const CMatrix&>);

TEST(DownlinkTraining, PseudoInverseAndPowerConstraint) {
    const auto pilots = make_pilots(16, 32, 2.0);
    DownlinkTrainingConfig cfg;
    cfg.train_energy = 50.0;
    const double varpi = cfg.scaling(cfg.energy(0), pilots);
    EXPECT_DOUBLE_EQ(varpi, std::sqrt(50.0 / (16.0 * 32.0 * 2.0)));
    const CMatrix s = user_training_matrix(pilots, varpi);
    const CMatrix id = matmul(s, pseudo_inverse_rows(s));
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) EXPECT_LT(std::abs(id(i, j) - (i == j ? 1.0 : 0.0)), 1e-12);
    double trace = 0.0;
    for (const auto& v : s.data) trace += abs2(v);
    EXPECT_LE(trace, 50.0 * (1.0 + 1e-10));
    EXPECT_NEAR(trace, 50.0, 1e-10 * 50.0);
}

TEST(DownlinkTrain, SupportedLoneUserIsExact) {
    Rng rng(1);
    const SpatialSignature sig{70, 16, -0.012, 128};
    const std::vector<ChannelVector> users{oracle::supported_channel(sig, rng, LinkDirection::downlink)};
    const std::vector<SpatialSignature> sigs{sig};
    const auto pilots = make_pilots(16, 16, 1.0);
    DownlinkTrainingConfig cfg;
    cfg.noise_power = 0.0;
    const auto reports = downlink_train(users, GroupAssignment{{{0}}, GroupPurpose::downlink_train}, sigs, pilots, cfg, rng);
    ASSERT_EQ(reports.size(), 1u);
    ASSERT_EQ(reports[0].coefficients.size(), 16u);
    const auto want = partial_beamspace(users[0].view(), sig.shift, sig);
    EXPECT_LT(oracle::rel_err(reports[0].coefficients, want), 1e-12);
    EXPECT_LT(oracle::rel_err(reconstruct_downlink(reports[0], sig).entries, users[0].entries), 1e-12);
}

TEST(DownlinkTrain, DisjointStreamsWithSharedShiftAreExact) {
    Rng rng(2);
    const std::vector<SpatialSignature> sigs{{0, 16, 0.01, 128}, {30, 16, 0.01, 128}, {30, 16, 0.01, 128}, {80, 16, 0.01, 128}};
    std::vector<ChannelVector> users;
    for (const auto& s : sigs) users.push_back(oracle::supported_channel(s, rng, LinkDirection::downlink));
    const auto pilots = make_pilots(16, 32, 1.0);
    DownlinkTrainingConfig cfg;
    cfg.noise_power = 0.0;
    cfg.user_energy = {10.0, 20.0, 20.0, 5.0};
    const GroupAssignment a{{{0, 1, 2, 3}}, GroupPurpose::downlink_train};
    EXPECT_TRUE(assignment_valid(a, sigs, 4, true));
    EXPECT_FALSE(assignment_valid(a, sigs, 4, false));
    const auto reports = downlink_train(users, a, sigs, pilots, cfg, rng);
    for (std::size_t k = 0; k < 4; ++k)
        EXPECT_LT(oracle::rel_err(reconstruct_downlink(reports[k], sigs[k]).entries, users[k].entries), 1e-10) << k;
}

TEST(DownlinkTrain, NoiselessChainGivesProjection) {
    Rng rng(3);
    const auto g = dl_one_ring(rng, 20.0);
    const auto sig = find_signature(g, 16);
    const std::vector<ChannelVector> users{g};
    const std::vector<SpatialSignature> sigs{sig};
    DownlinkTrainingConfig cfg;
    cfg.noise_power = 0.0;
    const auto reports = downlink_train(users, GroupAssignment{{{0}}, GroupPurpose::downlink_train}, sigs, make_pilots(16, 16, 1.0), cfg, rng);
    const auto rec = reconstruct_downlink(reports[0], sig);
    EXPECT_LT(oracle::rel_err(rec.entries, project_onto(g, sig).entries), 1e-12);
    EXPECT_NEAR(norm2(rec.entries), norm2(reports[0].coefficients), 1e-12 * norm2(rec.entries));
}

TEST(ReconstructDownlink, ZeroAndLengthCheck) {
    const SpatialSignature sig{3, 8, 0.0, 64};
    const auto z = reconstruct_downlink(FeedbackReport{0, CVector(8, cplx{0.0, 0.0})}, sig);
    EXPECT_EQ(z.size(), 64u);
    EXPECT_EQ(norm2(z.entries), 0.0);
    EXPECT_THROW(reconstruct_downlink(FeedbackReport{0, CVector(7)}, sig), ConfigError);
}

TEST(DownlinkTrain, NoiseTermIsTauSquaredOverSnr) {
    Rng rng(4);
    const SpatialSignature sig{100, 16, 0.0, 128};
    const std::vector<ChannelVector> users{oracle::supported_channel(sig, rng, LinkDirection::downlink)};
    const std::vector<SpatialSignature> sigs{sig};
    const auto pilots = make_pilots(16, 32, 0.25);
    DownlinkTrainingConfig cfg;
    cfg.train_energy = 64.0;
    cfg.noise_power = 0.5;
    const GroupAssignment a{{{0}}, GroupPurpose::downlink_train};
    StableSum err;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        const auto r = downlink_train(users, a, sigs, pilots, cfg, rng);
        err.add(distance2(reconstruct_downlink(r[0], sig).entries, users[0].entries));
    }
    const double want = 16.0 * 16.0 * 0.5 / 64.0;
    EXPECT_NEAR(err.value() / trials, want, 0.03 * want);
    const auto terms = downlink_mse_decomposition(users[0], {}, sig, cfg, 64.0);
    EXPECT_DOUBLE_EQ(terms.noise, want);
    EXPECT_LT(terms.truncation, 1e-20 * norm2(users[0].entries) + 1e-24);
    EXPECT_EQ(terms.interference, 0.0);
}

TEST(DownlinkMse, TermsMatchMonteCarlo) {
    Rng rng(5);
    const auto g = dl_one_ring(rng, 14.48);
    const auto own = find_signature(g, 16);
    const SpatialSignature near{(own.last() + 5) % 128, 16, -0.5 * own.shift, 128};
    // a second user on the neighbouring window sets the other stream
    const auto other_user = oracle::supported_channel(near, rng, LinkDirection::downlink);
    const std::vector<ChannelVector> users{g, other_user};
    const std::vector<SpatialSignature> sigs{own, near};
    const auto pilots = make_pilots(16, 32, 1.0);
    DownlinkTrainingConfig cfg;
    cfg.user_energy = {16.0, 64.0};
    const std::vector<SpatialSignature> others{near};
    const std::vector<double> ratio{2.0};  // varpi_1 / varpi_0 = sqrt(64 / 16)
    const auto terms = downlink_mse_decomposition(g, others, own, cfg, 16.0, ratio);
    EXPECT_GT(terms.interference, 0.0);
    const GroupAssignment a{{{0, 1}}, GroupPurpose::downlink_train};
    StableSum err;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        const auto r = downlink_train(users, a, sigs, pilots, cfg, rng);
        err.add(distance2(reconstruct_downlink(r[0], own).entries, g.entries));
    }
    EXPECT_NEAR(err.value() / trials, terms.total(), 0.05 * terms.total());
}

TEST(DownlinkMse, SelfInterferenceShrinksWithGuard) {
    Rng rng(6);
    std::uniform_real_distribution<double> mean(-60.0, 60.0);
    DownlinkTrainingConfig cfg;
    std::map<std::size_t, std::vector<double>> leak;
    for (int i = 0; i < 1000; ++i) {
        const auto g = dl_one_ring(rng, mean(rng));
        const auto own = find_signature(g, 16);
        for (std::size_t guard : {0u, 2u, 4u, 8u}) {
            // one interfering stream on each side, `guard` bins away
            const std::vector<SpatialSignature> others{{(own.last() + 1 + guard) % 128, 16, own.shift, 128},
                                                       {(own.start + 128 * 2 - 16 - guard) % 128, 16, own.shift, 128}};
            leak[guard].push_back(downlink_mse_decomposition(g, others, own, cfg, 16.0).interference / norm2(g.entries));
        }
    }
    EXPECT_GT(median(leak[0]), median(leak[2]));
    EXPECT_GT(median(leak[2]), median(leak[4]));
    EXPECT_GT(median(leak[4]), median(leak[8]));
}

TEST(DownlinkMse, NoiseGapToUplinkIsTau) {
    Rng rng(7);
    const SpatialSignature sig{20, 16, 0.0, 128};
    const auto h = oracle::supported_channel(sig, rng);
    const double energy = 3.2;
    UplinkTrainingConfig ul;
    DownlinkTrainingConfig dl;
    const double ul_noise = uplink_mse_decomposition(h, {}, sig, ul, energy).noise;
    const double dl_noise = downlink_mse_decomposition(h, {}, sig, dl, energy).noise;
    EXPECT_NEAR(10.0 * std::log10(dl_noise / ul_noise), 10.0 * std::log10(16.0), 1e-12);

    // the same gap measured end to end at low SNR on a leakage-free channel
    const std::vector<ChannelVector> ul_users{h};
    ChannelVector g = h;
    g.link = LinkDirection::downlink;
    const std::vector<ChannelVector> dl_users{g};
    const std::vector<SpatialSignature> sigs{sig};
    const auto pilots = make_pilots(16, 32, 0.1);
    ul.train_energy = dl.train_energy = energy;
    const GroupAssignment a{{{0}}, GroupPurpose::uplink_train};
    StableSum eu, ed;
    for (int t = 0; t < 2000; ++t) {
        eu.add(distance2(uplink_train(ul_users, a, sigs, pilots, ul, rng)[0].channel.entries, h.entries));
        ed.add(distance2(reconstruct_downlink(downlink_train(dl_users, a, sigs, pilots, dl, rng)[0], sig).entries, g.entries));
    }
    EXPECT_NEAR(10.0 * std::log10(ed.value() / eu.value()), 12.04, 1.0);
}

// ---- planning ---------------------------------------------------------------------------

TEST(ConflictClusters, ConnectedComponents) {
    const std::vector<SpatialSignature> sigs{{0, 8, 0.0, 64}, {40, 8, 0.0, 64}, {6, 8, 0.0, 64}, {12, 8, 0.0, 64}, {60, 8, 0.0, 64}};
    // 0-2 overlap, 2-3 overlap, 4 wraps to 4..3 and touches 0
    const auto c = conflict_clusters(sigs, 2);
    const std::vector<std::vector<std::size_t>> want{{0, 2, 3, 4}, {1}};
    EXPECT_EQ(c, want);
}

TEST(PlanDownlink, DefaultPopulationTrainsInOneGroup) {
    ExperimentConfig cfg;
    const auto grid = cfg.shift_grid_values();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(derive_seed(3, {seed}));
        const auto pop = draw_population(cfg, 16, rng);
        std::vector<CVector> est;
        std::vector<SpatialSignature> sigs;
        for (const auto& h : pop.uplink) {
            est.push_back(h.entries);
            sigs.push_back(find_signature(h, 16));
        }
        const auto plan = plan_downlink(est, sigs, cfg.array, 16, 4, grid);
        EXPECT_EQ(plan.streams, 4u);
        EXPECT_EQ(plan.assignment.size(), 1u);
        EXPECT_EQ(plan.assignment.user_count(), 32u);
        EXPECT_TRUE(assignment_valid(plan.assignment, plan.signatures, 4, true));
        for (std::size_t k = 0; k < 32; ++k) {
            EXPECT_EQ(plan.signatures[k].width, 16u);
            EXPECT_EQ(plan.signatures[k], plan.signatures[pop.cluster[k] * 8]);
        }
    }
}

TEST(PlanDownlink, TrimsScaledWindowToTau) {
    ArrayConfig cfg{128, 0.5, 0.525};
    Rng rng(8);
    const auto h = generate_channel(cfg, UserProfile{deg2rad(30.0), deg2rad(2.0), 100}, rng, LinkDirection::uplink);
    const std::vector<CVector> est{h.entries};
    const auto grid = shift_grid(128, 129);
    const std::vector<SpatialSignature> sigs{find_signature(h.view(), 16, grid)};
    const auto plan = plan_downlink(est, sigs, cfg, 16, 4, grid);
    EXPECT_EQ(plan.signatures[0].width, 16u);
    EXPECT_LE(std::abs(plan.signatures[0].shift), pi / 128 * (1.0 + 1e-12));
}
