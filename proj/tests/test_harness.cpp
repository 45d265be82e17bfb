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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sbem;

namespace {

ExperimentConfig small(ExperimentKind kind) {
    ExperimentConfig c;
    c.kind = kind;
    c.trials = 3;
    c.snr_db = {0.0};
    c.seed = 7;
    c.threads = 1;
    c.pilot_lengths = {16};
    c.ber_min_symbols = 1000;
    c.ber_error_target = 10;
    c.ber_max_trials = 6;
    c.ber_symbols_per_trial = 64;
    return c;
}

std::string as_csv(const std::vector<MetricRecord>& r) {
    std::ostringstream os;
    write_csv(os, r);
    return os.str();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

double find(const std::vector<MetricRecord>& r, const std::string& metric, double sweep) {
    for (const auto& x : r)
        if (x.metric == metric && x.sweep_value == sweep) return x.value;
    ADD_FAILURE() << "missing " << metric << " at " << sweep;
    return 0.0;
}

}  // namespace

// ---- determinism ---------------------------------------------------------------

TEST(Determinism, ThreadCountDoesNotChangeResults) {
    for (auto kind : {ExperimentKind::ul_dl_mse, ExperimentKind::aasr, ExperimentKind::ber, ExperimentKind::rotation_ablation}) {
        auto c = small(kind);
        if (kind == ExperimentKind::rotation_ablation) c.trials = 8;
        const auto one = run_experiment(c);
        c.threads = 4;
        const auto four = run_experiment(c);
        EXPECT_EQ(as_csv(one), as_csv(four)) << to_string(kind);
        EXPECT_FALSE(one.empty());
    }
}

TEST(Determinism, RerunWritesIdenticalFiles) {
    const auto c = small(ExperimentKind::vs_ls_dl);
    const std::string a = temp_path("sbem_det_a.csv"), b = temp_path("sbem_det_b.csv");
    emit_results(run_experiment(c), OutputFormat::csv, a);
    emit_results(run_experiment(c), OutputFormat::csv, b);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_FALSE(slurp(a).empty());
    std::remove(a.c_str());
    std::remove(b.c_str());
}

TEST(Determinism, SeedChangesResults) {
    auto c = small(ExperimentKind::vs_ls_ul);
    const auto a = run_experiment(c);
    c.seed = 8;
    EXPECT_NE(as_csv(a), as_csv(run_experiment(c)));
}

// ---- serialization -------------------------------------------------------------

TEST(Serialization, CsvRoundTripIsExact) {
    const std::vector<MetricRecord> recs{{"aasr", "snr_db", -10.0, "rate.sbem", 0.1 + 0.2, 100, 42},
                                         {"ber", "snr_db", 2.5, "BER.ls", 1.0 / 3.0, 7, 18446744073709551615ull}};
    std::stringstream ss;
    write_csv(ss, recs);
    EXPECT_EQ(parse_csv(ss), recs);
}

TEST(Serialization, JsonRoundTripIsExact) {
    const std::vector<MetricRecord> recs{{"ul_dl_mse", "snr_db", 30.0, "NMSE.dl.sbem.L16", 1.2345678901234567e-2, 10, 1}};
    std::stringstream ss;
    write_json(ss, recs, result_metadata(ExperimentConfig{}));
    EXPECT_EQ(parse_json(ss), recs);
}

TEST(Serialization, EmptyCsvIsHeaderOnly) {
    std::ostringstream os;
    write_csv(os, {});
    EXPECT_EQ(os.str(), std::string(csv_header) + "\n");
}

TEST(Serialization, RejectsDelimitersAndNonFinite) {
    std::ostringstream os;
    EXPECT_THROW(write_csv(os, std::vector<MetricRecord>{{"a,b", "x", 0, "m", 1, 1, 1}}), ConfigError);
    EXPECT_THROW(write_csv(os, std::vector<MetricRecord>{{"a", "x", 0, "m", std::nan(""), 1, 1}}), DomainError);
    std::istringstream bad("not,a,header\n");
    EXPECT_THROW(parse_csv(bad), ConfigError);
}

TEST(Serialization, EmitJsonToFile) {
    const std::string p = temp_path("sbem_emit.json");
    const std::vector<MetricRecord> recs{{"table1", "angle_deg", 21.0, "C_k", 1.0, 1, 0}};
    emit_results(recs, OutputFormat::json, p, result_metadata(ExperimentConfig{}));
    std::ifstream in(p);
    EXPECT_EQ(parse_json(in), recs);
    std::remove(p.c_str());
}

TEST(Serialization, IoErrorNamesThePath) {
    const std::string p = "/nonexistent-dir-sbem/out.csv";
    try {
        emit_results({}, OutputFormat::csv, p);
        FAIL() << "expected an I/O error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(p), std::string::npos);
    }
}

TEST(Serialization, FormatNames) {
    EXPECT_EQ(parse_format("csv"), OutputFormat::csv);
    EXPECT_EQ(parse_format("json"), OutputFormat::json);
    EXPECT_THROW(parse_format("xml"), ConfigError);
}

// ---- configuration ---------------------------------------------------------------

TEST(Config, JsonRoundTrip) {
    ExperimentConfig c;
    c.kind = ExperimentKind::ber;
    c.tau = 8;
    c.guard = 3;
    c.snr_db = {-5, 5};
    c.data_budget = DataBudget::transmit;
    c.pilot_family = PilotFamily::hadamard;
    const auto j = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(j)), j);
}

TEST(Config, UnknownKeysAreRejected) {
    EXPECT_THROW(config_from_json(json{{"trails", 10}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"training", {{"taus", 4}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"channel_model", "rayleigh"}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"trials", "many"}}), ConfigError);
}

TEST(Config, PartialOverridesKeepDefaults) {
    const auto c = config_from_json(json{{"trials", 5}, {"training", {{"tau", 8}}}});
    EXPECT_EQ(c.trials, 5u);
    EXPECT_EQ(c.tau, 8u);
    EXPECT_EQ(c.pilot_len, 32u);
    EXPECT_EQ(c.guard_for(c.tau), 2u);
}

TEST(Config, ValidationErrors) {
    ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    auto bad = c;
    bad.pilot_len = 8;  // L < tau
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.trials = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.table_eta = 1.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.coherence_list = {16};
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.population.cluster_means_deg = {89.0};
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW(parse_kind("fig9"), ConfigError);
    EXPECT_EQ(parse_kind(to_string(ExperimentKind::tau_sweep)), ExperimentKind::tau_sweep);
}

TEST(Config, ShippedDefaultLoads) {
    const auto c = load_config(SBEM_SOURCE_DIR "/configs/default.json");
    EXPECT_EQ(config_to_json(c), config_to_json(ExperimentConfig{}));
    EXPECT_THROW(load_config("/nonexistent-sbem.json"), ConfigError);
}

// ---- pipeline ----------------------------------------------------------------------

TEST(Pipeline, SupportedChannelsWithoutNoiseAreExact) {
    ExperimentConfig c;
    c.channel_model = ChannelModel::signature_supported;
    c.noiseless = true;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng ch(seed), tr(seed + 100);
        const auto pop = draw_population(c, c.tau, ch);
        const auto out = run_sbem(c, pop, c.tau, c.pilot_len, budget_for(c, 0.0), tr);
        EXPECT_LT(out.nmse_ul, 1e-20);
        EXPECT_LT(out.nmse_dl, 1e-20);
    }
}

TEST(Pipeline, LsWithoutNoiseIsExact) {
    ExperimentConfig c;
    c.noiseless = true;
    Rng ch(3), ls(4);
    const auto pop = draw_population(c, c.tau, ch);
    const auto b = budget_for(c, -10.0);
    EXPECT_LT(nmse(pop.uplink, run_ls_uplink(c, pop, b, ls)), 1e-20);
    EXPECT_LT(nmse(pop.downlink, run_ls_downlink(pop, c.pilot_len, b, ls)), 1e-20);
}

TEST(Pipeline, LsUplinkNoiseMatchesPilotEnergy) {
    // one pilot per user, L = K: NMSE -> sigma^2 / (K rho) up to channel-norm spread
    ExperimentConfig c;
    const auto b = budget_for(c, 0.0);
    StableSum err, ref;
    for (std::uint64_t t = 0; t < 200; ++t) {
        Rng ch(derive_seed(11, {t})), ls(derive_seed(12, {t}));
        const auto pop = draw_population(c, c.tau, ch);
        const auto est = run_ls_uplink(c, pop, b, ls);
        for (std::size_t k = 0; k < est.size(); ++k) {
            err.add(distance2(pop.uplink[k].entries, est[k].entries));
            ref.add(static_cast<double>(c.array.num_antennas));
        }
    }
    EXPECT_NEAR(err.value() / ref.value(), 1.0 / static_cast<double>(c.user_count()), 0.03 / static_cast<double>(c.user_count()));
}

TEST(Pipeline, LsOverSbemDownlinkNoiseRatio) {
    // supported channels and a fixed shift leave only the noise term; the ratio
    // M^2 / (K tau^2) is 2 for the default population
    ExperimentConfig c;
    c.channel_model = ChannelModel::signature_supported;
    c.rotation = false;
    const auto b = budget_for(c, 20.0);
    StableSum s_sbem, s_ls;
    for (std::uint64_t t = 0; t < 40; ++t) {
        Rng ch(derive_seed(21, {t})), tr(derive_seed(22, {t})), ls(derive_seed(23, {t}));
        const auto pop = draw_population(c, c.tau, ch);
        s_sbem.add(run_sbem(c, pop, c.tau, c.pilot_len, b, tr).nmse_dl);
        s_ls.add(nmse(pop.downlink, run_ls_downlink(pop, c.pilot_len, b, ls)));
    }
    const double m = static_cast<double>(c.array.num_antennas), tau = static_cast<double>(c.tau);
    const double expected = m * m / (static_cast<double>(c.user_count()) * tau * tau);
    EXPECT_DOUBLE_EQ(expected, 2.0);
    EXPECT_NEAR(s_ls.value() / s_sbem.value(), expected, 0.1 * expected);
}

TEST(Pipeline, LsNmseFallsWithSnr) {
    auto c = small(ExperimentKind::vs_ls_ul);
    c.snr_db = {-10, 0, 10, 20};
    const auto r = run_experiment(c);
    for (std::size_t i = 1; i < c.snr_db.size(); ++i)
        EXPECT_LT(find(r, "NMSE.ul.ls", c.snr_db[i]), find(r, "NMSE.ul.ls", c.snr_db[i - 1]));
}

TEST(Pipeline, NmseRejectsBadInput) {
    std::vector<ChannelVector> a(1, ChannelVector{CVector(4), LinkDirection::uplink});
    EXPECT_THROW(nmse(a, {}), ConfigError);
    EXPECT_THROW(nmse(a, a), DomainError);
}

// ---- spectral efficiency --------------------------------------------------------

TEST(Aasr, PrefactorExamples) {
    const std::vector<double> rates{2.0, 4.0};
    EXPECT_DOUBLE_EQ(compute_aasr(rates, 100, 100), 0.0);
    EXPECT_DOUBLE_EQ(compute_aasr(rates, 128, 200), 0.0);
    EXPECT_DOUBLE_EQ(compute_aasr(rates, 128, 32), 0.75 * 3.0);
    EXPECT_DOUBLE_EQ(compute_aasr({}, 128, 32), 0.0);
    EXPECT_THROW(compute_aasr(rates, 0, 0), ConfigError);
}

TEST(Aasr, ShortCoherenceLeavesNoRoomForLs) {
    auto c = small(ExperimentKind::aasr);
    c.snr_db = {10.0};
    c.trials = 2;
    const auto r = run_experiment(c);
    EXPECT_EQ(find(r, "AASR.ls.T128", 10.0), 0.0);
    EXPECT_GT(find(r, "AASR.sbem.T128", 10.0), 0.0);
    EXPECT_GT(find(r, "AASR.ls.T1024", 10.0), find(r, "AASR.ls.T256", 10.0));
}

// ---- experiment surface ------------------------------------------------------------

TEST(Experiments, Table1Records) {
    ExperimentConfig c;
    c.kind = ExperimentKind::table1;
    const auto r = run_experiment(c);
    ASSERT_EQ(r.size(), 90u);
    for (const auto& x : r) {
        EXPECT_GE(x.value, 1.0);
        EXPECT_EQ(x.experiment, "table1");
    }
    EXPECT_EQ(find(r, "C_k", 89.0), 1.0);
}

TEST(Experiments, BerRecordsCarryTrialCount) {
    const auto c = small(ExperimentKind::ber);
    const auto r = run_experiment(c);
    ASSERT_EQ(r.size(), 4u);
    for (const auto& x : r) {
        EXPECT_GE(x.trials, 1u);
        EXPECT_LE(x.trials, c.ber_max_trials);
    }
    EXPECT_GE(find(r, "symbols.sbem", 0.0), 1.0);
}

TEST(Experiments, TauSweepNamesBothWidths) {
    auto c = small(ExperimentKind::tau_sweep);
    c.trials = 1;
    const auto r = run_experiment(c);
    EXPECT_EQ(r.size(), 4u);
    find(r, "NMSE.dl.sbem.tau8", 0.0);
    find(r, "NMSE.ul.sbem.tau16", 0.0);
}
