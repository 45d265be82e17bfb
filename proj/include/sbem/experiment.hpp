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


#ifndef SBEM_EXPERIMENT_HPP
#define SBEM_EXPERIMENT_HPP

#include <sbem/downlink.hpp>
#include <sbem/scheduling.hpp>

#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string_view>
#include <thread>

namespace sbem {

enum class ExperimentKind { table1, ul_dl_mse, vs_ls_ul, vs_ls_dl, tau_sweep, rotation_ablation, aasr, ber };

inline const std::map<std::string, ExperimentKind>& experiment_kinds() {
    static const std::map<std::string, ExperimentKind> kinds{
        {"table1", ExperimentKind::table1},       {"ul_dl_mse", ExperimentKind::ul_dl_mse},
        {"vs_ls_ul", ExperimentKind::vs_ls_ul},   {"vs_ls_dl", ExperimentKind::vs_ls_dl},
        {"tau_sweep", ExperimentKind::tau_sweep}, {"rotation_ablation", ExperimentKind::rotation_ablation},
        {"aasr", ExperimentKind::aasr},           {"ber", ExperimentKind::ber}};
    return kinds;
}

inline ExperimentKind parse_kind(std::string_view name) {
    const auto& kinds = experiment_kinds();
    const auto it = kinds.find(std::string(name));
    if (it == kinds.end()) throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
    return it->second;
}

inline std::string to_string(ExperimentKind kind) {
    for (const auto& [name, k] : experiment_kinds())
        if (k == kind) return name;
    return "unknown";
}

/// one_ring: plain multi-ray channels. signature_supported: every user's
/// channel is projected onto its cluster's tau-bin window at zero rotation,
/// so the model assumptions hold exactly.
enum class ChannelModel { one_ring, signature_supported };

/// Per-user increment of the data power budget: rho itself ("transmit"), or
/// rho / M so that rho is the average received SNR ("per_antenna").
enum class DataBudget { transmit, per_antenna };

struct PopulationSpec {
    std::vector<double> cluster_means_deg{-48.59, -14.48, 14.48, 48.59};
    std::size_t users_per_cluster = 8;
    double spread_deg = 2.0;
    std::size_t num_rays = 100;

    std::size_t user_count() const { return cluster_means_deg.size() * users_per_cluster; }
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ul_dl_mse;
    ArrayConfig array;
    PopulationSpec population;
    ChannelModel channel_model = ChannelModel::one_ring;
    bool reciprocal_gains = false;
    bool noiseless = false;

    std::size_t tau = 16;
    std::optional<std::size_t> guard;  // defaults to tau / 4
    std::size_t pilot_len = 32;
    std::vector<std::size_t> pilot_lengths{16, 32, 64};
    std::vector<std::size_t> tau_list{8, 16};
    std::size_t ls_pilot_len = 0;  // 0: one pilot per user
    PilotFamily pilot_family = PilotFamily::dft;
    std::vector<double> snr_db{-10, -5, 0, 5, 10, 15, 20, 25, 30};
    std::size_t coherence = 128;
    std::vector<std::size_t> coherence_list{128, 256, 512, 1024};
    std::size_t shift_grid_points = 129;
    bool rotation = true;

    std::size_t trials = 100;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0: hardware concurrency

    double table_eta = 0.95;
    std::vector<double> table_angles_deg = [] {
        std::vector<double> a;
        for (int d = 1; d <= 89; d += 2) a.push_back(d);
        return a;
    }();

    double ablation_angle_deg = 30.0;
    double ablation_spread_deg = 2.0;
    double ablation_eta = 0.99;
    std::size_t ablation_rays = 100;

    DataBudget data_budget = DataBudget::per_antenna;
    std::size_t ber_min_symbols = 100000;
    std::size_t ber_error_target = 500;
    std::size_t ber_max_trials = 100;
    std::size_t ber_symbols_per_trial = 256;

    std::size_t guard_for(std::size_t t) const { return guard.value_or(t / 4); }
    std::size_t user_count() const { return population.user_count(); }
    std::size_t ls_pilots() const { return ls_pilot_len == 0 ? user_count() : ls_pilot_len; }
    std::vector<double> shift_grid_values() const { return shift_grid(array.num_antennas, rotation ? shift_grid_points : 1); }

    void validate() const {
        array.validate();
        if (population.cluster_means_deg.empty() || population.users_per_cluster == 0 || population.num_rays == 0)
            throw ConfigError("population: need at least one cluster, user, and ray");
        if (population.spread_deg < 0.0) throw ConfigError("population: negative angular spread");
        for (double c : population.cluster_means_deg)
            if (std::abs(c) + population.spread_deg >= 90.0) throw ConfigError("population: cluster angles must stay inside (-90, 90) degrees");
        if (trials == 0) throw ConfigError("trials must be positive");
        if (snr_db.empty()) throw ConfigError("snr list must not be empty");
        if (shift_grid_points == 0) throw ConfigError("shift grid needs at least one point");
        auto check_pair = [&](std::size_t t, std::size_t l) {
            if (t == 0 || t > array.num_antennas) throw ConfigError("tau must lie in [1, M]");
            if (l < t) throw ConfigError("pilot length L must be at least tau");
            if (l > coherence) throw ConfigError("pilot length L must not exceed the coherence interval T");
        };
        check_pair(tau, pilot_len);
        for (std::size_t l : pilot_lengths) check_pair(tau, l);
        for (std::size_t t : tau_list) check_pair(t, pilot_len);
        if (coherence_list.empty()) throw ConfigError("coherence list must not be empty");
        for (std::size_t t : coherence_list)
            if (t < pilot_len) throw ConfigError("coherence intervals must be at least L");
        if (!(table_eta > 0.0 && table_eta < 1.0) || !(ablation_eta > 0.0 && ablation_eta < 1.0))
            throw ConfigError("eta must lie in (0, 1)");
        if (ber_symbols_per_trial == 0 || ber_max_trials == 0) throw ConfigError("BER symbol and trial counts must be positive");
    }
};

struct MetricRecord {
    std::string experiment;
    std::string sweep_name;
    double sweep_value = 0.0;
    std::string metric;
    double value = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

// ---- trial executor ----------------------------------------------------------

/// Runs fn(i) for i in [first, first + count) on `threads` workers and returns
/// the results in index order, so any reduction over them is independent of
/// scheduling. The first exception (by index) is rethrown.
template <class Result>
std::vector<Result> run_trials(std::size_t first, std::size_t count, std::size_t threads, const std::function<Result(std::size_t)>& fn) {
    std::vector<std::optional<Result>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(count, 1));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                slots[i] = fn(first + i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    std::vector<Result> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        out.push_back(std::move(*slots[i]));
    }
    return out;
}

// ---- channels ------------------------------------------------------------------

struct Population {
    std::vector<ChannelVector> uplink;
    std::vector<ChannelVector> downlink;
    std::vector<std::size_t> cluster;  // cluster index per user
};

inline ChannelVector project_onto(const ChannelVector& h, const SpatialSignature& sig) {
    return expand_from_window(partial_beamspace(h.view(), sig.shift, sig), sig, h.link);
}

inline Population draw_population(const ExperimentConfig& cfg, std::size_t tau, Rng& rng) {
    Population pop;
    const auto& spec = cfg.population;
    std::vector<SpatialSignature> ul_win, dl_win;
    if (cfg.channel_model == ChannelModel::signature_supported) {
        const std::vector<double> zero{0.0};
        for (double mean : spec.cluster_means_deg) {
            const auto a = steering_vector(cfg.array, deg2rad(mean), LinkDirection::uplink);
            const auto ul = find_signature(a.view(), tau, zero);
            auto dl = reciprocal_signature(ul, cfg.array);
            if (dl.width != tau) {
                const auto ad = to_beamspace(steering_vector(cfg.array, deg2rad(mean), LinkDirection::downlink), dl.shift);
                std::vector<double> p(ad.size());
                for (std::size_t q = 0; q < ad.size(); ++q) p[q] = abs2(ad.entries[q]);
                dl = fit_window(dl, tau, p);
            }
            ul_win.push_back(ul);
            dl_win.push_back(dl);
        }
    }
    for (std::size_t c = 0; c < spec.cluster_means_deg.size(); ++c) {
        const UserProfile profile{deg2rad(spec.cluster_means_deg[c]), deg2rad(spec.spread_deg), spec.num_rays};
        for (std::size_t u = 0; u < spec.users_per_cluster; ++u) {
            auto pair = generate_channel_pair(cfg.array, profile, rng, cfg.reciprocal_gains);
            if (cfg.channel_model == ChannelModel::signature_supported) {
                pair.uplink = project_onto(pair.uplink, ul_win[c]);
                pair.downlink = project_onto(pair.downlink, dl_win[c]);
            }
            pop.uplink.push_back(std::move(pair.uplink));
            pop.downlink.push_back(std::move(pair.downlink));
            pop.cluster.push_back(c);
        }
    }
    return pop;
}

// ---- metrics -------------------------------------------------------------------

/// sum_k ||h_k - h_hat_k||^2 / sum_k ||h_k||^2
inline double nmse(std::span<const ChannelVector> truth, std::span<const ChannelVector> estimate) {
    if (truth.size() != estimate.size()) throw ConfigError("nmse: list sizes differ");
    StableSum err, ref;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        err.add(distance2(truth[k].entries, estimate[k].entries));
        ref.add(norm2(truth[k].entries));
    }
    if (!(ref.value() > 0.0)) throw DomainError("nmse: zero reference power");
    return err.value() / ref.value();
}

/// (1 - T_pilot / T) * sum_g R_g / G, with the prefactor floored at zero when
/// training fills the whole coherence interval.
inline double compute_aasr(std::span<const double> group_rates, std::size_t coherence, std::size_t pilot_symbols) {
    if (coherence == 0) throw ConfigError("compute_aasr: coherence interval must be positive");
    if (group_rates.empty()) return 0.0;
    const double prefactor = std::max(0.0, 1.0 - static_cast<double>(pilot_symbols) / static_cast<double>(coherence));
    StableSum s;
    for (double r : group_rates) s.add(r);
    return prefactor * s.value() / static_cast<double>(group_rates.size());
}

inline double mean_of(std::span<const double> v) {
    StableSum s;
    for (double x : v) s.add(x);
    return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

// ---- baselines -------------------------------------------------------------------

/// Per-user LS with one orthogonal pilot per user.
inline std::vector<ChannelVector> baseline_ls_uplink(std::span<const ChannelVector> channels, const PilotSet& pilots,
                                                     std::span<const double> energies, double noise_power, Rng& rng) {
    if (pilots.count() < channels.size()) throw ConfigError("baseline_ls_uplink: need one pilot per user (L >= K)");
    const auto y = simulate_pilot_reception(channels, pilots, energies, noise_power, &rng);
    return preamble_estimate(y, pilots, energies);
}

/// Full-dimension downlink LS at every user with the M x M training matrix
/// X = sqrt(E / M) F (F unitary DFT), so tr(X X^H) = E.
inline std::vector<ChannelVector> baseline_ls_downlink(std::span<const ChannelVector> channels, double total_energy,
                                                       double noise_power, Rng& rng) {
    if (channels.empty()) return {};
    if (!(total_energy > 0.0)) throw ConfigError("baseline_ls_downlink: training energy must be positive");
    const std::size_t m = channels.front().size();
    const double c = std::sqrt(total_energy / static_cast<double>(m));
    const double unit = 1.0 / std::sqrt(static_cast<double>(m));
    const Fft& fft = fft_plan(m);
    std::vector<ChannelVector> out;
    out.reserve(channels.size());
    for (const auto& g : channels) {
        if (g.size() != m) throw ConfigError("baseline_ls_downlink: channel sizes differ");
        // received row r = g^H X + n^H
        CVector r(m);
        for (std::size_t i = 0; i < m; ++i) r[i] = std::conj(g.entries[i]);
        fft.forward(r);
        for (auto& v : r) v *= c * unit;
        if (noise_power > 0.0)
            for (auto& v : r) v += complex_gaussian(rng, noise_power);
        // g_hat^H = r X^{-1} = r F^H / c
        fft.inverse(r);
        ChannelVector est{CVector(m), g.link};
        for (std::size_t i = 0; i < m; ++i) est.entries[i] = std::conj(r[i]) * unit / c;
        out.push_back(std::move(est));
    }
    return out;
}

// ---- SBEM pipeline -----------------------------------------------------------------

struct LinkBudget {
    double rho = 1.0;          // sigma_p^2 / sigma_n^2
    double noise_power = 1.0;  // sigma_n^2, zero for noiseless runs
};

inline LinkBudget budget_for(const ExperimentConfig& cfg, double snr_db) { return {db2lin(snr_db), cfg.noiseless ? 0.0 : 1.0}; }

struct SbemOutcome {
    std::vector<ChannelVector> preamble;
    std::vector<SpatialSignature> ul_signatures;
    GroupAssignment ul_groups;
    std::vector<ChannelVector> ul_estimates;
    DownlinkPlan dl_plan;
    std::vector<FeedbackReport> reports;
    std::vector<ChannelVector> dl_estimates;
    double nmse_ul = 0.0;
    double nmse_dl = 0.0;
};

/// Preamble -> signatures -> grouping -> uplink training -> downlink signatures
/// by reciprocity -> downlink training and feedback. Training energies are
/// P^ut = P^dt = L rho (unit noise).
inline SbemOutcome run_sbem(const ExperimentConfig& cfg, const Population& pop, std::size_t tau, std::size_t pilot_len,
                            const LinkBudget& budget, Rng& rng) {
    SbemOutcome out;
    const std::size_t guard = cfg.guard_for(tau);
    const auto grid = cfg.shift_grid_values();
    const PilotSet pilots = make_pilots(tau, pilot_len, budget.rho, cfg.pilot_family);
    const double energy = static_cast<double>(pilot_len) * budget.rho;

    UplinkTrainingConfig ul{tau, guard, energy, {}, budget.noise_power};
    out.preamble = run_preamble(pop.uplink, pilots, ul, rng);
    std::vector<RotatedSpectrum> spectra;
    spectra.reserve(out.preamble.size());
    out.ul_signatures.reserve(out.preamble.size());
    for (const auto& h : out.preamble) {
        spectra.push_back(rotated_spectrum(h.view(), grid));
        out.ul_signatures.push_back(find_signature(spectra.back(), tau, grid));
    }
    out.ul_groups = rebalance_groups(group_users(out.ul_signatures, guard), tau);
    for (auto& e : uplink_train(pop.uplink, out.ul_groups, out.ul_signatures, pilots, ul, rng, true))
        out.ul_estimates.push_back(std::move(e.channel));

    std::vector<CVector> pre;
    pre.reserve(out.preamble.size());
    for (const auto& h : out.preamble) pre.push_back(h.entries);
    out.dl_plan = plan_downlink(pre, spectra, out.ul_signatures, cfg.array, tau, guard, grid);
    DownlinkTrainingConfig dl{tau, guard, energy, {}, budget.noise_power};
    out.reports = downlink_train(pop.downlink, out.dl_plan.assignment, out.dl_plan.signatures, pilots, dl, rng);
    for (std::size_t k = 0; k < out.reports.size(); ++k)
        out.dl_estimates.push_back(reconstruct_downlink(out.reports[k], out.dl_plan.signatures[k]));

    out.nmse_ul = nmse(pop.uplink, out.ul_estimates);
    out.nmse_dl = nmse(pop.downlink, out.dl_estimates);
    return out;
}

inline std::vector<ChannelVector> run_ls_uplink(const ExperimentConfig& cfg, const Population& pop, const LinkBudget& budget, Rng& rng) {
    const std::size_t len = cfg.ls_pilots();
    const PilotSet pilots = make_pilots(std::min(len, pop.uplink.size()), len, budget.rho, cfg.pilot_family);
    const std::vector<double> energies(pop.uplink.size(), static_cast<double>(len) * budget.rho);
    return baseline_ls_uplink(pop.uplink, pilots, energies, budget.noise_power, rng);
}

/// Total downlink LS training energy K L rho.
inline std::vector<ChannelVector> run_ls_downlink(const Population& pop, std::size_t pilot_len, const LinkBudget& budget, Rng& rng) {
    const double total = static_cast<double>(pop.downlink.size() * pilot_len) * budget.rho;
    return baseline_ls_downlink(pop.downlink, total, budget.noise_power, rng);
}

inline double data_increment(const ExperimentConfig& cfg, double rho) {
    return cfg.data_budget == DataBudget::per_antenna ? rho / static_cast<double>(cfg.array.num_antennas) : rho;
}

inline ScheduleResult schedule_with(std::span<const SpatialSignature> sigs, std::span<const ChannelVector> estimates, double increment,
                                    std::size_t guard) {
    std::vector<double> gains(estimates.size());
    for (std::size_t k = 0; k < estimates.size(); ++k) gains[k] = std::max(norm2(estimates[k].entries), 1e-300);
    return schedule_users(sigs, gains, increment, guard);
}

inline BitErrors transmit_qpsk(const ScheduleResult& sched, std::span<const ChannelVector> truth, std::span<const ChannelVector> estimates,
                               double noise_power, std::size_t symbols, Rng& rng) {
    BitErrors total;
    for (std::size_t g = 0; g < sched.group_count(); ++g) {
        const auto& members = sched.assignment.groups[g];
        std::vector<ChannelVector> t, e;
        for (std::size_t k : members) {
            t.push_back(truth[k]);
            e.push_back(estimates[k]);
        }
        const auto link = downlink_data_model(t, e, sched.allocations[g].levels, noise_power);
        total += simulate_qpsk(link, symbols, rng);
    }
    return total;
}

// ---- experiments -------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// stream tags keep channel draws shared across sweep points
enum : std::uint64_t { tag_channel = 1, tag_training = 2, tag_ls = 3, tag_data = 4, tag_ablation = 5 };

struct MseSample {
    double ul = 0.0, dl = 0.0, ls_ul = 0.0, ls_dl = 0.0;
};

inline void mse_sweep(const ExperimentConfig& cfg, std::vector<MetricRecord>& out, std::size_t tau, std::size_t pilot_len,
                      bool with_ls_ul, bool with_ls_dl, const std::string& suffix, bool emit_ul, bool emit_dl) {
    const std::string kind = to_string(cfg.kind);
    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
        const double snr = cfg.snr_db[si];
        const auto budget = budget_for(cfg, snr);
        const auto samples = run_trials<MseSample>(0, cfg.trials, cfg.threads, [&](std::size_t t) {
            Rng ch(derive_seed(cfg.seed, {t, tag_channel}));
            const auto pop = draw_population(cfg, tau, ch);
            Rng tr(derive_seed(cfg.seed, {t, tag_training, tau, pilot_len, si}));
            const auto sbem = run_sbem(cfg, pop, tau, pilot_len, budget, tr);
            MseSample s{sbem.nmse_ul, sbem.nmse_dl, 0.0, 0.0};
            Rng ls(derive_seed(cfg.seed, {t, tag_ls, pilot_len, si}));
            if (with_ls_ul) s.ls_ul = nmse(pop.uplink, run_ls_uplink(cfg, pop, budget, ls));
            if (with_ls_dl) s.ls_dl = nmse(pop.downlink, run_ls_downlink(pop, pilot_len, budget, ls));
            return s;
        });
        auto emit = [&](const std::string& metric, double MseSample::*field) {
            std::vector<double> v;
            for (const auto& s : samples) v.push_back(s.*field);
            out.push_back({kind, "snr_db", snr, metric, mean_of(v), cfg.trials, cfg.seed});
        };
        if (emit_ul) emit("NMSE.ul.sbem" + suffix, &MseSample::ul);
        if (emit_dl) emit("NMSE.dl.sbem" + suffix, &MseSample::dl);
        if (with_ls_ul) emit("NMSE.ul.ls", &MseSample::ls_ul);
        if (with_ls_dl) emit("NMSE.dl.ls", &MseSample::ls_dl);
    }
}

inline std::vector<MetricRecord> run_table1(const ExperimentConfig& cfg) {
    std::vector<double> angles;
    for (double d : cfg.table_angles_deg) angles.push_back(deg2rad(d));
    const auto greedy = build_offline_table(cfg.array, cfg.table_eta, angles, ConcentrationRule::greedy);
    const auto contiguous = build_offline_table(cfg.array, cfg.table_eta, angles, ConcentrationRule::contiguous);
    std::vector<MetricRecord> out;
    for (std::size_t i = 0; i < angles.size(); ++i) {
        out.push_back({"table1", "angle_deg", cfg.table_angles_deg[i], "C_k", static_cast<double>(greedy[i].cardinality), 1, cfg.seed});
        out.push_back({"table1", "angle_deg", cfg.table_angles_deg[i], "C_k.contiguous",
                       static_cast<double>(contiguous[i].cardinality), 1, cfg.seed});
    }
    return out;
}

struct AblationSample {
    double plain = 0.0, rotated = 0.0, shift = 0.0;
};

inline std::vector<MetricRecord> run_rotation_ablation(const ExperimentConfig& cfg) {
    const UserProfile profile{deg2rad(cfg.ablation_angle_deg), deg2rad(cfg.ablation_spread_deg), cfg.ablation_rays};
    const auto grid = cfg.shift_grid_values();
    const auto samples = run_trials<AblationSample>(0, cfg.trials, cfg.threads, [&](std::size_t t) {
        Rng rng(derive_seed(cfg.seed, {t, tag_ablation}));
        const auto h = generate_channel(cfg.array, profile, rng, LinkDirection::uplink);
        const auto plain = min_contiguous_set(to_beamspace(h, 0.0), cfg.ablation_eta);
        const auto rot = min_rotated_contiguous_set(h.view(), cfg.ablation_eta, grid);
        return AblationSample{static_cast<double>(plain.cardinality()), static_cast<double>(rot.set.cardinality()), rot.shift};
    });
    std::vector<MetricRecord> out;
    std::vector<double> ratio, plain, rotated;
    double max_shift = 0.0;
    for (std::size_t t = 0; t < samples.size(); ++t) {
        const auto& s = samples[t];
        ratio.push_back(s.rotated / s.plain);
        plain.push_back(s.plain);
        rotated.push_back(s.rotated);
        max_shift = std::max(max_shift, std::abs(s.shift));
        out.push_back({"rotation_ablation", "trial", static_cast<double>(t), "D.plain", s.plain, 1, cfg.seed});
        out.push_back({"rotation_ablation", "trial", static_cast<double>(t), "D.rotated", s.rotated, 1, cfg.seed});
        out.push_back({"rotation_ablation", "trial", static_cast<double>(t), "shift", s.shift, 1, cfg.seed});
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const double eta = cfg.ablation_eta;
    out.push_back({"rotation_ablation", "eta", eta, "ratio.median", median(ratio), cfg.trials, cfg.seed});
    out.push_back({"rotation_ablation", "eta", eta, "ratio.mean", mean_of(ratio), cfg.trials, cfg.seed});
    out.push_back({"rotation_ablation", "eta", eta, "D.plain.median", median(plain), cfg.trials, cfg.seed});
    out.push_back({"rotation_ablation", "eta", eta, "D.rotated.median", median(rotated), cfg.trials, cfg.seed});
    out.push_back({"rotation_ablation", "eta", eta, "shift.max_abs", max_shift, cfg.trials, cfg.seed});
    return out;
}

struct AasrSample {
    double rate_sbem = 0.0, rate_ls = 0.0;
    double groups_sbem = 0.0, groups_ls = 0.0;
    std::size_t dl_groups = 0;
    std::vector<double> sbem_rates, ls_rates;
};

inline std::vector<MetricRecord> run_aasr(const ExperimentConfig& cfg) {
    std::vector<MetricRecord> out;
    const std::size_t tau = cfg.tau, len = cfg.pilot_len, m = cfg.array.num_antennas;
    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
        const double snr = cfg.snr_db[si];
        const auto budget = budget_for(cfg, snr);
        const auto samples = run_trials<AasrSample>(0, cfg.trials, cfg.threads, [&](std::size_t t) {
            Rng ch(derive_seed(cfg.seed, {t, tag_channel}));
            const auto pop = draw_population(cfg, tau, ch);
            Rng tr(derive_seed(cfg.seed, {t, tag_training, tau, len, si}));
            const auto sbem = run_sbem(cfg, pop, tau, len, budget, tr);
            Rng ls(derive_seed(cfg.seed, {t, tag_ls, len, si}));
            const auto ls_est = run_ls_downlink(pop, len, budget, ls);
            const double inc = data_increment(cfg, budget.rho);
            const std::size_t guard = cfg.guard_for(tau);
            const auto s_sched = schedule_with(sbem.dl_plan.signatures, sbem.dl_estimates, inc, guard);
            const auto l_sched = schedule_with(sbem.dl_plan.signatures, ls_est, inc, guard);
            AasrSample s;
            s.sbem_rates = s_sched.rates;
            s.ls_rates = l_sched.rates;
            s.dl_groups = sbem.dl_plan.assignment.size();
            s.groups_sbem = static_cast<double>(s_sched.group_count());
            s.groups_ls = static_cast<double>(l_sched.group_count());
            s.rate_sbem = compute_aasr(s.sbem_rates, 1, 0);
            s.rate_ls = compute_aasr(s.ls_rates, 1, 0);
            return s;
        });
        std::vector<double> gs, gl, gdt, rs, rl;
        for (const auto& s : samples) {
            gs.push_back(s.groups_sbem);
            gl.push_back(s.groups_ls);
            gdt.push_back(static_cast<double>(s.dl_groups));
            rs.push_back(s.rate_sbem);
            rl.push_back(s.rate_ls);
        }
        out.push_back({"aasr", "snr_db", snr, "G_dd.sbem", mean_of(gs), cfg.trials, cfg.seed});
        out.push_back({"aasr", "snr_db", snr, "G_dd.ls", mean_of(gl), cfg.trials, cfg.seed});
        out.push_back({"aasr", "snr_db", snr, "G_dt.sbem", mean_of(gdt), cfg.trials, cfg.seed});
        out.push_back({"aasr", "snr_db", snr, "rate.sbem", mean_of(rs), cfg.trials, cfg.seed});
        out.push_back({"aasr", "snr_db", snr, "rate.ls", mean_of(rl), cfg.trials, cfg.seed});
        for (std::size_t coh : cfg.coherence_list) {
            std::vector<double> a_s, a_l;
            for (const auto& s : samples) {
                a_s.push_back(compute_aasr(s.sbem_rates, coh, s.dl_groups * len));
                a_l.push_back(compute_aasr(s.ls_rates, coh, m));
            }
            const std::string tag = ".T" + std::to_string(coh);
            out.push_back({"aasr", "snr_db", snr, "AASR.sbem" + tag, mean_of(a_s), cfg.trials, cfg.seed});
            out.push_back({"aasr", "snr_db", snr, "AASR.ls" + tag, mean_of(a_l), cfg.trials, cfg.seed});
        }
    }
    return out;
}

struct BerSample {
    BitErrors perfect, sbem, ls;
};

inline std::vector<MetricRecord> run_ber(const ExperimentConfig& cfg) {
    std::vector<MetricRecord> out;
    const std::size_t tau = cfg.tau, len = cfg.pilot_len;
    const std::size_t batch = std::max<std::size_t>(cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads, 1);
    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
        const double snr = cfg.snr_db[si];
        const auto budget = budget_for(cfg, snr);
        auto one = [&](std::size_t t) {
            Rng ch(derive_seed(cfg.seed, {t, tag_channel}));
            const auto pop = draw_population(cfg, tau, ch);
            Rng tr(derive_seed(cfg.seed, {t, tag_training, tau, len, si}));
            const auto sbem = run_sbem(cfg, pop, tau, len, budget, tr);
            Rng ls(derive_seed(cfg.seed, {t, tag_ls, len, si}));
            const auto ls_est = run_ls_downlink(pop, len, budget, ls);
            const double inc = data_increment(cfg, budget.rho);
            const std::size_t guard = cfg.guard_for(tau);
            const auto& sigs = sbem.dl_plan.signatures;
            BerSample s;
            Rng data(derive_seed(cfg.seed, {t, tag_data, si}));
            const std::size_t n = cfg.ber_symbols_per_trial;
            s.perfect = transmit_qpsk(schedule_with(sigs, pop.downlink, inc, guard), pop.downlink, pop.downlink, budget.noise_power, n, data);
            s.sbem = transmit_qpsk(schedule_with(sigs, sbem.dl_estimates, inc, guard), pop.downlink, sbem.dl_estimates, budget.noise_power, n, data);
            s.ls = transmit_qpsk(schedule_with(sigs, ls_est, inc, guard), pop.downlink, ls_est, budget.noise_power, n, data);
            return s;
        };
        BerSample total;
        std::size_t used = 0;
        bool done = false;
        while (!done && used < cfg.ber_max_trials) {
            const std::size_t count = std::min(batch, cfg.ber_max_trials - used);
            const auto results = run_trials<BerSample>(used, count, cfg.threads, one);
            for (const auto& r : results) {
                total.perfect += r.perfect;
                total.sbem += r.sbem;
                total.ls += r.ls;
                ++used;
                const std::uint64_t symbols = std::min({total.perfect.bits, total.sbem.bits, total.ls.bits}) / 2;
                const std::uint64_t errors = std::min({total.perfect.errors, total.sbem.errors, total.ls.errors});
                if (symbols >= cfg.ber_min_symbols && errors >= cfg.ber_error_target) {
                    done = true;
                    break;
                }
            }
        }
        out.push_back({"ber", "snr_db", snr, "BER.perfect", total.perfect.rate(), used, cfg.seed});
        out.push_back({"ber", "snr_db", snr, "BER.sbem", total.sbem.rate(), used, cfg.seed});
        out.push_back({"ber", "snr_db", snr, "BER.ls", total.ls.rate(), used, cfg.seed});
        out.push_back({"ber", "snr_db", snr, "symbols.sbem", static_cast<double>(total.sbem.bits / 2), used, cfg.seed});
    }
    return out;
}

}  // namespace detail

inline std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<MetricRecord> out;
    switch (cfg.kind) {
        case ExperimentKind::table1:
            return detail::run_table1(cfg);
        case ExperimentKind::ul_dl_mse:
            for (std::size_t len : cfg.pilot_lengths)
                detail::mse_sweep(cfg, out, cfg.tau, len, false, false, ".L" + std::to_string(len), true, true);
            return out;
        case ExperimentKind::vs_ls_ul:
            detail::mse_sweep(cfg, out, cfg.tau, cfg.pilot_len, true, false, "", true, false);
            return out;
        case ExperimentKind::vs_ls_dl:
            detail::mse_sweep(cfg, out, cfg.tau, cfg.pilot_len, false, true, "", false, true);
            return out;
        case ExperimentKind::tau_sweep:
            for (std::size_t t : cfg.tau_list)
                detail::mse_sweep(cfg, out, t, cfg.pilot_len, false, false, ".tau" + std::to_string(t), true, true);
            return out;
        case ExperimentKind::rotation_ablation:
            return detail::run_rotation_ablation(cfg);
        case ExperimentKind::aasr:
            return detail::run_aasr(cfg);
        case ExperimentKind::ber:
            return detail::run_ber(cfg);
    }
    throw ConfigError("run_experiment: unhandled experiment kind");
}

}  // namespace sbem

#endif  // SBEM_EXPERIMENT_HPP
