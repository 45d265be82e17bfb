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


#ifndef SBEM_UPLINK_HPP
#define SBEM_UPLINK_HPP

#include <sbem/beamspace.hpp>

#include <optional>

namespace sbem {

enum class PilotFamily { dft, hadamard };

/// L x tau pilot matrix S stored by column, s_i^H s_j = L sigma_p^2 delta(i - j).
struct PilotSet {
    std::size_t length = 0;
    double power = 1.0;  // sigma_p^2
    std::vector<CVector> columns;

    std::size_t count() const { return columns.size(); }

    /// Energy L sigma_p^2 carried by every column.
    double column_energy() const { return static_cast<double>(length) * power; }

    /// S^H as a tau x L matrix.
    CMatrix adjoint_matrix() const {
        CMatrix out(count(), length);
        for (std::size_t i = 0; i < count(); ++i)
            for (std::size_t l = 0; l < length; ++l) out(i, l) = std::conj(columns[i][l]);
        return out;
    }
};

inline PilotSet make_pilots(std::size_t count, std::size_t length, double power, PilotFamily family = PilotFamily::dft) {
    if (count == 0 || length < count) throw ConfigError("make_pilots: need 1 <= tau <= L");
    if (!(power > 0.0)) throw ConfigError("make_pilots: pilot power must be positive");
    PilotSet set;
    set.length = length;
    set.power = power;
    set.columns.assign(count, CVector(length));
    const double amp = std::sqrt(power);
    if (family == PilotFamily::dft) {
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t l = 0; l < length; ++l)
                set.columns[i][l] = std::polar(amp, -2.0 * pi * static_cast<double>(i * l % length) / static_cast<double>(length));
    } else {
        if (!is_power_of_two(length)) throw ConfigError("make_pilots: Hadamard pilots need a power-of-two length");
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t l = 0; l < length; ++l)
                set.columns[i][l] = (std::popcount(i & l) % 2 == 0) ? amp : -amp;
    }
    return set;
}

struct UplinkTrainingConfig {
    std::size_t tau = 16;
    std::size_t guard = 4;            // Omega, in beam indices
    double train_energy = 16.0;       // P^ut shared by all users
    std::vector<double> user_energy;  // optional per-user P_k^ut override
    double noise_power = 1.0;         // sigma_n^2

    double energy(std::size_t user) const {
        if (!user_energy.empty()) {
            if (user >= user_energy.size()) throw ConfigError("UplinkTrainingConfig: missing per-user energy");
            return user_energy[user];
        }
        return train_energy;
    }
};

enum class GroupPurpose { uplink_train, downlink_train, data };

struct GroupAssignment {
    std::vector<std::vector<std::size_t>> groups;
    GroupPurpose purpose = GroupPurpose::uplink_train;

    std::size_t size() const { return groups.size(); }

    std::size_t user_count() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.size();
        return n;
    }
};

/// Checks the co-grouping rule inside every group. Members carrying an
/// identical signature are accepted when `allow_shared` is set (they share
/// one downlink pilot stream).
inline bool assignment_valid(const GroupAssignment& a, std::span<const SpatialSignature> sigs, std::size_t guard,
                             bool allow_shared = false) {
    for (const auto& g : a.groups)
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = i + 1; j < g.size(); ++j) {
                const auto& x = sigs[g[i]];
                const auto& y = sigs[g[j]];
                if (allow_shared && x == y) continue;
                if (!compatible(x, y, guard)) return false;
            }
    return true;
}

// ---- preamble -----------------------------------------------------------------

/// Y = sum_i sqrt(d_i) h_i s_i^H + N for up to tau users, user i on pilot i.
inline CMatrix simulate_pilot_reception(std::span<const ChannelVector> channels, const PilotSet& pilots,
                                        std::span<const double> energies, double noise_power, Rng* rng) {
    if (channels.size() > pilots.count()) throw ConfigError("simulate_pilot_reception: more users than pilots");
    if (energies.size() != channels.size()) throw ConfigError("simulate_pilot_reception: one energy per user required");
    if (channels.empty()) throw ConfigError("simulate_pilot_reception: no users");
    const std::size_t m = channels.front().size();
    CMatrix y(m, pilots.length);
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (channels[i].size() != m) throw ConfigError("simulate_pilot_reception: channel sizes differ");
        const double amp = std::sqrt(energies[i] / pilots.column_energy());
        for (std::size_t r = 0; r < m; ++r) {
            const cplx hv = amp * channels[i].entries[r];
            for (std::size_t l = 0; l < pilots.length; ++l) y(r, l) += cmul(hv, std::conj(pilots.columns[i][l]));
        }
    }
    if (rng != nullptr && noise_power > 0.0)
        for (auto& v : y.data) v += complex_gaussian(*rng, noise_power);
    return y;
}

/// Y s (matrix times pilot column).
inline CVector correlate(const CMatrix& y, std::span<const cplx> pilot) {
    if (pilot.size() != y.cols) throw ConfigError("correlate: pilot length differs from received block");
    CVector out(y.rows, cplx{0.0, 0.0});
    for (std::size_t r = 0; r < y.rows; ++r) {
        cplx s{0.0, 0.0};
        for (std::size_t l = 0; l < y.cols; ++l) s += cmul(y(r, l), pilot[l]);
        out[r] = s;
    }
    return out;
}

/// Per-user LS estimates h_k = Y s_k / (sqrt(d_k) L sigma_p^2), user k on pilot k.
inline std::vector<ChannelVector> preamble_estimate(const CMatrix& y, const PilotSet& pilots, std::span<const double> energies) {
    if (energies.size() > pilots.count()) throw ConfigError("preamble_estimate: more users than pilots");
    if (y.cols != pilots.length) throw ConfigError("preamble_estimate: block length differs from pilot length");
    std::vector<ChannelVector> out;
    out.reserve(energies.size());
    for (std::size_t k = 0; k < energies.size(); ++k) {
        if (!(energies[k] > 0.0)) throw ConfigError("preamble_estimate: energies must be positive");
        const double d = energies[k] / pilots.column_energy();
        CVector est = correlate(y, pilots.columns[k]);
        const double scale = 1.0 / (std::sqrt(d) * pilots.column_energy());
        for (auto& v : est) v *= scale;
        out.push_back({std::move(est), LinkDirection::uplink});
    }
    return out;
}

/// Preamble for all users: consecutive blocks of tau users, one LS block each.
inline std::vector<ChannelVector> run_preamble(std::span<const ChannelVector> channels, const PilotSet& pilots,
                                               const UplinkTrainingConfig& cfg, Rng& rng) {
    std::vector<ChannelVector> out;
    out.reserve(channels.size());
    const std::size_t block = pilots.count();
    for (std::size_t first = 0; first < channels.size(); first += block) {
        const std::size_t n = std::min(block, channels.size() - first);
        std::vector<double> energies(n);
        for (std::size_t i = 0; i < n; ++i) energies[i] = cfg.energy(first + i);
        const auto y = simulate_pilot_reception(channels.subspan(first, n), pilots, energies, cfg.noise_power, &rng);
        auto est = preamble_estimate(y, pilots, energies);
        for (auto& e : est) out.push_back(std::move(e));
    }
    return out;
}

// ---- grouping -------------------------------------------------------------------

/// First-fit: each user, in order, joins the first group where it is compatible
/// with every member, else opens a new group.
inline GroupAssignment group_users(std::span<const SpatialSignature> signatures, std::size_t guard,
                                   GroupPurpose purpose = GroupPurpose::uplink_train) {
    GroupAssignment out;
    out.purpose = purpose;
    for (std::size_t k = 0; k < signatures.size(); ++k) {
        bool placed = false;
        for (auto& g : out.groups) {
            const bool fits = std::all_of(g.begin(), g.end(), [&](std::size_t l) { return compatible(signatures[k], signatures[l], guard); });
            if (fits) {
                g.push_back(k);
                placed = true;
                break;
            }
        }
        if (!placed) out.groups.push_back({k});
    }
    return out;
}

/// Splits the largest group (lowest index on ties) in two until there are
/// `target` groups or every group is a singleton. The tail half moves to a
/// new group at the end.
inline GroupAssignment rebalance_groups(GroupAssignment a, std::size_t target) {
    while (a.size() < target) {
        std::size_t largest = 0;
        for (std::size_t g = 1; g < a.size(); ++g)
            if (a.groups[g].size() > a.groups[largest].size()) largest = g;
        if (a.groups.empty() || a.groups[largest].size() < 2) break;
        auto& src = a.groups[largest];
        const std::size_t keep = (src.size() + 1) / 2;
        std::vector<std::size_t> tail(src.begin() + static_cast<std::ptrdiff_t>(keep), src.end());
        src.resize(keep);
        a.groups.push_back(std::move(tail));
    }
    return a;
}

// ---- grouped uplink training ------------------------------------------------------

struct UplinkEstimate {
    ChannelVector channel;
    CVector coefficients;  // [F Phi(phi_k) h_k]_B estimate, tau entries
};

/// Grouped training with pilot reuse: group g sends pilot s_g, the BS extracts
/// y_g = Y s_g / (L sigma_p^2), then for each member k takes the rotated window
/// [F Phi(phi_k) y_g]_{B_k} / sqrt(d_k) and maps it back to the antenna domain.
/// More than tau groups are trained in consecutive rounds of tau groups when
/// `sequential` is set.
inline std::vector<UplinkEstimate> uplink_train(std::span<const ChannelVector> channels, const GroupAssignment& assignment,
                                                std::span<const SpatialSignature> signatures, const PilotSet& pilots,
                                                const UplinkTrainingConfig& cfg, Rng& rng, bool sequential = true) {
    if (signatures.size() != channels.size()) throw ConfigError("uplink_train: one signature per user required");
    if (assignment.size() > pilots.count() && !sequential)
        throw ConfigError("uplink_train: more groups than pilots and sequential rounds disabled");
    if (channels.empty()) return {};
    const std::size_t m = channels.front().size();
    std::vector<std::optional<UplinkEstimate>> out(channels.size());

    const std::size_t per_round = pilots.count();
    for (std::size_t first = 0; first < assignment.size(); first += per_round) {
        const std::size_t n_groups = std::min(per_round, assignment.size() - first);
        CMatrix y(m, pilots.length);
        for (std::size_t gi = 0; gi < n_groups; ++gi) {
            const auto& s = pilots.columns[gi];
            for (std::size_t k : assignment.groups[first + gi]) {
                if (channels[k].size() != m) throw ConfigError("uplink_train: channel sizes differ");
                const double amp = std::sqrt(cfg.energy(k) / pilots.column_energy());
                for (std::size_t r = 0; r < m; ++r) {
                    const cplx hv = amp * channels[k].entries[r];
                    for (std::size_t l = 0; l < pilots.length; ++l) y(r, l) += cmul(hv, std::conj(s[l]));
                }
            }
        }
        if (cfg.noise_power > 0.0)
            for (auto& v : y.data) v += complex_gaussian(rng, cfg.noise_power);

        for (std::size_t gi = 0; gi < n_groups; ++gi) {
            CVector yg = correlate(y, pilots.columns[gi]);
            for (auto& v : yg) v /= pilots.column_energy();
            for (std::size_t k : assignment.groups[first + gi]) {
                const auto& sig = signatures[k];
                if (sig.width != cfg.tau) throw ConfigError("uplink_train: signature width differs from tau");
                const double d = cfg.energy(k) / pilots.column_energy();
                CVector coeffs = partial_beamspace(yg, sig.shift, sig);
                for (auto& c : coeffs) c /= std::sqrt(d);
                ChannelVector est = expand_from_window(coeffs, sig, LinkDirection::uplink);
                out[k] = UplinkEstimate{std::move(est), std::move(coeffs)};
            }
        }
    }

    std::vector<UplinkEstimate> result;
    result.reserve(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (!out[k]) throw ConfigError("uplink_train: user missing from the group assignment");
        result.push_back(std::move(*out[k]));
    }
    return result;
}

struct MseTerms {
    double truncation = 0.0;
    double interference = 0.0;  // pilot contamination (uplink) or self-interference (downlink)
    double noise = 0.0;

    double total() const { return truncation + interference + noise; }
};

/// Truncation, remaining contamination, and expected noise of the grouped
/// uplink estimate for one user. `energy_ratios[l]` is d_l / d_k (1 if empty).
inline MseTerms uplink_mse_decomposition(const ChannelVector& h, std::span<const ChannelVector> groupmates,
                                         const SpatialSignature& sig, const UplinkTrainingConfig& cfg,
                                         double own_energy, std::span<const double> energy_ratios = {}) {
    if (!energy_ratios.empty() && energy_ratios.size() != groupmates.size())
        throw ConfigError("uplink_mse_decomposition: one energy ratio per groupmate required");
    MseTerms t;
    const auto full = to_beamspace(h, sig.shift);
    double inside = 0.0;
    for (std::size_t r = 0; r < sig.width; ++r) inside += abs2(full.entries[sig.bin(r)]);
    t.truncation = std::max(0.0, norm2(full.entries) - inside);

    CVector leak(sig.width, cplx{0.0, 0.0});
    for (std::size_t l = 0; l < groupmates.size(); ++l) {
        const double ratio = energy_ratios.empty() ? 1.0 : energy_ratios[l];
        const auto part = partial_beamspace(groupmates[l].view(), sig.shift, sig);
        for (std::size_t r = 0; r < sig.width; ++r) leak[r] += std::sqrt(ratio) * part[r];
    }
    t.interference = norm2(leak);
    t.noise = static_cast<double>(sig.width) * cfg.noise_power / own_energy;
    return t;
}

}  // namespace sbem

#endif  // SBEM_UPLINK_HPP
