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


#ifndef SBEM_DOWNLINK_HPP
#define SBEM_DOWNLINK_HPP

#include <sbem/uplink.hpp>

#include <numeric>

namespace sbem {

struct DownlinkTrainingConfig {
    std::size_t tau = 16;
    std::size_t guard = 4;
    double train_energy = 16.0;       // P^dt per stream
    std::vector<double> user_energy;  // optional per-user override
    double noise_power = 1.0;

    double energy(std::size_t user) const {
        if (!user_energy.empty()) {
            if (user >= user_energy.size()) throw ConfigError("DownlinkTrainingConfig: missing per-user energy");
            return user_energy[user];
        }
        return train_energy;
    }

    /// varpi = sqrt(P^dt / (tau L sigma_p^2))
    double scaling(double energy, const PilotSet& pilots) const {
        return std::sqrt(energy / (static_cast<double>(tau) * pilots.column_energy()));
    }
};

struct FeedbackReport {
    std::size_t user = 0;
    CVector coefficients;  // tau entries
};

/// S_k = varpi S^H, a tau x L matrix.
inline CMatrix user_training_matrix(const PilotSet& pilots, double varpi) {
    CMatrix s = pilots.adjoint_matrix();
    for (auto& v : s.data) v *= varpi;
    return s;
}

/// User-side LS: given the received row y^H (length L, entries of g^H X + n^H)
/// and the training matrix S_k, returns c with c^H = y^H S_k^+.
inline CVector estimate_downlink_coefficients(std::span<const cplx> received_row, const CMatrix& training) {
    if (received_row.size() != training.cols) throw ConfigError("estimate_downlink_coefficients: length differs from training");
    const CMatrix pinv = pseudo_inverse_rows(training);  // L x tau
    CVector c(training.rows);
    for (std::size_t i = 0; i < training.rows; ++i) {
        cplx s{0.0, 0.0};
        for (std::size_t l = 0; l < training.cols; ++l) s += cmul(received_row[l], pinv(l, i));
        c[i] = std::conj(s);
    }
    return c;
}

/// Streams of a downlink training group: one per distinct signature, in order
/// of first appearance. `member_stream[i]` maps the i-th member to its stream.
struct StreamLayout {
    std::vector<SpatialSignature> signatures;
    std::vector<std::size_t> lead;  // user whose energy sets the stream scaling
    std::vector<std::size_t> member_stream;
};

inline StreamLayout stream_layout(std::span<const std::size_t> members, std::span<const SpatialSignature> sigs) {
    StreamLayout out;
    for (std::size_t k : members) {
        auto it = std::find(out.signatures.begin(), out.signatures.end(), sigs[k]);
        if (it == out.signatures.end()) {
            out.member_stream.push_back(out.signatures.size());
            out.signatures.push_back(sigs[k]);
            out.lead.push_back(k);
        } else {
            out.member_stream.push_back(static_cast<std::size_t>(it - out.signatures.begin()));
        }
    }
    return out;
}

/// X = sum_l varpi_l Phi(shift_l)^H [F^H]_{:,B_l} S^H, an M x L matrix.
inline CMatrix downlink_transmit_block(const StreamLayout& layout, std::span<const double> varpi, const PilotSet& pilots,
                                       std::size_t m) {
    CMatrix x(m, pilots.length);
    const std::size_t tau = pilots.count();
    for (std::size_t s = 0; s < layout.signatures.size(); ++s) {
        const auto& sig = layout.signatures[s];
        if (sig.width != tau) throw ConfigError("downlink_train: signature width differs from tau");
        // columns of Phi^H F^H restricted to the window
        std::vector<CVector> basis(tau);
        for (std::size_t r = 0; r < tau; ++r) {
            CVector e(tau, cplx{0.0, 0.0});
            e[r] = 1.0;
            basis[r] = expand_from_window(e, sig, LinkDirection::downlink).entries;
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t l = 0; l < pilots.length; ++l) {
                cplx acc{0.0, 0.0};
                for (std::size_t r = 0; r < tau; ++r) acc += cmul(basis[r][i], std::conj(pilots.columns[r][l]));
                x(i, l) += varpi[s] * acc;
            }
    }
    return x;
}

/// Grouped downlink training. Each group occupies its own L-symbol block; the
/// same S^H is reused on every signature of the group. Members sharing a
/// signature share its stream.
inline std::vector<FeedbackReport> downlink_train(std::span<const ChannelVector> channels, const GroupAssignment& assignment,
                                                  std::span<const SpatialSignature> dl_signatures, const PilotSet& pilots,
                                                  const DownlinkTrainingConfig& cfg, Rng& rng) {
    if (dl_signatures.size() != channels.size()) throw ConfigError("downlink_train: one signature per user required");
    if (pilots.count() != cfg.tau) throw ConfigError("downlink_train: pilot count differs from tau");
    if (channels.empty()) return {};
    const std::size_t m = channels.front().size();
    std::vector<FeedbackReport> out(channels.size());
    std::vector<bool> seen(channels.size(), false);

    for (const auto& group : assignment.groups) {
        const auto layout = stream_layout(group, dl_signatures);
        std::vector<double> varpi(layout.signatures.size());
        for (std::size_t s = 0; s < varpi.size(); ++s) varpi[s] = cfg.scaling(cfg.energy(layout.lead[s]), pilots);
        const CMatrix x = downlink_transmit_block(layout, varpi, pilots, m);

        for (std::size_t i = 0; i < group.size(); ++i) {
            const std::size_t k = group[i];
            if (channels[k].size() != m) throw ConfigError("downlink_train: channel sizes differ");
            // y_k^H = g_k^H X + n^H
            CVector row(pilots.length, cplx{0.0, 0.0});
            for (std::size_t l = 0; l < pilots.length; ++l) {
                cplx acc{0.0, 0.0};
                for (std::size_t r = 0; r < m; ++r) acc += cmul(std::conj(channels[k].entries[r]), x(r, l));
                row[l] = acc;
            }
            if (cfg.noise_power > 0.0)
                for (auto& v : row) v += complex_gaussian(rng, cfg.noise_power);
            const CMatrix training = user_training_matrix(pilots, varpi[layout.member_stream[i]]);
            out[k] = {k, estimate_downlink_coefficients(row, training)};
            seen[k] = true;
        }
    }
    for (std::size_t k = 0; k < seen.size(); ++k)
        if (!seen[k]) throw ConfigError("downlink_train: user missing from the group assignment");
    return out;
}

/// g_hat = Phi(shift)^H [F^H]_{:,B} c
inline ChannelVector reconstruct_downlink(const FeedbackReport& report, const SpatialSignature& sig) {
    if (report.coefficients.size() != sig.width) throw ConfigError("reconstruct_downlink: report length differs from window width");
    return expand_from_window(report.coefficients, sig, LinkDirection::downlink);
}

/// Truncation, self-interference from the other streams of the group, and
/// expected noise. `varpi_ratios[l]` is varpi_l / varpi_k (1 if empty).
inline MseTerms downlink_mse_decomposition(const ChannelVector& g, std::span<const SpatialSignature> other_streams,
                                           const SpatialSignature& sig, const DownlinkTrainingConfig& cfg, double own_energy,
                                           std::span<const double> varpi_ratios = {}) {
    if (!varpi_ratios.empty() && varpi_ratios.size() != other_streams.size())
        throw ConfigError("downlink_mse_decomposition: one ratio per stream required");
    MseTerms t;
    const auto full = to_beamspace(g, sig.shift);
    double inside = 0.0;
    for (std::size_t r = 0; r < sig.width; ++r) inside += abs2(full.entries[sig.bin(r)]);
    t.truncation = std::max(0.0, norm2(full.entries) - inside);

    CVector leak(sig.width, cplx{0.0, 0.0});
    for (std::size_t l = 0; l < other_streams.size(); ++l) {
        const double ratio = varpi_ratios.empty() ? 1.0 : varpi_ratios[l];
        const auto part = partial_beamspace(g.view(), other_streams[l].shift, other_streams[l]);
        for (std::size_t r = 0; r < sig.width; ++r) leak[r] += ratio * part[r];
    }
    t.interference = norm2(leak);
    const double tau = static_cast<double>(sig.width);
    t.noise = tau * tau * cfg.noise_power / own_energy;
    return t;
}

// ---- downlink signatures from uplink estimates --------------------------------

/// Connected components of the "conflict" relation (not co-groupable) among
/// uplink signatures, listed by smallest member.
inline std::vector<std::vector<std::size_t>> conflict_clusters(std::span<const SpatialSignature> sigs, std::size_t guard) {
    const std::size_t n = sigs.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!compatible(sigs[i], sigs[j], guard)) {
                const std::size_t a = find(i), b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<std::size_t> slot(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        if (slot[r] == n) {
            slot[r] = clusters.size();
            clusters.emplace_back();
        }
        clusters[slot[r]].push_back(i);
    }
    return clusters;
}

/// Uplink-domain power profile mapped onto the downlink ring by frequency
/// scaling, used to trim a reciprocal window back to tau bins.
inline std::vector<double> reciprocal_power_profile(std::span<const CVector> estimates, const SpatialSignature& ul,
                                                    const ArrayConfig& cfg) {
    const std::size_t m = cfg.num_antennas;
    std::vector<double> ul_power(m, 0.0);
    for (const auto& h : estimates) {
        const auto b = to_beamspace(h, ul.shift);
        const double w = 1.0 / std::max(norm2(h), 1e-300);
        for (std::size_t q = 0; q < m; ++q) ul_power[q] += w * abs2(b.entries[q]);
    }
    const double r = cfg.carrier_ratio();
    std::vector<double> out(m);
    for (std::size_t q = 0; q < m; ++q) {
        const auto src = static_cast<long long>(std::llround(static_cast<double>(detail::signed_bin(q, m)) / r));
        out[q] = ul_power[circular_mod(src, m)];
    }
    return out;
}

struct DownlinkPlan {
    std::vector<SpatialSignature> signatures;  // per user, downlink domain
    GroupAssignment assignment;                // purpose downlink_train
    std::size_t streams = 0;
};

/// Users with conflicting uplink windows share one common signature (and one
/// pilot stream); the streams are then grouped by the co-grouping rule on their downlink
/// windows. `spectra` are the rotated spectra of the uplink estimates on `grid`.
inline DownlinkPlan plan_downlink(std::span<const CVector> ul_estimates, std::span<const RotatedSpectrum> spectra,
                                  std::span<const SpatialSignature> ul_signatures, const ArrayConfig& cfg, std::size_t tau,
                                  std::size_t guard, std::span<const double> grid) {
    if (ul_estimates.size() != ul_signatures.size() || spectra.size() != ul_estimates.size())
        throw ConfigError("plan_downlink: one signature and spectrum per estimate required");
    DownlinkPlan plan;
    plan.signatures.resize(ul_estimates.size());
    const auto clusters = conflict_clusters(ul_signatures, guard);
    std::vector<SpatialSignature> stream_sigs;
    for (const auto& members : clusters) {
        std::vector<CVector> est;
        std::vector<const RotatedSpectrum*> sp;
        for (std::size_t k : members) {
            est.push_back(ul_estimates[k]);
            sp.push_back(&spectra[k]);
        }
        const auto common = find_common_signature(sp, tau, grid, true);
        auto dl = reciprocal_signature(common, cfg);
        if (dl.width != tau) dl = fit_window(dl, tau, reciprocal_power_profile(est, common, cfg));
        for (std::size_t k : members) plan.signatures[k] = dl;
        stream_sigs.push_back(dl);
    }
    plan.streams = stream_sigs.size();
    const auto stream_groups = group_users(stream_sigs, guard, GroupPurpose::downlink_train);
    plan.assignment.purpose = GroupPurpose::downlink_train;
    for (const auto& sg : stream_groups.groups) {
        std::vector<std::size_t> users;
        for (std::size_t s : sg)
            for (std::size_t k : clusters[s]) users.push_back(k);
        std::sort(users.begin(), users.end());
        plan.assignment.groups.push_back(std::move(users));
    }
    return plan;
}

inline DownlinkPlan plan_downlink(std::span<const CVector> ul_estimates, std::span<const SpatialSignature> ul_signatures,
                                  const ArrayConfig& cfg, std::size_t tau, std::size_t guard, std::span<const double> grid) {
    std::vector<RotatedSpectrum> spectra;
    spectra.reserve(ul_estimates.size());
    for (const auto& h : ul_estimates) spectra.push_back(rotated_spectrum(h, grid));
    return plan_downlink(ul_estimates, spectra, ul_signatures, cfg, tau, guard, grid);
}

}  // namespace sbem

#endif  // SBEM_DOWNLINK_HPP
