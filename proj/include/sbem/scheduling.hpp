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


#ifndef SBEM_SCHEDULING_HPP
#define SBEM_SCHEDULING_HPP

#include <sbem/beamspace.hpp>
#include <sbem/uplink.hpp>

#include <numeric>

namespace sbem {

struct Beamformer {
    std::size_t user = 0;
    CVector weights;
};

/// w = g_hat / ||g_hat||^2
inline Beamformer mf_beamformer(const ChannelVector& estimate, std::size_t user = 0) {
    const double n2 = norm2(estimate.entries);
    if (!(n2 > 0.0)) throw DomainError("mf_beamformer: zero channel estimate");
    Beamformer bf{user, estimate.entries};
    for (auto& v : bf.weights) v /= n2;
    return bf;
}

struct PowerAllocation {
    std::vector<double> levels;  // rho_k, received SNR per user
    std::vector<double> gains;
    double budget = 0.0;
    double water_level = 0.0;  // mu
    double rate = 0.0;         // sum log2(1 + rho_k)

    /// sum rho_k / gain_k
    double cost() const {
        double c = 0.0;
        for (std::size_t k = 0; k < levels.size(); ++k) c += levels[k] / gains[k];
        return c;
    }
};

inline double sum_rate(std::span<const double> levels) {
    double r = 0.0;
    for (double v : levels) r += std::log2(1.0 + v);
    return r;
}

/// max sum log2(1 + rho_k) s.t. sum rho_k / g_k <= budget.
/// rho_k = max(0, mu g_k - 1), mu = (budget + sum_A 1/g_k) / |A| over the
/// active set A of the strongest users.
inline PowerAllocation waterfill(std::span<const double> gains, double budget) {
    if (gains.empty()) throw ConfigError("waterfill: empty group");
    if (!(budget > 0.0)) throw DomainError("waterfill: budget must be positive");
    for (double g : gains)
        if (!(g > 0.0) || !std::isfinite(g)) throw DomainError("waterfill: gains must be positive and finite");

    std::vector<std::size_t> order(gains.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gains[a] > gains[b]; });

    double inv_sum = 0.0;
    double mu = 0.0;
    for (std::size_t n = 1; n <= order.size(); ++n) {
        const double g = gains[order[n - 1]];
        const double candidate = (budget + inv_sum + 1.0 / g) / static_cast<double>(n);
        if (n > 1 && candidate * g <= 1.0) break;
        inv_sum += 1.0 / g;
        mu = candidate;
    }

    PowerAllocation out;
    out.gains.assign(gains.begin(), gains.end());
    out.budget = budget;
    out.water_level = mu;
    out.levels.resize(gains.size());
    for (std::size_t k = 0; k < gains.size(); ++k) out.levels[k] = std::max(0.0, mu * gains[k] - 1.0);
    out.rate = sum_rate(out.levels);
    return out;
}

struct ScheduleResult {
    GroupAssignment assignment;             // purpose data
    std::vector<PowerAllocation> allocations;
    std::vector<double> rates;              // R(U_g | P) per group
    std::vector<std::vector<double>> trace; // group rate after each admission

    std::size_t group_count() const { return assignment.size(); }
};

/// Greedy scheduling: seed with the strongest remaining user at budget rho,
/// then keep admitting the compatible user that maximizes the group rate at
/// budget P + rho, as long as the rate does not drop. Ties go to the lowest index.
inline ScheduleResult schedule_users(std::span<const SpatialSignature> signatures, std::span<const double> gains, double rho,
                                     std::size_t guard) {
    if (signatures.size() != gains.size()) throw ConfigError("schedule_users: one gain per signature required");
    if (!(rho > 0.0)) throw DomainError("schedule_users: per-user budget must be positive");
    ScheduleResult out;
    out.assignment.purpose = GroupPurpose::data;
    std::vector<bool> remaining(gains.size(), true);
    std::size_t left = gains.size();

    while (left > 0) {
        std::size_t seed = gains.size();
        for (std::size_t k = 0; k < gains.size(); ++k)
            if (remaining[k] && (seed == gains.size() || gains[k] > gains[seed])) seed = k;
        std::vector<std::size_t> group{seed};
        remaining[seed] = false;
        --left;
        double budget = rho;
        std::vector<double> group_gains{gains[seed]};
        PowerAllocation alloc = waterfill(group_gains, budget);
        std::vector<double> trace{alloc.rate};

        for (;;) {
            std::size_t best = gains.size();
            PowerAllocation best_alloc;
            for (std::size_t m = 0; m < gains.size(); ++m) {
                if (!remaining[m]) continue;
                const bool fits = std::all_of(group.begin(), group.end(),
                                              [&](std::size_t l) { return compatible(signatures[m], signatures[l], guard); });
                if (!fits) continue;
                auto trial_gains = group_gains;
                trial_gains.push_back(gains[m]);
                auto a = waterfill(trial_gains, budget + rho);
                if (best == gains.size() || a.rate > best_alloc.rate) {
                    best = m;
                    best_alloc = std::move(a);
                }
            }
            if (best == gains.size() || best_alloc.rate < alloc.rate) break;
            group.push_back(best);
            group_gains.push_back(gains[best]);
            remaining[best] = false;
            --left;
            budget += rho;
            alloc = std::move(best_alloc);
            trace.push_back(alloc.rate);
        }
        out.rates.push_back(alloc.rate);
        out.allocations.push_back(std::move(alloc));
        out.assignment.groups.push_back(std::move(group));
        out.trace.push_back(std::move(trace));
    }
    return out;
}

// ---- downlink data ---------------------------------------------------------

/// y_k = sum_l g_k^H w_l sqrt(rho_l) x_l + n_k for the members of one group.
/// couplings(k, l) = g_k^H w_l sqrt(rho_l).
struct DataLink {
    CMatrix couplings;
    std::vector<double> levels;
    double noise_power = 1.0;

    std::size_t size() const { return levels.size(); }

    /// Power of the intended term over interference plus noise, after
    /// scaling by 1/sqrt(rho_k).
    double sinr(std::size_t k) const {
        double interf = noise_power;
        for (std::size_t l = 0; l < size(); ++l)
            if (l != k) interf += abs2(couplings(k, l));
        return abs2(couplings(k, k)) / interf;
    }
};

inline DataLink downlink_data_model(std::span<const ChannelVector> true_channels, std::span<const ChannelVector> estimates,
                                    std::span<const double> levels, double noise_power = 1.0) {
    const std::size_t n = true_channels.size();
    if (estimates.size() != n || levels.size() != n) throw ConfigError("downlink_data_model: inconsistent group");
    std::vector<Beamformer> bf;
    bf.reserve(n);
    for (std::size_t k = 0; k < n; ++k) bf.push_back(mf_beamformer(estimates[k], k));
    DataLink link;
    link.couplings = CMatrix(n, n);
    link.levels.assign(levels.begin(), levels.end());
    link.noise_power = noise_power;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
            link.couplings(k, l) = inner(true_channels[k].entries, bf[l].weights) * std::sqrt(levels[l]);
    return link;
}

struct BitErrors {
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;

    double rate() const { return bits == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(bits); }

    BitErrors& operator+=(const BitErrors& o) {
        errors += o.errors;
        bits += o.bits;
        return *this;
    }
};

/// Gray QPSK: bit pair (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2).
inline cplx qpsk_symbol(unsigned bits) {
    const double a = 1.0 / std::sqrt(2.0);
    return {(bits & 1u) ? -a : a, (bits & 2u) ? -a : a};
}

inline unsigned qpsk_detect(cplx y) { return (y.real() < 0.0 ? 1u : 0u) | (y.imag() < 0.0 ? 2u : 0u); }

/// Sends `symbols` QPSK symbols per active user over the data link and detects
/// on y_k / sqrt(rho_k). Users with rho_k = 0 carry no data.
inline BitErrors simulate_qpsk(const DataLink& link, std::size_t symbols, Rng& rng) {
    BitErrors out;
    const std::size_t n = link.size();
    std::uniform_int_distribution<unsigned> pick(0, 3);
    std::vector<unsigned> tx(n);
    std::vector<cplx> x(n);
    for (std::size_t s = 0; s < symbols; ++s) {
        for (std::size_t l = 0; l < n; ++l) {
            tx[l] = pick(rng);
            x[l] = link.levels[l] > 0.0 ? qpsk_symbol(tx[l]) : cplx{0.0, 0.0};
        }
        for (std::size_t k = 0; k < n; ++k) {
            const cplx noise = complex_gaussian(rng, link.noise_power);
            if (!(link.levels[k] > 0.0)) continue;
            cplx y = noise;
            for (std::size_t l = 0; l < n; ++l) y += link.couplings(k, l) * x[l];
            const unsigned rx = qpsk_detect(y / std::sqrt(link.levels[k]));
            out.errors += static_cast<std::uint64_t>(std::popcount(rx ^ tx[k]));
            out.bits += 2;
        }
    }
    return out;
}

/// Q(x) = P(N(0,1) > x)
inline double gaussian_q(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace sbem

#endif  // SBEM_SCHEDULING_HPP
