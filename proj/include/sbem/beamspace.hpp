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


#ifndef SBEM_BEAMSPACE_HPP
#define SBEM_BEAMSPACE_HPP

#include <sbem/array_channel.hpp>
#include <sbem/fft.hpp>

#include <algorithm>
#include <numeric>
#include <optional>
#include <ostream>

namespace sbem {

/// F Phi(shift) h, with F the unitary DFT [F]_pq = e^{-j 2 pi p q / M} / sqrt(M)
/// and Phi(shift) = diag(1, e^{j shift}, ..., e^{j (M-1) shift}).
struct BeamspaceVector {
    CVector entries;
    double shift = 0.0;

    std::size_t size() const { return entries.size(); }
};

/// Contiguous window of `width` beam indices on the ring {0..ring-1}, starting at
/// `start` and wrapping modulo `ring`, together with the rotation shift it was
/// selected under.
struct SpatialSignature {
    std::size_t start = 0;
    std::size_t width = 1;
    double shift = 0.0;
    std::size_t ring = 1;

    std::size_t bin(std::size_t r) const { return (start + r) % ring; }
    std::size_t last() const { return bin(width - 1); }

    bool contains(std::size_t q) const { return (q + ring - start % ring) % ring < width; }

    std::vector<std::size_t> bins() const {
        std::vector<std::size_t> out(width);
        for (std::size_t r = 0; r < width; ++r) out[r] = bin(r);
        return out;
    }

    void validate() const {
        if (ring == 0 || width == 0 || width > ring) throw ConfigError("SpatialSignature: width must lie in [1, ring]");
        if (start >= ring) throw ConfigError("SpatialSignature: start outside ring");
    }

    friend bool operator==(const SpatialSignature&, const SpatialSignature&) = default;
};

struct ConcentrationSet {
    std::vector<std::size_t> indices;
    double power_fraction = 0.0;  // requested eta
    double captured = 0.0;        // achieved fraction of total power

    std::size_t cardinality() const { return indices.size(); }
};

namespace detail {

inline void check_shift(std::size_t m, double shift) {
    const double limit = pi / static_cast<double>(m);
    if (!(std::abs(shift) <= limit * (1.0 + 1e-12))) throw DomainError("shift outside [-pi/M, pi/M]");
}

inline CVector rotate(std::span<const cplx> h, double shift) {
    CVector out(h.size());
    for (std::size_t m = 0; m < h.size(); ++m) out[m] = h[m] * std::polar(1.0, shift * static_cast<double>(m));
    return out;
}

inline std::vector<double> powers(std::span<const cplx> v) {
    std::vector<double> p(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) p[i] = abs2(v[i]);
    return p;
}

/// Prefix sums of p over two laps of the ring: window [s, s+w) sums to pre[s+w] - pre[s].
inline std::vector<double> ring_prefix(std::span<const double> p) {
    const std::size_t m = p.size();
    std::vector<double> pre(2 * m + 1, 0.0);
    for (std::size_t i = 0; i < 2 * m; ++i) pre[i + 1] = pre[i] + p[i % m];
    return pre;
}

struct WindowPick {
    std::size_t start = 0;
    double power = -1.0;
};

/// Best circular window of length w; ties go to the smallest start.
inline WindowPick best_window(std::span<const double> pre, std::size_t m, std::size_t w) {
    WindowPick best;
    for (std::size_t s = 0; s < m; ++s) {
        const double v = pre[s + w] - pre[s];
        if (v > best.power) best = {s, v};
    }
    return best;
}

}  // namespace detail

inline BeamspaceVector to_beamspace(std::span<const cplx> h, double shift) {
    const std::size_t m = h.size();
    if (m == 0) throw ConfigError("to_beamspace: empty vector");
    detail::check_shift(m, shift);
    BeamspaceVector out{detail::rotate(h, shift), shift};
    fft_plan(m).forward(out.entries);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (auto& z : out.entries) z *= scale;
    return out;
}

inline BeamspaceVector to_beamspace(const ChannelVector& h, double shift) { return to_beamspace(h.view(), shift); }

/// Phi(shift)^H F^H applied to beamspace entries.
inline ChannelVector from_beamspace(std::span<const cplx> beams, double shift, LinkDirection link = LinkDirection::uplink) {
    const std::size_t m = beams.size();
    if (m == 0) throw ConfigError("from_beamspace: empty vector");
    detail::check_shift(m, shift);
    ChannelVector out{CVector(beams.begin(), beams.end()), link};
    fft_plan(m).inverse(out.entries);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (std::size_t i = 0; i < m; ++i) out.entries[i] *= scale * std::polar(1.0, -shift * static_cast<double>(i));
    return out;
}

inline ChannelVector from_beamspace(const BeamspaceVector& b, LinkDirection link = LinkDirection::uplink) {
    return from_beamspace(b.entries, b.shift, link);
}

/// [F Phi(shift) h]_B for the signature window B only, via the pruned transform.
inline CVector partial_beamspace(std::span<const cplx> h, double shift, const SpatialSignature& window) {
    window.validate();
    if (window.ring != h.size()) throw ConfigError("partial_beamspace: window ring differs from array size");
    detail::check_shift(h.size(), shift);
    CVector out = partial_dft(detail::rotate(h, shift), window.start, window.width);
    const double scale = 1.0 / std::sqrt(static_cast<double>(h.size()));
    for (auto& z : out) z *= scale;
    return out;
}

/// Embeds tau coefficients on window B into an otherwise zero M-vector and maps
/// back to the antenna domain: Phi(shift)^H [F^H]_{:,B} c.
inline ChannelVector expand_from_window(std::span<const cplx> coeffs, const SpatialSignature& sig,
                                        LinkDirection link = LinkDirection::uplink) {
    sig.validate();
    if (coeffs.size() != sig.width) throw ConfigError("expand_from_window: coefficient count differs from window width");
    CVector full(sig.ring, cplx{0.0, 0.0});
    for (std::size_t r = 0; r < sig.width; ++r) full[sig.bin(r)] = coeffs[r];
    return from_beamspace(full, sig.shift, link);
}

// ---- power concentration -------------------------------------------------

/// Smallest index set holding at least eta of the total power. Greedy in
/// descending power order, which is optimal for unconstrained selection.
inline ConcentrationSet min_concentration_set(const BeamspaceVector& beams, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw DomainError("min_concentration_set: eta must lie in (0, 1)");
    const auto p = detail::powers(beams.entries);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    ConcentrationSet out;
    out.power_fraction = eta;
    if (total <= 0.0) return out;
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    double acc = 0.0;
    for (std::size_t q : order) {
        out.indices.push_back(q);
        acc += p[q];
        if (acc >= eta * total * (1.0 - 1e-12)) break;
    }
    std::sort(out.indices.begin(), out.indices.end());
    out.captured = acc / total;
    return out;
}

/// Smallest contiguous circular window holding at least eta of the total power.
inline ConcentrationSet min_contiguous_set(const BeamspaceVector& beams, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw DomainError("min_contiguous_set: eta must lie in (0, 1)");
    const auto p = detail::powers(beams.entries);
    const std::size_t m = p.size();
    const auto pre = detail::ring_prefix(p);
    const double total = pre[m];
    ConcentrationSet out;
    out.power_fraction = eta;
    if (total <= 0.0) return out;
    const double target = eta * total * (1.0 - 1e-12);
    // max window power is nondecreasing in width, so bisect on the width
    std::size_t lo = 1, hi = m;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (detail::best_window(pre, m, mid).power >= target)
            hi = mid;
        else
            lo = mid + 1;
    }
    const auto pick = detail::best_window(pre, m, lo);
    for (std::size_t r = 0; r < lo; ++r) out.indices.push_back((pick.start + r) % m);
    out.captured = pick.power / total;
    return out;
}

/// ceil(2 M (d/lambda) |cos(mean)| spread + 1) + c_max. Uses the uplink spacing.
inline std::size_t leakage_bound(const ArrayConfig& cfg, const UserProfile& profile, std::size_t c_max) {
    cfg.validate();
    if (profile.angular_spread < 0.0) throw ConfigError("leakage_bound: negative angular spread");
    const double spread_bins = 2.0 * static_cast<double>(cfg.num_antennas) * cfg.spacing_ul *
                               std::abs(std::cos(profile.mean_doa)) * profile.angular_spread;
    return static_cast<std::size_t>(std::ceil(spread_bins + 1.0 - 1e-9)) + c_max;
}

/// Range form: ceil(M (d/lambda) sin(mean + spread)) - floor(M (d/lambda) sin(mean - spread)) + 1 + c_max.
inline std::size_t leakage_range_bound(const ArrayConfig& cfg, const UserProfile& profile, std::size_t c_max) {
    cfg.validate();
    if (profile.angular_spread < 0.0) throw ConfigError("leakage_range_bound: negative angular spread");
    const double scale = static_cast<double>(cfg.num_antennas) * cfg.spacing_ul;
    const double hi = std::ceil(scale * std::sin(profile.mean_doa + profile.angular_spread) - 1e-9);
    const double lo = std::floor(scale * std::sin(profile.mean_doa - profile.angular_spread) + 1e-9);
    return static_cast<std::size_t>(hi - lo + 1.0) + c_max;
}

enum class ConcentrationRule { greedy, contiguous };

struct OfflineEntry {
    double angle = 0.0;  // radians
    std::size_t cardinality = 0;
};

/// Cardinality of the eta-power set for a single unit-gain ray at each grid angle.
inline std::vector<OfflineEntry> build_offline_table(const ArrayConfig& cfg, double eta, std::span<const double> angles,
                                                     ConcentrationRule rule = ConcentrationRule::greedy) {
    std::vector<OfflineEntry> table;
    table.reserve(angles.size());
    for (double a : angles) {
        const auto beams = to_beamspace(steering_vector(cfg, a, LinkDirection::uplink), 0.0);
        const auto set = rule == ConcentrationRule::greedy ? min_concentration_set(beams, eta) : min_contiguous_set(beams, eta);
        table.push_back({a, set.cardinality()});
    }
    return table;
}

/// C_max over [lo, hi] sampled at `samples` uniformly spaced angles (inclusive).
inline std::size_t max_cardinality_over(const ArrayConfig& cfg, double eta, double lo, double hi, std::size_t samples = 2001) {
    if (samples < 2) samples = 2;
    std::vector<double> grid(samples);
    for (std::size_t i = 0; i < samples; ++i) grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1);
    std::size_t best = 0;
    for (const auto& e : build_offline_table(cfg, eta, grid)) best = std::max(best, e.cardinality);
    return best;
}

inline void write_offline_table_csv(std::ostream& os, std::span<const OfflineEntry> table) {
    os << "angle_deg,C_k\n";
    for (const auto& e : table) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", rad2deg(e.angle));
        os << buf << ',' << e.cardinality << '\n';
    }
}

// ---- spatial signatures --------------------------------------------------

/// Uniform grid over [-pi/M, pi/M]; a single point means "no rotation" (shift 0).
inline std::vector<double> shift_grid(std::size_t m, std::size_t points) {
    if (points == 0) throw ConfigError("shift_grid: need at least one point");
    if (points == 1) return {0.0};
    const double lim = pi / static_cast<double>(m);
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = -lim + 2.0 * lim * static_cast<double>(i) / static_cast<double>(points - 1);
    g[points - 1] = lim;
    return g;
}

namespace detail {

/// True when `grid` is the uniform grid shift_grid(m, points) with points - 1 a
/// power of two, so every rotation phase is an entry of one N = (points - 1) M
/// root table.
inline bool table_grid(std::size_t m, std::span<const double> grid) {
    if (grid.size() < 3 || !is_power_of_two(grid.size() - 1) || !is_power_of_two(m)) return false;
    const auto ref = shift_grid(m, grid.size());
    const double tol = 1e-12 * pi / static_cast<double>(m);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::abs(ref[i] - grid[i]) > tol) return false;
    return true;
}

/// |[F Phi(grid[i]) h]_q|^2 for every grid point i and bin q, row-major (i, q).
inline std::vector<double> rotated_powers(std::span<const cplx> h, std::span<const double> grid) {
    const std::size_t m = h.size();
    std::vector<double> out(grid.size() * m);
    const Fft& fft = fft_plan(m);
    const double scale = 1.0 / static_cast<double>(m);
    CVector buf(m);
    const bool tabled = table_grid(m, grid);
    const std::size_t s = grid.size() - 1;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (tabled) {
            // e^{j grid[i] m} = e^{-j 2 pi (s/2 - i) m / N}
            const Fft& roots = fft_plan(s * m);
            const std::size_t n = s * m;
            const std::size_t step = (s / 2 + n - i) % n;
            for (std::size_t k = 0; k < m; ++k) buf[k] = cmul(h[k], roots.root(step * k));
        } else {
            check_shift(m, grid[i]);
            buf = rotate(h, grid[i]);
        }
        fft.forward(buf);
        for (std::size_t q = 0; q < m; ++q) out[i * m + q] = abs2(buf[q]) * scale;
    }
    return out;
}

}  // namespace detail

/// Beam powers of one channel under every shift of a grid.
struct RotatedSpectrum {
    std::vector<double> power;  // row-major (shift, bin)
    std::size_t bins = 0;
    double energy = 0.0;        // ||h||^2
};

inline RotatedSpectrum rotated_spectrum(std::span<const cplx> h, std::span<const double> grid) {
    if (h.empty()) throw ConfigError("rotated_spectrum: empty vector");
    if (grid.empty()) throw ConfigError("rotated_spectrum: empty shift grid");
    return {detail::rotated_powers(h, grid), h.size(), norm2(h)};
}

/// Maximizes sum_k w_k ||[F Phi(shift) h_k]_B||^2 over the shift grid and all
/// circular windows of length `width`, with w_k = 1/||h_k||^2 when `normalize`
/// is set and 1 otherwise. Ties (within 1e-12 relative) go to the first shift
/// in grid order, then the smallest start.
inline SpatialSignature find_common_signature(std::span<const RotatedSpectrum* const> spectra, std::size_t width,
                                              std::span<const double> grid, bool normalize = true) {
    if (spectra.empty()) throw ConfigError("find_common_signature: no channels");
    if (grid.empty()) throw ConfigError("find_common_signature: empty shift grid");
    const std::size_t m = spectra.front()->bins;
    if (width == 0 || width > m) throw DomainError("find_signature: width must lie in [1, M]");
    for (const auto* sp : spectra)
        if (sp->bins != m || sp->power.size() != grid.size() * m) throw ConfigError("find_common_signature: spectrum sizes differ");

    std::vector<double> agg(grid.size() * m, 0.0);
    for (const auto* sp : spectra) {
        const double w = normalize ? 1.0 / std::max(sp->energy, 1e-300) : 1.0;
        for (std::size_t i = 0; i < agg.size(); ++i) agg[i] += w * sp->power[i];
    }

    // grid order decides ties, so an ascending grid yields the smallest shift
    SpatialSignature best{0, width, grid.front(), m};
    double best_power = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto pre = detail::ring_prefix(std::span<const double>(agg).subspan(i * m, m));
        const auto pick = detail::best_window(pre, m, width);
        if (pick.power > best_power * (1.0 + 1e-12)) {
            best_power = pick.power;
            best = {pick.start, width, grid[i], m};
        }
    }
    return best;
}

inline SpatialSignature find_common_signature(std::span<const CVector> channels, std::size_t width,
                                              std::span<const double> grid, bool normalize = true) {
    if (channels.empty()) throw ConfigError("find_common_signature: no channels");
    std::vector<RotatedSpectrum> spectra;
    std::vector<const RotatedSpectrum*> ptr;
    spectra.reserve(channels.size());
    for (const auto& h : channels) {
        if (h.size() != channels.front().size()) throw ConfigError("find_common_signature: channel sizes differ");
        spectra.push_back(rotated_spectrum(h, grid));
    }
    for (const auto& sp : spectra) ptr.push_back(&sp);
    return find_common_signature(ptr, width, grid, normalize);
}

inline SpatialSignature find_signature(const RotatedSpectrum& spectrum, std::size_t width, std::span<const double> grid) {
    const RotatedSpectrum* p = &spectrum;
    return find_common_signature(std::span<const RotatedSpectrum* const>(&p, 1), width, grid, false);
}

inline SpatialSignature find_signature(std::span<const cplx> h, std::size_t width, std::span<const double> grid) {
    const CVector copy(h.begin(), h.end());
    return find_common_signature(std::span<const CVector>(&copy, 1), width, grid, false);
}

inline SpatialSignature find_signature(std::span<const cplx> h, std::size_t width, std::size_t shift_grid_size = 129) {
    const auto grid = shift_grid(h.size(), shift_grid_size);
    return find_signature(h, width, grid);
}

inline SpatialSignature find_signature(const ChannelVector& h, std::size_t width, std::size_t shift_grid_size = 129) {
    return find_signature(h.view(), width, shift_grid_size);
}

/// Fraction of ||h||^2 captured by the signature window.
inline double captured_fraction(std::span<const cplx> h, const SpatialSignature& sig) {
    const double total = norm2(h);
    if (total <= 0.0) return 0.0;
    return norm2(partial_beamspace(h, sig.shift, sig)) / total;
}

struct RotatedConcentration {
    double shift = 0.0;
    ConcentrationSet set;
};

/// Shift on the grid minimizing the contiguous eta-power window. Ties: larger
/// captured power, then smaller shift.
inline RotatedConcentration min_rotated_contiguous_set(std::span<const cplx> h, double eta, std::span<const double> grid) {
    RotatedConcentration best;
    bool first = true;
    for (double shift : grid) {
        auto set = min_contiguous_set(to_beamspace(h, shift), eta);
        const bool better = first || set.cardinality() < best.set.cardinality() ||
                            (set.cardinality() == best.set.cardinality() && set.captured > best.set.captured);
        if (better) {
            best = {shift, std::move(set)};
            first = false;
        }
    }
    return best;
}

// ---- window geometry -------------------------------------------------------

inline bool windows_overlap(const SpatialSignature& a, const SpatialSignature& b) {
    if (a.ring != b.ring) throw ConfigError("windows_overlap: ring sizes differ");
    const std::size_t m = a.ring;
    return (b.start + m - a.start) % m < a.width || (a.start + m - b.start) % m < b.width;
}

/// min |b1 - b2| over the two windows, measured around the ring; 0 on overlap.
inline std::size_t window_distance(const SpatialSignature& a, const SpatialSignature& b) {
    if (windows_overlap(a, b)) return 0;
    const std::size_t m = a.ring;
    const std::size_t a_to_b = (b.start + m - a.last()) % m;
    const std::size_t b_to_a = (a.start + m - b.last()) % m;
    return std::min(a_to_b, b_to_a);
}

/// Co-grouping predicate: disjoint windows at least `guard` apart.
inline bool compatible(const SpatialSignature& a, const SpatialSignature& b, std::size_t guard) {
    return !windows_overlap(a, b) && window_distance(a, b) >= guard;
}

// ---- angle reciprocity -----------------------------------------------------

namespace detail {

/// Index on the ring mapped to a signed spatial frequency in [-M/2, M/2).
inline long long signed_bin(std::size_t q, std::size_t m) {
    return q < (m + 1) / 2 ? static_cast<long long>(q) : static_cast<long long>(q) - static_cast<long long>(m);
}

}  // namespace detail

/// Moves `shift` into [-pi/M, pi/M] by whole 2 pi / M steps, sliding the window
/// so that [F Phi(shift) x]_B is unchanged.
inline SpatialSignature canonicalize_shift(SpatialSignature sig) {
    const double step = 2.0 * pi / static_cast<double>(sig.ring);
    const double lim = pi / static_cast<double>(sig.ring);
    while (sig.shift > lim * (1.0 + 1e-12)) {
        sig.shift -= step;
        sig.start = (sig.start + sig.ring - 1) % sig.ring;
    }
    while (sig.shift < -lim * (1.0 + 1e-12)) {
        sig.shift += step;
        sig.start = (sig.start + 1) % sig.ring;
    }
    return sig;
}

/// Downlink window predicted from the uplink one:
///   q'_min = floor(r q_min), q'_max = ceil(r q_max), shift' = r shift,
/// with r = lambda1 / lambda2. The window keeps its natural width.
inline SpatialSignature reciprocal_signature(const SpatialSignature& ul, const ArrayConfig& cfg) {
    ul.validate();
    cfg.validate();
    if (ul.ring != cfg.num_antennas) throw ConfigError("reciprocal_signature: ring differs from array size");
    const double r = cfg.carrier_ratio();
    const std::size_t m = ul.ring;
    const long long lo = detail::signed_bin(ul.start, m);
    const long long hi = lo + static_cast<long long>(ul.width) - 1;
    const auto q_min = static_cast<long long>(std::floor(r * static_cast<double>(lo) + 1e-9));
    const auto q_max = static_cast<long long>(std::ceil(r * static_cast<double>(hi) - 1e-9));
    const long long width = q_max - q_min + 1;
    if (width < 1 || width > static_cast<long long>(m)) throw DomainError("reciprocal_signature: mapped window does not fit on the ring");
    SpatialSignature dl{circular_mod(q_min, m), static_cast<std::size_t>(width), r * ul.shift, m};
    return canonicalize_shift(dl);
}

/// Trims (or grows) a window to `width` bins, dropping (adding) the edge bin
/// with the lower (higher) power in `power`.
inline SpatialSignature fit_window(SpatialSignature sig, std::size_t width, std::span<const double> power) {
    sig.validate();
    if (power.size() != sig.ring) throw ConfigError("fit_window: power profile size differs from ring");
    if (width == 0 || width > sig.ring) throw ConfigError("fit_window: width must lie in [1, ring]");
    const std::size_t m = sig.ring;
    while (sig.width > width) {
        if (power[sig.start] < power[sig.last()]) sig.start = (sig.start + 1) % m;
        --sig.width;
    }
    while (sig.width < width) {
        const std::size_t left = (sig.start + m - 1) % m;
        const std::size_t right = (sig.last() + 1) % m;
        if (power[left] > power[right]) sig.start = left;
        ++sig.width;
    }
    return sig;
}

}  // namespace sbem

#endif  // SBEM_BEAMSPACE_HPP
