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


#ifndef SBEM_ARRAY_CHANNEL_HPP
#define SBEM_ARRAY_CHANNEL_HPP

#include <sbem/common.hpp>

namespace sbem {

/// Uniform linear array. Spacings are normalized by the uplink (lambda1) and
/// downlink (lambda2) carrier wavelengths.
struct ArrayConfig {
    std::size_t num_antennas = 128;
    double spacing_ul = 0.5;  // d / lambda1
    double spacing_dl = 0.5;  // d / lambda2

    void validate() const {
        if (num_antennas < 2) throw ConfigError("ArrayConfig: need at least 2 antennas");
        if (!(spacing_ul > 0.0 && spacing_ul <= 1.0) || !(spacing_dl > 0.0 && spacing_dl <= 1.0))
            throw ConfigError("ArrayConfig: spacing ratios must lie in (0, 1]");
    }

    double spacing(LinkDirection link) const { return link == LinkDirection::uplink ? spacing_ul : spacing_dl; }

    /// lambda1 / lambda2
    double carrier_ratio() const { return spacing_dl / spacing_ul; }
};

/// One-ring user: P rays spread uniformly over [mean - spread, mean + spread].
struct UserProfile {
    double mean_doa = 0.0;        // radians
    double angular_spread = 0.0;  // radians, half-width
    std::size_t num_rays = 1;

    void validate() const {
        if (num_rays == 0) throw ConfigError("UserProfile: need at least one ray");
        if (angular_spread < 0.0) throw ConfigError("UserProfile: negative angular spread");
        if (mean_doa - angular_spread <= -pi / 2 || mean_doa + angular_spread >= pi / 2)
            throw DomainError("UserProfile: angular range must lie inside (-pi/2, pi/2)");
    }
};

struct ChannelVector {
    CVector entries;
    LinkDirection link = LinkDirection::uplink;

    std::size_t size() const { return entries.size(); }
    std::span<const cplx> view() const { return entries; }
};

/// a(theta)[m] = exp(j 2 pi (d/lambda) m sin(theta)), wavelength chosen by `link`.
inline ChannelVector steering_vector(const ArrayConfig& cfg, double angle, LinkDirection link) {
    cfg.validate();
    if (!(angle > -pi / 2 && angle < pi / 2)) throw DomainError("steering_vector: angle outside (-pi/2, pi/2)");
    const double step = 2.0 * pi * cfg.spacing(link) * std::sin(angle);
    ChannelVector out{CVector(cfg.num_antennas), link};
    for (std::size_t m = 0; m < cfg.num_antennas; ++m) out.entries[m] = std::polar(1.0, step * static_cast<double>(m));
    return out;
}

struct RaySet {
    std::vector<double> angles;
    CVector gains;
};

/// Ray angles uniform on the profile's angular range, gains CN(0, 1).
inline RaySet draw_rays(const UserProfile& profile, Rng& rng) {
    profile.validate();
    RaySet rays;
    rays.angles.resize(profile.num_rays);
    rays.gains.resize(profile.num_rays);
    std::uniform_real_distribution<double> u(profile.mean_doa - profile.angular_spread,
                                             profile.mean_doa + profile.angular_spread);
    for (std::size_t p = 0; p < profile.num_rays; ++p) {
        rays.angles[p] = profile.angular_spread > 0.0 ? u(rng) : profile.mean_doa;
        rays.gains[p] = complex_gaussian(rng);
    }
    return rays;
}

/// (1/sqrt(P)) sum_p gain_p a(angle_p)
inline ChannelVector synthesize(const ArrayConfig& cfg, const RaySet& rays, LinkDirection link) {
    cfg.validate();
    if (rays.angles.size() != rays.gains.size() || rays.angles.empty())
        throw ConfigError("synthesize: malformed ray set");
    const std::size_t m_count = cfg.num_antennas;
    ChannelVector h{CVector(m_count, cplx{0.0, 0.0}), link};
    const double scale = 1.0 / std::sqrt(static_cast<double>(rays.angles.size()));
    for (std::size_t p = 0; p < rays.angles.size(); ++p) {
        const double step = 2.0 * pi * cfg.spacing(link) * std::sin(rays.angles[p]);
        // phasor recurrence, re-anchored every 32 antennas to bound round-off drift
        const cplx rot = std::polar(1.0, step);
        cplx ph = rays.gains[p] * scale;
        for (std::size_t m = 0; m < m_count; ++m) {
            if (m % 32 == 0) ph = rays.gains[p] * scale * std::polar(1.0, step * static_cast<double>(m));
            h.entries[m] += ph;
            ph = cmul(ph, rot);
        }
    }
    return h;
}

inline ChannelVector generate_channel(const ArrayConfig& cfg, const UserProfile& profile, Rng& rng,
                                      LinkDirection link) {
    return synthesize(cfg, draw_rays(profile, rng), link);
}

struct ChannelPair {
    ChannelVector uplink;
    ChannelVector downlink;
};

/// Uplink and downlink channels sharing the same ray angles (angle reciprocity).
/// With `reciprocal_gains` the downlink reuses the uplink gains (TDD); otherwise
/// the downlink gains are drawn independently (FDD).
inline ChannelPair generate_channel_pair(const ArrayConfig& cfg, const UserProfile& profile, Rng& rng,
                                         bool reciprocal_gains) {
    RaySet rays = draw_rays(profile, rng);
    ChannelPair pair;
    pair.uplink = synthesize(cfg, rays, LinkDirection::uplink);
    if (!reciprocal_gains)
        for (auto& g : rays.gains) g = complex_gaussian(rng);
    pair.downlink = synthesize(cfg, rays, LinkDirection::downlink);
    return pair;
}

}  // namespace sbem

#endif  // SBEM_ARRAY_CHANNEL_HPP
