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


// Walks one coherence block through the library: channels, preamble,
// signatures, grouped uplink training, downlink training, scheduling.

#include <sbem.hpp>

#include <cstdio>

int main() {
    using namespace sbem;

    ArrayConfig array;  // M = 128, half-wavelength spacing
    const std::size_t tau = 16, guard = 4, pilot_len = 32;
    const double rho = db2lin(10.0);

    Rng rng(2024);
    std::vector<ChannelVector> ul, dl;
    for (double mean : {-48.59, -14.48, 14.48, 48.59})
        for (int u = 0; u < 8; ++u) {
            auto pair = generate_channel_pair(array, {deg2rad(mean), deg2rad(2.0), 100}, rng, false);
            ul.push_back(std::move(pair.uplink));
            dl.push_back(std::move(pair.downlink));
        }

    const PilotSet pilots = make_pilots(tau, pilot_len, rho);
    const UplinkTrainingConfig ucfg{tau, guard, pilot_len * rho, {}, 1.0};
    const auto preamble = run_preamble(ul, pilots, ucfg, rng);

    std::vector<SpatialSignature> sigs;
    for (const auto& h : preamble) sigs.push_back(find_signature(h, tau));
    const auto groups = rebalance_groups(group_users(sigs, guard), tau);
    std::printf("uplink groups: %zu\n", groups.size());

    std::vector<ChannelVector> ul_est;
    for (auto& e : uplink_train(ul, groups, sigs, pilots, ucfg, rng)) ul_est.push_back(std::move(e.channel));
    std::printf("uplink NMSE:   %.2f dB\n", lin2db(nmse(ul, ul_est)));

    std::vector<CVector> pre;
    for (const auto& h : preamble) pre.push_back(h.entries);
    const auto grid = shift_grid(array.num_antennas, 129);
    const auto plan = plan_downlink(pre, sigs, array, tau, guard, grid);
    const DownlinkTrainingConfig dcfg{tau, guard, pilot_len * rho, {}, 1.0};
    const auto reports = downlink_train(dl, plan.assignment, plan.signatures, pilots, dcfg, rng);
    std::vector<ChannelVector> dl_est;
    for (std::size_t k = 0; k < reports.size(); ++k) dl_est.push_back(reconstruct_downlink(reports[k], plan.signatures[k]));
    std::printf("downlink groups: %zu (%zu streams)\n", plan.assignment.size(), plan.streams);
    std::printf("downlink NMSE: %.2f dB\n", lin2db(nmse(dl, dl_est)));

    std::vector<double> gains;
    for (const auto& g : dl_est) gains.push_back(norm2(g.entries));
    const auto sched = schedule_users(plan.signatures, gains, rho / array.num_antennas, guard);
    std::printf("data groups: %zu, mean group rate %.2f bit/s/Hz\n", sched.group_count(), mean_of(sched.rates));
    std::printf("AASR at T = 128: %.2f bit/s/Hz\n", compute_aasr(sched.rates, 128, plan.assignment.size() * pilot_len));
    return 0;
}
