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


#ifndef SBEM_IO_HPP
#define SBEM_IO_HPP

#include <sbem/experiment.hpp>

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace sbem {

using json = nlohmann::json;

enum class OutputFormat { csv, json };

inline OutputFormat parse_format(std::string_view name) {
    if (name == "csv") return OutputFormat::csv;
    if (name == "json") return OutputFormat::json;
    throw ConfigError("unknown output format '" + std::string(name) + "' (expected csv or json)");
}

// ---- configuration ------------------------------------------------------------

namespace detail {

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& obj, const char* key, T& dst, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace detail

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {}) {
    using detail::read;
    detail::check_keys(j, "config", {"experiment", "array", "population", "channel_model", "reciprocal_gains", "noiseless",
                                     "training", "snr_db", "coherence", "coherence_list", "rotation", "trials", "seed", "threads",
                                     "table1", "ablation", "data", "ber"});
    ExperimentConfig c = std::move(base);
    if (j.contains("experiment")) c.kind = parse_kind(j.at("experiment").get<std::string>());
    if (j.contains("array")) {
        const auto& a = j.at("array");
        detail::check_keys(a, "array", {"antennas", "spacing_ul", "spacing_dl"});
        read(a, "antennas", c.array.num_antennas, "array");
        read(a, "spacing_ul", c.array.spacing_ul, "array");
        read(a, "spacing_dl", c.array.spacing_dl, "array");
    }
    if (j.contains("population")) {
        const auto& p = j.at("population");
        detail::check_keys(p, "population", {"cluster_means_deg", "users_per_cluster", "angular_spread_deg", "rays"});
        read(p, "cluster_means_deg", c.population.cluster_means_deg, "population");
        read(p, "users_per_cluster", c.population.users_per_cluster, "population");
        read(p, "angular_spread_deg", c.population.spread_deg, "population");
        read(p, "rays", c.population.num_rays, "population");
    }
    if (j.contains("channel_model")) {
        const auto m = j.at("channel_model").get<std::string>();
        if (m == "one_ring") c.channel_model = ChannelModel::one_ring;
        else if (m == "signature_supported") c.channel_model = ChannelModel::signature_supported;
        else throw ConfigError("channel_model: unknown model '" + m + "'");
    }
    read(j, "reciprocal_gains", c.reciprocal_gains, "config");
    read(j, "noiseless", c.noiseless, "config");
    if (j.contains("training")) {
        const auto& t = j.at("training");
        detail::check_keys(t, "training", {"tau", "guard", "pilot_len", "pilot_lengths", "tau_list", "ls_pilot_len", "pilot_family"});
        read(t, "tau", c.tau, "training");
        if (t.contains("guard")) {
            if (t.at("guard").is_null()) c.guard.reset();
            else c.guard = t.at("guard").get<std::size_t>();
        }
        read(t, "pilot_len", c.pilot_len, "training");
        read(t, "pilot_lengths", c.pilot_lengths, "training");
        read(t, "tau_list", c.tau_list, "training");
        read(t, "ls_pilot_len", c.ls_pilot_len, "training");
        if (t.contains("pilot_family")) {
            const auto f = t.at("pilot_family").get<std::string>();
            if (f == "dft") c.pilot_family = PilotFamily::dft;
            else if (f == "hadamard") c.pilot_family = PilotFamily::hadamard;
            else throw ConfigError("training.pilot_family: unknown family '" + f + "'");
        }
    }
    read(j, "snr_db", c.snr_db, "config");
    read(j, "coherence", c.coherence, "config");
    read(j, "coherence_list", c.coherence_list, "config");
    if (j.contains("rotation")) {
        const auto& r = j.at("rotation");
        detail::check_keys(r, "rotation", {"enabled", "grid_points"});
        read(r, "enabled", c.rotation, "rotation");
        read(r, "grid_points", c.shift_grid_points, "rotation");
    }
    read(j, "trials", c.trials, "config");
    read(j, "seed", c.seed, "config");
    read(j, "threads", c.threads, "config");
    if (j.contains("table1")) {
        const auto& t = j.at("table1");
        detail::check_keys(t, "table1", {"eta", "angles_deg"});
        read(t, "eta", c.table_eta, "table1");
        read(t, "angles_deg", c.table_angles_deg, "table1");
    }
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        detail::check_keys(a, "ablation", {"angle_deg", "spread_deg", "eta", "rays"});
        read(a, "angle_deg", c.ablation_angle_deg, "ablation");
        read(a, "spread_deg", c.ablation_spread_deg, "ablation");
        read(a, "eta", c.ablation_eta, "ablation");
        read(a, "rays", c.ablation_rays, "ablation");
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::check_keys(d, "data", {"budget"});
        if (d.contains("budget")) {
            const auto b = d.at("budget").get<std::string>();
            if (b == "per_antenna") c.data_budget = DataBudget::per_antenna;
            else if (b == "transmit") c.data_budget = DataBudget::transmit;
            else throw ConfigError("data.budget: unknown rule '" + b + "'");
        }
    }
    if (j.contains("ber")) {
        const auto& b = j.at("ber");
        detail::check_keys(b, "ber", {"min_symbols", "error_target", "max_trials", "symbols_per_trial"});
        read(b, "min_symbols", c.ber_min_symbols, "ber");
        read(b, "error_target", c.ber_error_target, "ber");
        read(b, "max_trials", c.ber_max_trials, "ber");
        read(b, "symbols_per_trial", c.ber_symbols_per_trial, "ber");
    }
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = to_string(c.kind);
    j["array"] = {{"antennas", c.array.num_antennas}, {"spacing_ul", c.array.spacing_ul}, {"spacing_dl", c.array.spacing_dl}};
    j["population"] = {{"cluster_means_deg", c.population.cluster_means_deg},
                       {"users_per_cluster", c.population.users_per_cluster},
                       {"angular_spread_deg", c.population.spread_deg},
                       {"rays", c.population.num_rays}};
    j["channel_model"] = c.channel_model == ChannelModel::one_ring ? "one_ring" : "signature_supported";
    j["reciprocal_gains"] = c.reciprocal_gains;
    j["noiseless"] = c.noiseless;
    j["training"] = {{"tau", c.tau},
                     {"guard", c.guard ? json(*c.guard) : json(nullptr)},
                     {"pilot_len", c.pilot_len},
                     {"pilot_lengths", c.pilot_lengths},
                     {"tau_list", c.tau_list},
                     {"ls_pilot_len", c.ls_pilot_len},
                     {"pilot_family", c.pilot_family == PilotFamily::dft ? "dft" : "hadamard"}};
    j["snr_db"] = c.snr_db;
    j["coherence"] = c.coherence;
    j["coherence_list"] = c.coherence_list;
    j["rotation"] = {{"enabled", c.rotation}, {"grid_points", c.shift_grid_points}};
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["table1"] = {{"eta", c.table_eta}, {"angles_deg", c.table_angles_deg}};
    j["ablation"] = {{"angle_deg", c.ablation_angle_deg}, {"spread_deg", c.ablation_spread_deg}, {"eta", c.ablation_eta}, {"rays", c.ablation_rays}};
    j["data"] = {{"budget", c.data_budget == DataBudget::per_antenna ? "per_antenna" : "transmit"}};
    j["ber"] = {{"min_symbols", c.ber_min_symbols},
                {"error_target", c.ber_error_target},
                {"max_trials", c.ber_max_trials},
                {"symbols_per_trial", c.ber_symbols_per_trial}};
    return j;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    return config_from_json(j, std::move(base));
}

// ---- results ------------------------------------------------------------------

inline constexpr const char* csv_header = "experiment,sweep_name,sweep_value,metric,value,trials,seed";

namespace detail {

inline void check_record(const MetricRecord& r) {
    for (const auto* s : {&r.experiment, &r.sweep_name, &r.metric})
        if (s->find_first_of(",\"\n\r") != std::string::npos) throw ConfigError("record field '" + *s + "' contains a CSV delimiter");
    if (!std::isfinite(r.value) || !std::isfinite(r.sweep_value)) throw DomainError("record '" + r.metric + "' has a non-finite value");
}

}  // namespace detail

inline void write_csv(std::ostream& os, std::span<const MetricRecord> records) {
    os << csv_header << '\n';
    for (const auto& r : records) {
        detail::check_record(r);
        os << r.experiment << ',' << r.sweep_name << ',' << detail::fmt_double(r.sweep_value) << ',' << r.metric << ','
           << detail::fmt_double(r.value) << ',' << r.trials << ',' << r.seed << '\n';
    }
}

inline std::vector<MetricRecord> parse_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != csv_header) throw ConfigError("parse_csv: missing or unexpected header");
    std::vector<MetricRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 7) throw ConfigError("parse_csv: expected 7 fields in '" + line + "'");
        try {
            out.push_back({f[0], f[1], std::stod(f[2]), f[3], std::stod(f[4]), static_cast<std::size_t>(std::stoull(f[5])), std::stoull(f[6])});
        } catch (const std::logic_error&) {
            throw ConfigError("parse_csv: malformed number in '" + line + "'");
        }
    }
    return out;
}

inline json records_to_json(std::span<const MetricRecord> records) {
    json arr = json::array();
    for (const auto& r : records) {
        detail::check_record(r);
        arr.push_back({{"experiment", r.experiment},
                       {"sweep_name", r.sweep_name},
                       {"sweep_value", r.sweep_value},
                       {"metric", r.metric},
                       {"value", r.value},
                       {"trials", r.trials},
                       {"seed", r.seed}});
    }
    return arr;
}

/// Output metadata: the resolved configuration plus modelling notes.
inline json result_metadata(const ExperimentConfig& cfg) {
    return {{"config", config_to_json(cfg)},
            {"notes",
             {{"nmse", "per-trial sum over users of ||h - h_hat||^2 / ||h||^2, averaged over trials"},
              {"snr", "rho = sigma_p^2 / sigma_n^2 with sigma_n^2 = 1; training energy L * rho per user and per downlink stream"},
              {"data_power", "group budget grows by one per-user increment per admitted user (rho, or rho / M with budget per_antenna)"},
              {"ls_downlink", "M x M DFT training with total energy K L rho"}}}};
}

inline void write_json(std::ostream& os, std::span<const MetricRecord> records, const json& metadata) {
    json j{{"metadata", metadata}, {"records", records_to_json(records)}};
    os << j.dump(2) << '\n';
}

inline std::vector<MetricRecord> parse_json(std::istream& is) {
    json j;
    try {
        is >> j;
        std::vector<MetricRecord> out;
        for (const auto& r : j.at("records"))
            out.push_back({r.at("experiment").get<std::string>(), r.at("sweep_name").get<std::string>(), r.at("sweep_value").get<double>(),
                           r.at("metric").get<std::string>(), r.at("value").get<double>(), r.at("trials").get<std::size_t>(),
                           r.at("seed").get<std::uint64_t>()});
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("parse_json: ") + e.what());
    }
}

/// Writes the records to `path`; I/O failures name the path.
inline void emit_results(std::span<const MetricRecord> records, OutputFormat format, const std::string& path, const json& metadata = json::object()) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    if (format == OutputFormat::csv)
        write_csv(out, records);
    else
        write_json(out, records, metadata);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace sbem

#endif  // SBEM_IO_HPP
