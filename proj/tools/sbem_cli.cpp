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


// Command-line front end: one subcommand per experiment, CSV or JSON output.

#include <sbem.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> threads;
    std::string out = "-";
    std::string format = "csv";
    std::string snr_list;
    std::string tau;
    std::string pilot_len;
    std::string coherence;
    std::string link = "both";
};

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            if constexpr (std::is_floating_point_v<T>) {
                out.push_back(std::stod(item, &used));
            } else {
                if (item.find('-') != std::string::npos) throw std::invalid_argument("negative");
                out.push_back(static_cast<T>(std::stoull(item, &used)));
            }
            if (used != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::logic_error&) {
            throw sbem::ConfigError(std::string("--") + what + ": cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw sbem::ConfigError(std::string("--") + what + ": empty list");
    return out;
}

std::size_t single(const std::string& text, const char* what) {
    const auto v = parse_list<std::size_t>(text, what);
    if (v.size() != 1) throw sbem::ConfigError(std::string("--") + what + " takes a single value for this experiment");
    return v.front();
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "JSON configuration file");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--trials", o.trials, "Monte Carlo trials per sweep point");
    cmd->add_option("--threads", o.threads, "worker threads (0: all cores)");
    cmd->add_option("--out", o.out, "output path, '-' for stdout");
    cmd->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--snr-list", o.snr_list, "comma-separated SNR points in dB");
    cmd->add_option("--tau", o.tau, "signature size (comma list for tau-sweep)");
    cmd->add_option("--pilot-len", o.pilot_len, "pilot length L (comma list for mse)");
    cmd->add_option("--coherence", o.coherence, "coherence interval T (comma list for aasr)");
}

sbem::ExperimentConfig resolve(const Options& o, sbem::ExperimentKind kind) {
    sbem::ExperimentConfig cfg = o.config.empty() ? sbem::ExperimentConfig{} : sbem::load_config(o.config);
    cfg.kind = kind;
    if (o.seed) cfg.seed = *o.seed;
    if (o.trials) cfg.trials = *o.trials;
    if (o.threads) cfg.threads = *o.threads;
    if (!o.snr_list.empty()) cfg.snr_db = parse_list<double>(o.snr_list, "snr-list");
    if (!o.tau.empty()) {
        if (kind == sbem::ExperimentKind::tau_sweep) cfg.tau_list = parse_list<std::size_t>(o.tau, "tau");
        else cfg.tau = single(o.tau, "tau");
    }
    if (!o.pilot_len.empty()) {
        if (kind == sbem::ExperimentKind::ul_dl_mse) cfg.pilot_lengths = parse_list<std::size_t>(o.pilot_len, "pilot-len");
        else cfg.pilot_len = single(o.pilot_len, "pilot-len");
    }
    if (!o.coherence.empty()) {
        if (kind == sbem::ExperimentKind::aasr) cfg.coherence_list = parse_list<std::size_t>(o.coherence, "coherence");
        else cfg.coherence = single(o.coherence, "coherence");
    }
    cfg.validate();
    return cfg;
}

void emit(const Options& o, const std::vector<sbem::MetricRecord>& records, const sbem::ExperimentConfig& cfg) {
    const auto format = sbem::parse_format(o.format);
    const auto meta = sbem::result_metadata(cfg);
    if (o.out == "-") {
        if (format == sbem::OutputFormat::csv) sbem::write_csv(std::cout, records);
        else sbem::write_json(std::cout, records, meta);
        return;
    }
    sbem::emit_results(records, format, o.out, meta);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial basis expansion channel estimation experiments"};
    app.require_subcommand(1);
    Options o;

    struct Entry {
        const char* name;
        const char* help;
        sbem::ExperimentKind kind;
    };
    const Entry entries[] = {
        {"table1", "off-line table of leakage cardinalities C_k", sbem::ExperimentKind::table1},
        {"mse", "uplink and downlink NMSE versus SNR for several pilot lengths", sbem::ExperimentKind::ul_dl_mse},
        {"compare-ls", "NMSE against conventional LS (--link ul|dl|both)", sbem::ExperimentKind::vs_ls_ul},
        {"tau-sweep", "NMSE versus SNR for several signature sizes", sbem::ExperimentKind::tau_sweep},
        {"rotation-ablation", "contiguous leakage window with and without rotation", sbem::ExperimentKind::rotation_ablation},
        {"aasr", "average achievable sum rate versus SNR and coherence interval", sbem::ExperimentKind::aasr},
        {"ber", "QPSK bit error rate with perfect, SBEM and LS CSI", sbem::ExperimentKind::ber},
    };
    std::vector<std::pair<CLI::App*, const Entry*>> cmds;
    for (const auto& e : entries) {
        auto* cmd = app.add_subcommand(e.name, e.help);
        add_common(cmd, o);
        if (std::string_view(e.name) == "compare-ls")
            cmd->add_option("--link", o.link, "ul, dl or both")->check(CLI::IsMember({"ul", "dl", "both"}));
        cmds.emplace_back(cmd, &e);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& [cmd, e] : cmds) {
            if (!cmd->parsed()) continue;
            if (e->kind == sbem::ExperimentKind::vs_ls_ul) {
                std::vector<sbem::MetricRecord> records;
                sbem::ExperimentConfig cfg;
                for (auto kind : {sbem::ExperimentKind::vs_ls_ul, sbem::ExperimentKind::vs_ls_dl}) {
                    if (o.link == "ul" && kind != sbem::ExperimentKind::vs_ls_ul) continue;
                    if (o.link == "dl" && kind != sbem::ExperimentKind::vs_ls_dl) continue;
                    cfg = resolve(o, kind);
                    auto part = sbem::run_experiment(cfg);
                    records.insert(records.end(), part.begin(), part.end());
                }
                emit(o, records, cfg);
            } else {
                const auto cfg = resolve(o, e->kind);
                emit(o, sbem::run_experiment(cfg), cfg);
            }
        }
    } catch (const std::invalid_argument& err) {  // ConfigError
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::domain_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
