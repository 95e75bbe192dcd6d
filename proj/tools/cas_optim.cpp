// SPDX-License-Identifier: Apache-2.0
// cas-optim: runs a configured experiment and writes its CSV tables.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "casopt/experiments.hpp"

namespace ex = casopt::experiments;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverFailure = 2;

int run_kind(ex::Kind kind, const std::string& config, const std::string& out_dir, bool trace,
             const std::optional<std::uint64_t>& seed) {
    ex::ExperimentConfig cfg;
    try {
        cfg = ex::load_config(config);
    } catch (const casopt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    if (cfg.kind != kind) {
        std::cerr << "config error: field 'kind': config is '" << ex::kind_name(cfg.kind) << "' but the subcommand is '"
                  << ex::kind_name(kind) << "'\n";
        return kConfigError;
    }

    ex::RunOptions opt;
    opt.seed = seed;
    opt.trace = trace;
    ex::RunOutput out;
    try {
        out = ex::run(cfg, opt);
    } catch (const casopt::Error& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    }
    try {
        ex::write_tables(out, cfg, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return kConfigError;
    }
    for (const auto& t : out.tables) std::cout << (std::filesystem::path(out_dir) / t.file).string() << '\n';
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
    return out.solver_failure ? kSolverFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Communication-assisted sensing optimization experiments"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir = ".";
    bool trace = false;
    std::optional<std::uint64_t> seed;
    ex::Kind chosen = ex::Kind::ScalarSweep;

    for (const auto& [kind, name] : ex::kind_names()) {
        CLI::App* sub = app.add_subcommand(name, "run a " + name + " experiment");
        sub->add_option("--config", config, "experiment JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_flag("--trace", trace, "also write per-iteration traces");
        sub->add_option("--seed", seed, "override the config seed");
        sub->callback([&chosen, k = kind] { chosen = k; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }
    return run_kind(chosen, config, out_dir, trace, seed);
}
