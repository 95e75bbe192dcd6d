// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "catch_amalgamated.hpp"

#include "casopt/experiments.hpp"

namespace ex = casopt::experiments;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json small_scalar() {
    return json::parse(R"({
        "schema_version": 1, "kind": "scalar-sweep", "name": "small",
        "scenario": {"power_budget": 5.0, "grid_points": {"x": 21, "s": 21, "z": 31, "y": 31}},
        "sweep": {"mu": [0, 2.5, 30]}
    })");
}

json small_mimo() {
    return json::parse(R"({
        "schema_version": 1, "kind": "mimo-baselines", "name": "mimo", "rng_seed": 4, "trials": 3,
        "scenario": {"nt": 3, "mc": 2, "ms": 2},
        "sweep": {"sensing_snr_db": [0, 10], "comm_snr_db": [0], "beta_points": 3}
    })");
}

std::string error_of(const json& j) {
    try {
        ex::parse_config(j);
    } catch (const casopt::ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string csv(const ex::RunOutput& out, const ex::ExperimentConfig& cfg, std::size_t i = 0) {
    return ex::render_csv(out.tables.at(i), cfg, out.seed);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("casopt_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

struct Cli {
    int code;
    std::string err;
};

Cli cli(const std::string& args, const fs::path& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(CASOPT_CLI) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config errors name the offending field") {
    json j = small_scalar();
    j["sweeep"] = 1;
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("field 'sweeep': unknown key"));

    j = small_scalar();
    j["scenario"]["grid_points"]["q"] = 3;
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("field 'scenario.grid_points.q'"));

    j = small_scalar();
    j["sweep"]["mu"] = json::array({0.0, -1.0});
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("sweep.mu[1]"));

    j = small_mimo();
    j.erase("rng_seed");
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("field 'rng_seed': required"));

    j = small_mimo();
    j["schema_version"] = 2;
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("schema_version"));

    j = small_mimo();
    j["kind"] = "plot";
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("unknown experiment kind"));

    j = small_mimo();
    j["sweep"]["methods"] = json::array({"proposed", "magic"});
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("sweep.methods[1]"));

    j = small_mimo();
    j["kind"] = "exhaustive-2d";
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("nt = 2"));

    j = small_mimo();
    j["scenario"]["sigma_diag"] = json::array({0.4, 0.1});
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("length must equal nt"));

    j = small_mimo();
    j["trials"] = 0;
    CHECK_THAT(error_of(j), Catch::Matchers::ContainsSubstring("field 'trials'"));

    CHECK(error_of(small_scalar()).empty());
    CHECK(error_of(small_mimo()).empty());
}

TEST_CASE("config hash is stable and sensitive") {
    const auto a = ex::parse_config(small_scalar());
    const auto b = ex::parse_config(json::parse(small_scalar().dump()));
    CHECK(a.config_hash == b.config_hash);
    json j = small_scalar();
    j["scenario"]["power_budget"] = 4.0;
    CHECK(ex::parse_config(j).config_hash != a.config_hash);
    CHECK(ex::fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(ex::fnv1a("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("scalar sweep CSV layout and determinism") {
    const auto cfg = ex::parse_config(small_scalar());
    ex::RunOptions opt;
    opt.workers = 1;
    const auto one = ex::run(cfg, opt);
    opt.workers = 3;
    const auto two = ex::run(cfg, opt);
    REQUIRE(one.tables.size() == 1);
    const std::string text = csv(one, cfg);
    CHECK(text == csv(two, cfg));
    std::istringstream in(text);
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(l1 == "# config_hash=" + ex::hash_hex(cfg.config_hash) + " seed=none kind=scalar-sweep");
    CHECK(l2 == "state_variance,snr_s_db,snr_c_db,mu,Ds,I_bits,Dc,D,cas_optimal");
    CHECK(one.tables[0].rows.size() == 3);
    int flagged = 0;
    for (const auto& r : one.tables[0].rows) flagged += r.back() == "1";
    CHECK(flagged == 1);
}

TEST_CASE("MIMO runs are byte-identical and seed-driven") {
    const auto cfg = ex::parse_config(small_mimo());
    ex::RunOptions opt;
    opt.workers = 1;
    opt.trace = true;
    const auto a = ex::run(cfg, opt);
    opt.workers = 4;
    const auto b = ex::run(cfg, opt);
    REQUIRE(a.tables.size() == 3);
    for (std::size_t i = 0; i < a.tables.size(); ++i) CHECK(csv(a, cfg, i) == csv(b, cfg, i));
    CHECK_FALSE(a.solver_failure);
    CHECK(a.tables[0].rows.size() == 2 * 4);
    CHECK(a.tables[1].rows.size() == 2 * 3 * 4);

    opt.seed = 5;
    const auto c = ex::run(cfg, opt);
    CHECK(csv(c, cfg) != csv(a, cfg));
    CHECK_THAT(csv(c, cfg), Catch::Matchers::StartsWith("# config_hash=" + ex::hash_hex(cfg.config_hash) + " seed=5 "));
}

TEST_CASE("proposed design never loses to the baselines in the tables") {
    const auto cfg = ex::parse_config(small_mimo());
    ex::RunOptions opt;
    opt.trace = true;
    const auto out = ex::run(cfg, opt);
    const auto& rows = out.tables[1].rows;  // per trial
    for (std::size_t i = 0; i < rows.size(); i += 4) {
        const double prop = std::stod(rows[i][7]);
        for (std::size_t k = 1; k < 4; ++k) CHECK(prop <= std::stod(rows[i + k][7]) + 1e-6);
    }
}

TEST_CASE("exhaustive search without a channel gives the sensing-only optimum") {
    const json j = json::parse(R"({
        "schema_version": 1, "kind": "exhaustive-2d", "rng_seed": 1, "trials": 2,
        "scenario": {"nt": 2, "mc": 2, "ms": 2, "sigma_diag": [0.4, 0.1], "zero_channel": true},
        "sweep": {"sensing_snr_db": [0, 10], "comm_snr_db": [0]}
    })");
    const auto cfg = ex::parse_config(j);
    const auto out = ex::run(cfg);
    const auto& rows = out.tables[0].rows;
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 0; i < rows.size(); i += 4) {
        CHECK(rows[i][5] == "exhaustive");
        CHECK(rows[i + 2][5] == "sensing-optimal");
        CHECK_THAT(std::stod(rows[i][6]), Catch::Matchers::WithinRel(std::stod(rows[i + 2][6]), 1e-6));
        CHECK_THAT(std::stod(rows[i + 1][6]), Catch::Matchers::WithinRel(std::stod(rows[i + 2][6]), 1e-6));
    }
}

TEST_CASE("other experiment kinds produce their tables") {
    const auto rd = ex::parse_config(json::parse(R"({
        "schema_version": 1, "kind": "rd-curve", "source": {"points": 41},
        "sweep": {"slopes": [-0.1, -0.5, -2.0, -8.0]}
    })"));
    const auto r = ex::run(rd);
    REQUIRE(r.tables.size() == 2);
    CHECK(r.tables[0].rows.size() == 4);
    CHECK(r.tables[0].columns[3] == "R_gaussian_bits");

    const auto sep = ex::parse_config(json::parse(R"({
        "schema_version": 1, "kind": "separability", "rng_seed": 3,
        "scenario": {"grid_points": {"x": 21, "s": 41, "z": 41, "y": 41}},
        "check": {"samples": 2000, "gain_scales": [1.0]}
    })"));
    const auto s = ex::run(sep);
    REQUIRE(s.tables[0].rows.size() == 1);
    CHECK(s.seed == std::optional<std::uint64_t>(3));
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("cli");
    write_json(dir / "ok.json", json::parse(R"({
        "schema_version": 1, "kind": "ba-capacity", "name": "cap",
        "scenario": {"grid_points": {"x": 21, "s": 21, "z": 31, "y": 31}}, "solver": {"mu": 1.0}
    })"));
    Cli r = cli("ba-capacity --config " + (dir / "ok.json").string() + " --out " + (dir / "out").string(), dir);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "out" / "cap.csv"));
    CHECK(fs::exists(dir / "out" / "cap_px.csv"));
    const std::string first = slurp(dir / "out" / "cap.csv");
    r = cli("ba-capacity --config " + (dir / "ok.json").string() + " --out " + (dir / "out").string(), dir);
    CHECK(slurp(dir / "out" / "cap.csv") == first);

    r = cli("ba-capacity --trace --config " + (dir / "ok.json").string() + " --out " + (dir / "out").string(), dir);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "out" / "cap_trace.csv"));

    r = cli("scalar-sweep --config " + (dir / "ok.json").string(), dir);
    CHECK(r.code == 1);
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("field 'kind'"));

    write_json(dir / "bad.json", json::parse(R"({"schema_version": 1, "kind": "ba-capacity", "solvr": {}})"));
    r = cli("ba-capacity --config " + (dir / "bad.json").string(), dir);
    CHECK(r.code == 1);
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("field 'solvr'"));

    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(cli("ba-capacity --config " + (dir / "broken.json").string(), dir).code == 1);
    CHECK(cli("ba-capacity", dir).code == 1);
    CHECK(cli("ba-capacity --config " + (dir / "missing.json").string(), dir).code == 1);
    CHECK(cli("", dir).code == 1);

    write_json(dir / "short.json", json::parse(R"({
        "schema_version": 1, "kind": "ba-capacity", "name": "short",
        "scenario": {"grid_points": {"x": 21, "s": 21, "z": 31, "y": 31}}, "solver": {"mu": 1.0, "max_iters": 2}
    })"));
    r = cli("ba-capacity --config " + (dir / "short.json").string() + " --out " + (dir / "out").string(), dir);
    CHECK(r.code == 2);
    CHECK(fs::exists(dir / "out" / "short.csv"));
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("did not converge"));

    write_json(dir / "seeded.json", small_mimo());
    r = cli("mimo-baselines --seed 11 --config " + (dir / "seeded.json").string() + " --out " + (dir / "m").string(), dir);
    CHECK(r.code == 0);
    CHECK_THAT(slurp(dir / "m" / "mimo.csv"), Catch::Matchers::ContainsSubstring("seed=11 "));
    fs::remove_all(dir);
}
