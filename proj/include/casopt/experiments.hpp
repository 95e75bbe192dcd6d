// SPDX-License-Identifier: Apache-2.0
#pragma once

// Configuration-driven experiments. A JSON document names the experiment kind,
// the scenario and the sweep; running it yields ordered tables that are written
// as CSV with a leading "# config_hash=... seed=..." comment line.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "casopt/ba_capacity.hpp"
#include "casopt/cas_search.hpp"
#include "casopt/errors.hpp"
#include "casopt/mimo.hpp"
#include "casopt/parallel.hpp"
#include "casopt/rate_distortion.hpp"
#include "casopt/scalar_model.hpp"
#include "casopt/separability.hpp"

namespace casopt::experiments {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Kind { ScalarSweep, BaCapacity, RdCurve, MimoSca, MimoBaselines, Exhaustive2d, Separability };

inline const std::vector<std::pair<Kind, std::string>>& kind_names() {
    static const std::vector<std::pair<Kind, std::string>> names{
        {Kind::ScalarSweep, "scalar-sweep"}, {Kind::BaCapacity, "ba-capacity"},
        {Kind::RdCurve, "rd-curve"},         {Kind::MimoSca, "mimo-sca"},
        {Kind::MimoBaselines, "mimo-baselines"}, {Kind::Exhaustive2d, "exhaustive-2d"},
        {Kind::Separability, "separability"}};
    return names;
}

inline std::string kind_name(Kind k) {
    for (const auto& [kind, name] : kind_names())
        if (kind == k) return name;
    return "?";
}

inline std::optional<Kind> parse_kind(const std::string& s) {
    for (const auto& [kind, name] : kind_names())
        if (name == s) return kind;
    return std::nullopt;
}

inline bool randomized(Kind k) {
    return k == Kind::MimoSca || k == Kind::MimoBaselines || k == Kind::Exhaustive2d || k == Kind::Separability;
}

// ---------------------------------------------------------------------------
// Config schema

struct ScalarCase {
    double state_variance = 1.0;
    double sensing_snr_db = 0.0;
    double comm_snr_db = 0.0;
    std::vector<double> mu;
};

struct ScalarBlock {
    double state_variance = 1.0;
    double sensing_snr_db = 0.0;
    double comm_snr_db = 0.0;
    double power_budget = 5.0;
    GridSizes grids;
    bool generic_sensing = false;

    ScalarScenario scenario(double nu2, double snr_s, double snr_c) const {
        return make_scalar_scenario(nu2, snr_db_to_noise(snr_s), snr_db_to_noise(snr_c), power_budget, grids);
    }
    ScalarScenario scenario() const { return scenario(state_variance, sensing_snr_db, comm_snr_db); }
};

struct MimoBlock {
    Eigen::Index nt = 2;
    Eigen::Index mc = 2;
    int ms = 2;
    double power = 1.0;
    double state_scale = 0.25;
    std::optional<std::vector<double>> sigma_diag;
    bool zero_channel = false;
};

struct MimoPoint {
    double sensing_snr_db = 0.0;
    double comm_snr_db = 0.0;
    int ms = 1;
    Eigen::Index mc = 1;
    double variance_scale = 1.0;
};

struct RdSource {
    std::string type = "gaussian";  // gaussian | estimate
    double variance = 1.0;
    std::size_t points = 101;
    double span_sd = 5.0;
    double mu = 0.0;  // estimate source: penalty of the input law
};

struct ExperimentConfig {
    Kind kind = Kind::ScalarSweep;
    std::string name;
    std::string output;  // CSV file name relative to the output directory
    std::optional<std::uint64_t> seed;
    std::size_t trials = 1;

    ScalarBlock scalar;
    MimoBlock mimo;

    // scalar-sweep
    std::vector<ScalarCase> cases;
    bool dump_px = false;
    // ba-capacity
    BaCapacityConfig ba;
    // rd-curve
    RdSource source;
    std::vector<double> slopes = default_slopes();
    // mimo kinds
    std::vector<double> sensing_snr_db;
    std::vector<double> comm_snr_db;
    std::vector<int> ms_list;
    std::vector<Eigen::Index> mc_list;
    std::vector<double> variance_scales{1.0};
    std::vector<std::string> methods;
    std::size_t beta_points = 11;
    std::size_t grid_points = 2001;
    ScaConfig sca;
    // separability
    double separability_mu = 2.5;
    std::size_t samples = 100000;
    std::vector<double> gain_scales{1.0, 0.5};

    std::uint64_t config_hash = 0;
    json canonical;

    std::vector<MimoPoint> mimo_points() const {
        std::vector<MimoPoint> pts;
        for (double scale : variance_scales)
            for (Eigen::Index mc : mc_list)
                for (int ms : ms_list)
                    for (double c : comm_snr_db)
                        for (double s : sensing_snr_db) pts.push_back(MimoPoint{s, c, ms, mc, scale});
        return pts;
    }
};

/// FNV-1a over the canonical (key-sorted, compact) serialization.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace detail {

/// Object reader that rejects unknown keys and reports errors with the field path.
class Fields {
public:
    Fields(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!allowed.count(it.key())) fail(at(it.key()), "unknown key");
    }

    bool has(const std::string& k) const { return j_.contains(k); }
    std::string at(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    [[noreturn]] static void fail(const std::string& field, const std::string& what) {
        throw ConfigError("field '" + field + "': " + what);
    }

    double number(const std::string& k, std::optional<double> def = std::nullopt) const {
        if (!has(k)) {
            if (def) return *def;
            fail(at(k), "required");
        }
        const json& v = j_.at(k);
        if (!v.is_number()) fail(at(k), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(at(k), "must be finite");
        return d;
    }

    double positive(const std::string& k, std::optional<double> def = std::nullopt) const {
        const double d = number(k, def);
        if (!(d > 0.0)) fail(at(k), "must be positive");
        return d;
    }

    std::int64_t integer(const std::string& k, std::optional<std::int64_t> def = std::nullopt,
                         std::int64_t lo = 0) const {
        if (!has(k)) {
            if (def) return *def;
            fail(at(k), "required");
        }
        const json& v = j_.at(k);
        if (!v.is_number_integer()) fail(at(k), "expected an integer");
        const auto i = v.get<std::int64_t>();
        if (i < lo) fail(at(k), "must be at least " + std::to_string(lo));
        return i;
    }

    bool flag(const std::string& k, bool def) const {
        if (!has(k)) return def;
        if (!j_.at(k).is_boolean()) fail(at(k), "expected true or false");
        return j_.at(k).get<bool>();
    }

    std::string string(const std::string& k, std::optional<std::string> def = std::nullopt) const {
        if (!has(k)) {
            if (def) return *def;
            fail(at(k), "required");
        }
        if (!j_.at(k).is_string()) fail(at(k), "expected a string");
        return j_.at(k).get<std::string>();
    }

    std::vector<double> numbers(const std::string& k, bool non_empty = true) const {
        if (!has(k)) fail(at(k), "required");
        const json& v = j_.at(k);
        if (!v.is_array()) fail(at(k), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(at(k) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
            if (!std::isfinite(out.back())) fail(at(k) + "[" + std::to_string(i) + "]", "must be finite");
        }
        if (non_empty && out.empty()) fail(at(k), "must not be empty");
        return out;
    }

    std::vector<std::int64_t> integers(const std::string& k, std::int64_t lo) const {
        if (!has(k)) fail(at(k), "required");
        const json& v = j_.at(k);
        if (!v.is_array() || v.empty()) fail(at(k), "expected a non-empty array of integers");
        std::vector<std::int64_t> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < lo)
                fail(at(k) + "[" + std::to_string(i) + "]", "expected an integer >= " + std::to_string(lo));
            out.push_back(v[i].get<std::int64_t>());
        }
        return out;
    }

    Fields child(const std::string& k, std::set<std::string> allowed) const {
        static const json empty = json::object();
        return Fields(has(k) ? j_.at(k) : empty, at(k), std::move(allowed));
    }

    const json& raw(const std::string& k) const { return j_.at(k); }

private:
    const json& j_;
    std::string path_;
};

inline std::vector<double> mu_list(const Fields& f, const std::string& k) {
    if (f.has(k) && f.raw(k).is_string()) {
        if (f.raw(k).get<std::string>() != "paper") Fields::fail(f.at(k), "expected an array or \"paper\"");
        return paper_mu_grid();
    }
    std::vector<double> mu = f.numbers(k);
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (!(mu[i] >= 0.0)) Fields::fail(f.at(k) + "[" + std::to_string(i) + "]", "must be non-negative");
    return mu;
}

inline ScalarBlock parse_scalar(const Fields& root) {
    const Fields s = root.child("scenario", {"state_variance", "sensing_snr_db", "comm_snr_db", "power_budget",
                                             "grid_points", "generic_sensing"});
    ScalarBlock b;
    b.state_variance = s.positive("state_variance", 1.0);
    b.sensing_snr_db = s.number("sensing_snr_db", 0.0);
    b.comm_snr_db = s.number("comm_snr_db", 0.0);
    b.power_budget = s.positive("power_budget", 5.0);
    b.generic_sensing = s.flag("generic_sensing", false);
    const Fields g = s.child("grid_points", {"x", "s", "z", "y"});
    b.grids.x = static_cast<std::size_t>(g.integer("x", static_cast<std::int64_t>(b.grids.x), 3));
    b.grids.s = static_cast<std::size_t>(g.integer("s", static_cast<std::int64_t>(b.grids.s), 3));
    b.grids.z = static_cast<std::size_t>(g.integer("z", static_cast<std::int64_t>(b.grids.z), 3));
    b.grids.y = static_cast<std::size_t>(g.integer("y", static_cast<std::int64_t>(b.grids.y), 3));
    return b;
}

inline MimoBlock parse_mimo(const Fields& root) {
    const Fields s = root.child("scenario", {"nt", "mc", "ms", "power", "state_scale", "sigma_diag", "zero_channel"});
    MimoBlock b;
    b.nt = static_cast<Eigen::Index>(s.integer("nt", 2, 1));
    b.mc = static_cast<Eigen::Index>(s.integer("mc", 2, 1));
    b.ms = static_cast<int>(s.integer("ms", 2, 1));
    b.power = s.positive("power", 1.0);
    b.state_scale = s.positive("state_scale", 0.25);
    b.zero_channel = s.flag("zero_channel", false);
    if (s.has("sigma_diag")) {
        b.sigma_diag = s.numbers("sigma_diag");
        if (static_cast<Eigen::Index>(b.sigma_diag->size()) != b.nt)
            Fields::fail(s.at("sigma_diag"), "length must equal nt");
        for (std::size_t i = 0; i < b.sigma_diag->size(); ++i)
            if (!((*b.sigma_diag)[i] >= 0.0))
                Fields::fail(s.at("sigma_diag") + "[" + std::to_string(i) + "]", "must be non-negative");
    }
    return b;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    using detail::Fields;
    if (!j.is_object()) Fields::fail("config", "expected an object");
    if (!j.contains("schema_version")) Fields::fail("schema_version", "required");
    if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion)
        Fields::fail("schema_version", "unsupported (expected " + std::to_string(kSchemaVersion) + ")");
    if (!j.contains("kind") || !j.at("kind").is_string()) Fields::fail("kind", "required string");
    const auto kind = parse_kind(j.at("kind").get<std::string>());
    if (!kind) Fields::fail("kind", "unknown experiment kind '" + j.at("kind").get<std::string>() + "'");

    std::set<std::string> top{"schema_version", "kind", "name", "output", "scenario", "rng_seed"};
    switch (*kind) {
        case Kind::ScalarSweep: top.insert({"sweep"}); break;
        case Kind::BaCapacity: top.insert({"solver"}); break;
        case Kind::RdCurve: top.insert({"source", "sweep"}); break;
        case Kind::MimoSca:
        case Kind::MimoBaselines:
        case Kind::Exhaustive2d: top.insert({"sweep", "trials", "solver"}); break;
        case Kind::Separability: top.insert({"check"}); break;
    }
    const Fields root(j, "", top);

    ExperimentConfig cfg;
    cfg.kind = *kind;
    cfg.name = root.string("name", kind_name(*kind));
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos)
        Fields::fail("name", "must be a non-empty file stem");
    cfg.output = root.string("output", cfg.name + ".csv");
    if (root.has("rng_seed")) cfg.seed = static_cast<std::uint64_t>(root.integer("rng_seed"));
    if (randomized(*kind) && !cfg.seed) Fields::fail("rng_seed", "required for randomized experiments");

    switch (*kind) {
        case Kind::ScalarSweep: {
            cfg.scalar = detail::parse_scalar(root);
            const Fields sw = root.child("sweep", {"mu", "cases", "dump_px"});
            cfg.dump_px = sw.flag("dump_px", false);
            const std::vector<double> mu = sw.has("mu") ? detail::mu_list(sw, "mu") : paper_mu_grid();
            if (sw.has("cases")) {
                const json& arr = sw.raw("cases");
                if (!arr.is_array() || arr.empty()) Fields::fail(sw.at("cases"), "expected a non-empty array");
                for (std::size_t i = 0; i < arr.size(); ++i) {
                    const Fields c(arr[i], sw.at("cases") + "[" + std::to_string(i) + "]",
                                   {"state_variance", "sensing_snr_db", "comm_snr_db", "mu"});
                    ScalarCase sc;
                    sc.state_variance = c.positive("state_variance", cfg.scalar.state_variance);
                    sc.sensing_snr_db = c.number("sensing_snr_db", cfg.scalar.sensing_snr_db);
                    sc.comm_snr_db = c.number("comm_snr_db", cfg.scalar.comm_snr_db);
                    sc.mu = c.has("mu") ? detail::mu_list(c, "mu") : mu;
                    cfg.cases.push_back(std::move(sc));
                }
            } else {
                cfg.cases.push_back(
                    ScalarCase{cfg.scalar.state_variance, cfg.scalar.sensing_snr_db, cfg.scalar.comm_snr_db, mu});
            }
            break;
        }
        case Kind::BaCapacity: {
            cfg.scalar = detail::parse_scalar(root);
            const Fields s = root.child("solver", {"mu", "max_iters", "rel_tol"});
            cfg.ba.penalty = s.number("mu", 0.0);
            if (!(cfg.ba.penalty >= 0.0)) Fields::fail(s.at("mu"), "must be non-negative");
            cfg.ba.max_iters = static_cast<std::size_t>(s.integer("max_iters", static_cast<std::int64_t>(cfg.ba.max_iters), 1));
            cfg.ba.rel_tol = s.positive("rel_tol", cfg.ba.rel_tol);
            cfg.ba.budget = cfg.scalar.power_budget;
            break;
        }
        case Kind::RdCurve: {
            cfg.scalar = detail::parse_scalar(root);
            const Fields s = root.child("source", {"type", "variance", "points", "span_sd", "mu"});
            cfg.source.type = s.string("type", "gaussian");
            if (cfg.source.type != "gaussian" && cfg.source.type != "estimate")
                Fields::fail(s.at("type"), "expected \"gaussian\" or \"estimate\"");
            cfg.source.variance = s.positive("variance", 1.0);
            cfg.source.points = static_cast<std::size_t>(s.integer("points", 101, 3));
            cfg.source.span_sd = s.positive("span_sd", 5.0);
            cfg.source.mu = s.number("mu", 0.0);
            if (!(cfg.source.mu >= 0.0)) Fields::fail(s.at("mu"), "must be non-negative");
            const Fields sw = root.child("sweep", {"slopes"});
            if (sw.has("slopes")) {
                cfg.slopes = sw.numbers("slopes");
                if (cfg.slopes.size() < 2) Fields::fail(sw.at("slopes"), "needs at least two slopes");
                for (std::size_t i = 0; i < cfg.slopes.size(); ++i)
                    if (!(cfg.slopes[i] < 0.0))
                        Fields::fail(sw.at("slopes") + "[" + std::to_string(i) + "]", "slopes must be negative");
            }
            break;
        }
        case Kind::MimoSca:
        case Kind::MimoBaselines:
        case Kind::Exhaustive2d: {
            cfg.mimo = detail::parse_mimo(root);
            cfg.trials = static_cast<std::size_t>(root.integer("trials", 100, 1));
            const Fields sw = root.child("sweep", {"sensing_snr_db", "comm_snr_db", "ms", "mc", "variance_scales",
                                                   "methods", "beta_points", "grid_points"});
            cfg.sensing_snr_db = sw.numbers("sensing_snr_db");
            cfg.comm_snr_db = sw.numbers("comm_snr_db");
            if (sw.has("ms"))
                for (auto v : sw.integers("ms", 1)) cfg.ms_list.push_back(static_cast<int>(v));
            else
                cfg.ms_list = {cfg.mimo.ms};
            if (sw.has("mc"))
                for (auto v : sw.integers("mc", 1)) cfg.mc_list.push_back(static_cast<Eigen::Index>(v));
            else
                cfg.mc_list = {cfg.mimo.mc};
            if (sw.has("variance_scales")) {
                cfg.variance_scales = sw.numbers("variance_scales");
                for (std::size_t i = 0; i < cfg.variance_scales.size(); ++i)
                    if (!(cfg.variance_scales[i] > 0.0))
                        Fields::fail(sw.at("variance_scales") + "[" + std::to_string(i) + "]", "must be positive");
            }
            cfg.beta_points = static_cast<std::size_t>(sw.integer("beta_points", 11, 2));
            cfg.grid_points = static_cast<std::size_t>(sw.integer("grid_points", 2001, 2));
            static const std::set<std::string> known{"proposed",  "sensing-optimal", "comm-optimal",
                                                     "heuristic", "isotropic",       "exhaustive"};
            if (sw.has("methods")) {
                const json& arr = sw.raw("methods");
                if (!arr.is_array() || arr.empty()) Fields::fail(sw.at("methods"), "expected a non-empty array");
                for (std::size_t i = 0; i < arr.size(); ++i) {
                    const std::string f = sw.at("methods") + "[" + std::to_string(i) + "]";
                    if (!arr[i].is_string() || !known.count(arr[i].get<std::string>())) Fields::fail(f, "unknown method");
                    cfg.methods.push_back(arr[i].get<std::string>());
                }
            } else if (*kind == Kind::MimoSca) {
                cfg.methods = {"proposed"};
            } else if (*kind == Kind::MimoBaselines) {
                cfg.methods = {"proposed", "sensing-optimal", "comm-optimal", "heuristic"};
            } else {
                cfg.methods = {"exhaustive", "proposed", "sensing-optimal", "comm-optimal"};
            }
            const bool wants_exhaustive =
                std::find(cfg.methods.begin(), cfg.methods.end(), "exhaustive") != cfg.methods.end();
            if (wants_exhaustive && (cfg.mimo.nt != 2 || !cfg.mimo.sigma_diag))
                Fields::fail("scenario", "the exhaustive search needs nt = 2 and a diagonal sigma_diag");
            const Fields s = root.child("solver", {"max_outer", "rel_tol"});
            cfg.sca.max_outer = static_cast<std::size_t>(s.integer("max_outer", static_cast<std::int64_t>(cfg.sca.max_outer), 1));
            cfg.sca.rel_tol = s.positive("rel_tol", cfg.sca.rel_tol);
            break;
        }
        case Kind::Separability: {
            cfg.scalar = detail::parse_scalar(root);
            const Fields c = root.child("check", {"mu", "samples", "gain_scales"});
            cfg.separability_mu = c.number("mu", 2.5);
            if (!(cfg.separability_mu >= 0.0)) Fields::fail(c.at("mu"), "must be non-negative");
            cfg.samples = static_cast<std::size_t>(c.integer("samples", 100000, 1));
            if (c.has("gain_scales")) {
                cfg.gain_scales = c.numbers("gain_scales");
                for (std::size_t i = 0; i < cfg.gain_scales.size(); ++i)
                    if (!(cfg.gain_scales[i] > 0.0))
                        Fields::fail(c.at("gain_scales") + "[" + std::to_string(i) + "]", "must be positive");
            }
            break;
        }
    }
    cfg.canonical = j;
    cfg.config_hash = fnv1a(j.dump());
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Tables and CSV

/// Shortest round-trip-safe rendering is not needed; 12 significant digits keep files readable and stable.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
    return buf;
}

inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }

struct Table {
    std::string file;  // relative to the output directory
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) {
        if (row.size() != columns.size()) throw DimensionMismatch("table row does not match its header");
        rows.push_back(std::move(row));
    }
};

struct RunOutput {
    std::vector<Table> tables;
    std::vector<std::string> warnings;
    bool solver_failure = false;
    std::optional<std::uint64_t> seed;  // absent for deterministic kinds without a seed
};

struct RunOptions {
    std::optional<std::uint64_t> seed;  // overrides the config seed
    bool trace = false;
    std::size_t workers = 0;
};

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string render_csv(const Table& t, const ExperimentConfig& cfg, std::optional<std::uint64_t> seed) {
    std::ostringstream os;
    os << "# config_hash=" << hash_hex(cfg.config_hash) << " seed=" << (seed ? std::to_string(*seed) : std::string("none")) << " kind=" << kind_name(cfg.kind) << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
        os << '\n';
    }
    return os.str();
}

inline void write_tables(const RunOutput& out, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& t : out.tables) {
        const auto path = dir / t.file;
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error("cannot write '" + path.string() + "'");
        f << render_csv(t, cfg, out.seed);
        if (!f) throw Error("failed writing '" + path.string() + "'");
    }
}

inline std::string sibling(const std::string& file, const std::string& suffix) {
    const auto dot = file.rfind('.');
    const std::string stem = dot == std::string::npos ? file : file.substr(0, dot);
    return stem + suffix + ".csv";
}

// ---------------------------------------------------------------------------
// MIMO trials

struct MimoGridResult {
    std::vector<MimoPoint> points;
    std::vector<std::string> methods;
    // [point][method][trial]; NaN where the trial failed
    std::vector<std::vector<std::vector<double>>> average;
    // proposed method only: [point][trial] trajectory (average distortion) and outer iterations
    std::vector<std::vector<std::vector<double>>> history;
    std::vector<std::vector<std::size_t>> iterations;
    std::vector<std::string> failures;

    double mean(std::size_t point, std::size_t method) const {
        double acc = 0.0;
        std::size_t n = 0;
        for (double v : average[point][method])
            if (std::isfinite(v)) {
                acc += v;
                ++n;
            }
        return n ? acc / static_cast<double>(n) : std::nan("");
    }

    std::size_t ok(std::size_t point, std::size_t method) const {
        std::size_t n = 0;
        for (double v : average[point][method]) n += std::isfinite(v) ? 1 : 0;
        return n;
    }

    std::size_t method_index(const std::string& m) const {
        for (std::size_t i = 0; i < methods.size(); ++i)
            if (methods[i] == m) return i;
        throw InvalidArgument("method '" + m + "' was not run");
    }
};

inline MimoScenario mimo_trial_scenario(const MimoBlock& b, const MimoPoint& p, std::uint64_t seed, std::size_t trial) {
    MimoTrialSetup st;
    st.nt = b.nt;
    st.mc = p.mc;
    st.ms = p.ms;
    st.power = b.power;
    st.state_scale = b.state_scale * p.variance_scale;
    if (b.sigma_diag) {
        CMatrix s = CMatrix::Zero(b.nt, b.nt);
        for (Eigen::Index i = 0; i < b.nt; ++i) s(i, i) = p.variance_scale * (*b.sigma_diag)[static_cast<std::size_t>(i)];
        st.sigma = s;
    }
    MimoScenario sc = draw_scenario(st, p.sensing_snr_db, p.comm_snr_db, seed, trial);
    if (b.zero_channel) sc.hc.setZero();
    return sc;
}

struct MethodOptions {
    std::size_t beta_points = 11;
    std::size_t grid_points = 2001;
    ScaConfig sca;
};

inline MimoGridResult run_mimo_grid(const MimoBlock& b, const std::vector<MimoPoint>& points,
                                    const std::vector<std::string>& methods, std::size_t trials, std::uint64_t seed,
                                    const MethodOptions& opt = {}, std::size_t workers = 0) {
    MimoGridResult res;
    res.points = points;
    res.methods = methods;
    const std::size_t np = points.size(), nm = methods.size();
    res.average.assign(np, std::vector<std::vector<double>>(nm, std::vector<double>(trials, std::nan(""))));
    res.history.assign(np, std::vector<std::vector<double>>(trials));
    res.iterations.assign(np, std::vector<std::size_t>(trials, 0));
    std::vector<std::string> errors(np * trials);
    const std::vector<double> betas = beta_grid(opt.beta_points);

    parallel_for(
        np * trials,
        [&](std::size_t job) {
            const std::size_t ip = job / trials, t = job % trials;
            try {
                const MimoScenario sc = mimo_trial_scenario(b, points[ip], seed, t);
                const double norm = static_cast<double>(sc.ms) * static_cast<double>(sc.nt());
                for (std::size_t im = 0; im < nm; ++im) {
                    const std::string& m = methods[im];
                    double v = 0.0;
                    if (m == "proposed") {
                        const ScaResult r = sca_iterate(sc, std::nullopt, opt.sca);
                        v = r.value.average;
                        for (double h : r.history) res.history[ip][t].push_back(h / norm);
                        res.iterations[ip][t] = r.iterations;
                    } else if (m == "sensing-optimal") {
                        v = end_to_end(baseline_sensing_optimal(sc), sc).average;
                    } else if (m == "comm-optimal") {
                        v = end_to_end(baseline_comm_optimal(sc), sc).average;
                    } else if (m == "heuristic") {
                        v = baseline_heuristic(sc, betas).value.average;
                    } else if (m == "isotropic") {
                        v = end_to_end(isotropic(sc), sc).average;
                    } else if (m == "exhaustive") {
                        v = exhaustive_2d(sc, opt.grid_points).value.average;
                    } else {
                        throw InvalidArgument("unknown method '" + m + "'");
                    }
                    res.average[ip][im][t] = v;
                }
            } catch (const Error& e) {
                errors[job] = e.what();
            }
        },
        workers == 0 ? worker_count() : workers);

    for (std::size_t job = 0; job < errors.size(); ++job)
        if (!errors[job].empty())
            res.failures.push_back("point " + std::to_string(job / trials) + " trial " + std::to_string(job % trials) +
                                   ": " + errors[job]);
    return res;
}

// ---------------------------------------------------------------------------
// Runners

namespace detail {

inline RunOutput run_scalar_sweep(const ExperimentConfig& cfg, const RunOptions& opt) {
    RunOutput out;
    Table t{cfg.output, {"state_variance", "snr_s_db", "snr_c_db", "mu", "Ds", "I_bits", "Dc", "D", "cas_optimal"}, {}};
    Table px{sibling(cfg.output, "_px"), {"state_variance", "snr_s_db", "snr_c_db", "mu", "x", "p"}, {}};
    for (const ScalarCase& c : cfg.cases) {
        const ScalarScenario sc = cfg.scalar.scenario(c.state_variance, c.sensing_snr_db, c.comm_snr_db);
        SweepConfig sw;
        sw.generic_sensing = cfg.scalar.generic_sensing;
        sw.workers = opt.workers;
        const SweepResult r = sweep(sc, c.mu, sw);
        for (const auto& w : r.warnings) out.warnings.push_back(w);
        if (!r.warnings.empty() || !r.best) out.solver_failure = true;
        for (std::size_t i = 0; i < r.records.size(); ++i) {
            const SweepRecord& rec = r.records[i];
            t.add({fmt(c.state_variance), fmt(c.sensing_snr_db), fmt(c.comm_snr_db), fmt(rec.mu), fmt(rec.ds),
                   fmt(rec.mi_bits), fmt(rec.dc), fmt(rec.d), r.best && *r.best == i ? "1" : "0"});
            if (cfg.dump_px)
                for (std::size_t k = 0; k < rec.p_x.size(); ++k)
                    px.add({fmt(c.state_variance), fmt(c.sensing_snr_db), fmt(c.comm_snr_db), fmt(rec.mu),
                            fmt(sc.grids.x[k]), fmt(rec.p_x[k])});
        }
    }
    out.tables.push_back(std::move(t));
    if (cfg.dump_px) out.tables.push_back(std::move(px));
    return out;
}

inline RunOutput run_ba_capacity(const ExperimentConfig& cfg, const RunOptions& opt) {
    RunOutput out;
    const ScalarModel model = build_scalar_model(cfg.scalar.scenario(), cfg.scalar.generic_sensing);
    Table trace{sibling(cfg.output, "_trace"), {"iteration", "lambda", "I_bits", "Ds", "E_b", "objective_nats"}, {}};
    BaTraceSink sink;
    if (opt.trace)
        sink = [&](const BaIterate& it) {
            trace.add({fmt(it.iteration), fmt(it.lambda), fmt(it.mi_bits), fmt(it.sensing_distortion),
                       fmt(it.expected_cost), fmt(it.objective_nats)});
        };
    const BaCapacityResult r = solve_ba_capacity(model.costs, model.comm, cfg.ba, sink);
    if (!r.converged) {
        out.solver_failure = true;
        out.warnings.push_back("capacity solver did not converge within max_iters");
    }
    Table t{cfg.output, {"mu", "Ds", "I_bits", "lambda", "E_b", "iterations", "converged"}, {}};
    t.add({fmt(cfg.ba.penalty), fmt(r.sensing_distortion), fmt(r.mi_bits), fmt(r.lambda_star), fmt(r.expected_cost),
           fmt(r.iterations), r.converged ? "1" : "0"});
    Table px{sibling(cfg.output, "_px"), {"x", "p"}, {}};
    for (std::size_t k = 0; k < r.p_x.size(); ++k) px.add({fmt(model.scenario.grids.x[k]), fmt(r.p_x[k])});
    out.tables.push_back(std::move(t));
    out.tables.push_back(std::move(px));
    if (opt.trace) out.tables.push_back(std::move(trace));
    return out;
}

inline RunOutput run_rd_curve(const ExperimentConfig& cfg, const RunOptions&) {
    RunOutput out;
    const bool gaussian = cfg.source.type == "gaussian";
    std::optional<Grid> src, rec;
    Pmf source;
    if (gaussian) {
        const Grid g = Grid::symmetric(cfg.source.span_sd * std::sqrt(cfg.source.variance), cfg.source.points);
        Vector row(static_cast<Eigen::Index>(g.size()));
        casopt::detail::discretize_gaussian(g.edges(), 0.0, cfg.source.variance, row.data());
        source = normalize(row);
        src = g;
        rec = g;
    } else {
        const ScalarModel model = build_scalar_model(cfg.scalar.scenario(), cfg.scalar.generic_sensing);
        BaCapacityConfig ba;
        ba.penalty = cfg.source.mu;
        ba.budget = model.scenario.power_budget;
        const BaCapacityResult r = solve_ba_capacity(model.costs, model.comm, ba);
        if (!r.converged) {
            out.solver_failure = true;
            out.warnings.push_back("capacity solver did not converge for the estimate source");
        }
        source = model.estimates(r.p_x);
        src = model.scenario.grids.s_tilde;
        rec = model.scenario.grids.s_hat;
    }
    const RdCurveBuild b = build_curve_detailed(source, cfg.slopes, *src, *rec);
    if (!b.all_converged) {
        out.solver_failure = true;
        out.warnings.push_back("some rate-distortion solves did not converge");
    }
    Table t{cfg.output, {"slope", "D", "R_bits", "R_gaussian_bits", "converged"}, {}};
    for (const auto& s : b.solutions) {
        const double closed = gaussian && s.point.distortion < cfg.source.variance
                                  ? 0.5 * std::log2(cfg.source.variance / s.point.distortion)
                                  : 0.0;
        t.add({fmt(s.point.slope), fmt(s.point.distortion), fmt(s.point.rate_bits), gaussian ? fmt(closed) : "",
               s.converged ? "1" : "0"});
    }
    Table env{sibling(cfg.output, "_envelope"), {"D", "R_bits"}, {}};
    for (const auto& p : b.curve.points()) env.add({fmt(p.distortion), fmt(p.rate_bits)});
    out.tables.push_back(std::move(t));
    out.tables.push_back(std::move(env));
    return out;
}

inline RunOutput run_mimo(const ExperimentConfig& cfg, const RunOptions& opt, std::uint64_t seed) {
    RunOutput out;
    MethodOptions mo;
    mo.beta_points = cfg.beta_points;
    mo.grid_points = cfg.grid_points;
    mo.sca = cfg.sca;
    const MimoGridResult r = run_mimo_grid(cfg.mimo, cfg.mimo_points(), cfg.methods, cfg.trials, seed, mo, opt.workers);
    for (const auto& f : r.failures) out.warnings.push_back(f);
    if (!r.failures.empty()) out.solver_failure = true;

    const std::vector<std::string> keys{"snr_s_db", "snr_c_db", "ms", "mc", "variance_scale"};
    auto key = [&](const MimoPoint& p) {
        return std::vector<std::string>{fmt(p.sensing_snr_db), fmt(p.comm_snr_db), fmt(p.ms),
                                        fmt(static_cast<long>(p.mc)), fmt(p.variance_scale)};
    };
    std::vector<std::string> cols = keys;
    cols.insert(cols.end(), {"method", "avg_distortion", "trials"});
    Table t{cfg.output, cols, {}};
    for (std::size_t ip = 0; ip < r.points.size(); ++ip)
        for (std::size_t im = 0; im < r.methods.size(); ++im) {
            auto row = key(r.points[ip]);
            row.insert(row.end(), {r.methods[im], fmt(r.mean(ip, im)), fmt(r.ok(ip, im))});
            t.add(std::move(row));
        }
    out.tables.push_back(std::move(t));

    if (opt.trace) {
        std::vector<std::string> tc = keys;
        tc.insert(tc.end(), {"trial", "method", "avg_distortion", "iterations"});
        Table trials{sibling(cfg.output, "_trials"), tc, {}};
        std::vector<std::string> hc = keys;
        hc.insert(hc.end(), {"trial", "iteration", "avg_distortion"});
        Table hist{sibling(cfg.output, "_trace"), hc, {}};
        for (std::size_t ip = 0; ip < r.points.size(); ++ip)
            for (std::size_t tr = 0; tr < cfg.trials; ++tr) {
                for (std::size_t im = 0; im < r.methods.size(); ++im) {
                    auto row = key(r.points[ip]);
                    const bool prop = r.methods[im] == "proposed";
                    row.insert(row.end(), {fmt(tr), r.methods[im], fmt(r.average[ip][im][tr]),
                                           prop ? fmt(r.iterations[ip][tr]) : ""});
                    trials.add(std::move(row));
                }
                for (std::size_t k = 0; k < r.history[ip][tr].size(); ++k) {
                    auto row = key(r.points[ip]);
                    row.insert(row.end(), {fmt(tr), fmt(k), fmt(r.history[ip][tr][k])});
                    hist.add(std::move(row));
                }
            }
        out.tables.push_back(std::move(trials));
        out.tables.push_back(std::move(hist));
    }
    return out;
}

inline RunOutput run_separability(const ExperimentConfig& cfg, const RunOptions&, std::uint64_t seed) {
    RunOutput out;
    const ScalarScenario sc = cfg.scalar.scenario();
    const ScalarModel model = build_scalar_model(sc);
    BaCapacityConfig ba;
    ba.penalty = cfg.separability_mu;
    ba.budget = sc.power_budget;
    const BaCapacityResult r = solve_ba_capacity(model.costs, model.comm, ba);
    if (!r.converged) {
        out.solver_failure = true;
        out.warnings.push_back("capacity solver did not converge");
    }
    Table t{cfg.output,
            {"gain_scale", "mu", "I_bits", "slope", "rate_bits", "E_total", "E_sensing", "E_comm", "violation",
             "samples"},
            {}};
    for (double k : cfg.gain_scales) {
        SeparabilityConfig sp;
        sp.samples = cfg.samples;
        sp.gain_scale = k;
        sp.seed = seed;
        const SeparabilityReport rep = separability_check(sc, r.p_x, r.mi_bits, sp);
        t.add({fmt(k), fmt(cfg.separability_mu), fmt(r.mi_bits), fmt(rep.slope), fmt(rep.rate_bits), fmt(rep.total),
               fmt(rep.sensing), fmt(rep.communication), fmt(rep.violation), fmt(rep.samples)});
    }
    out.tables.push_back(std::move(t));
    return out;
}

}  // namespace detail

/// Runs the experiment; solver-level problems are reported through `solver_failure` with partial tables.
inline RunOutput run(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    const std::optional<std::uint64_t> chosen = opt.seed ? opt.seed : cfg.seed;
    const std::uint64_t seed = chosen.value_or(0);
    RunOutput out;
    switch (cfg.kind) {
        case Kind::ScalarSweep: out = detail::run_scalar_sweep(cfg, opt); break;
        case Kind::BaCapacity: out = detail::run_ba_capacity(cfg, opt); break;
        case Kind::RdCurve: out = detail::run_rd_curve(cfg, opt); break;
        case Kind::MimoSca:
        case Kind::MimoBaselines:
        case Kind::Exhaustive2d: out = detail::run_mimo(cfg, opt, seed); break;
        case Kind::Separability: out = detail::run_separability(cfg, opt, seed); break;
    }
    out.seed = chosen;
    return out;
}

}  // namespace casopt::experiments
