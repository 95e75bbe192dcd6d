// SPDX-License-Identifier: Apache-2.0
#pragma once

// Two-step search over the penalty factor: each mu gives (P_X, D_s, I) from the
// penalized capacity solver, the induced estimate law gives D_c = D(I), and the
// sweep keeps the mu with the smallest D_s + D_c.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "casopt/ba_capacity.hpp"
#include "casopt/errors.hpp"
#include "casopt/parallel.hpp"
#include "casopt/prob.hpp"
#include "casopt/rate_distortion.hpp"
#include "casopt/scalar_model.hpp"

namespace casopt {

struct SweepConfig {
    BaCapacityConfig ba;  // penalty and budget are overwritten per record
    RdConfig rd;
    std::vector<double> slopes = default_slopes();
    bool generic_sensing = false;
    double msst_slack = 1e-9;
    std::size_t workers = 0;  // 0: worker_count()
};

struct SweepRecord {
    double mu = 0.0;
    double ds = 0.0;
    double mi_bits = 0.0;
    double dc = 0.0;
    double d = 0.0;
    double rate_at_dc = 0.0;  // R(D_c) read back off the curve
    Pmf p_x;
    std::size_t ba_iterations = 0;
    bool converged = false;
};

struct SweepResult {
    std::vector<SweepRecord> records;  // ascending mu
    std::optional<std::size_t> best;   // index of the minimizer among converged records
    std::vector<std::string> warnings;

    const SweepRecord& optimum() const {
        if (!best) throw Error("sweep has no converged record");
        return records[*best];
    }
};

/// 0:0.1:0.9, 1:0.5:4.5, 5:5:30.
inline std::vector<double> paper_mu_grid() {
    std::vector<double> mu;
    for (int i = 0; i < 10; ++i) mu.push_back(0.1 * i);
    for (int i = 0; i < 8; ++i) mu.push_back(1.0 + 0.5 * i);
    for (int i = 1; i <= 6; ++i) mu.push_back(5.0 * i);
    return mu;
}

struct DcEvaluation {
    double dc = 0.0;
    double rate_at_dc = 0.0;
    bool converged = true;
};

namespace detail {

inline DcEvaluation dc_eval(const ScalarModel& model, const Pmf& p_x, double mi_bits, const SweepConfig& cfg) {
    if (!(mi_bits >= 0.0)) throw InvalidArgument("mutual information must be non-negative");
    const Pmf source = model.estimates(p_x);
    const auto& g = model.scenario.grids;
    // A point-mass estimate is reproduced exactly at zero rate.
    if (zero_rate_distortion(source, g.s_tilde, g.s_hat) <= 0.0) return {0.0, 0.0, true};
    const RdCurveBuild b = build_curve_detailed(source, cfg.slopes, g.s_tilde, g.s_hat, cfg.rd);
    const double dc = distortion_at_rate(b.curve, mi_bits);
    return {dc, b.curve.rate_at(dc), b.all_converged};
}

}  // namespace detail

/// D_c for input law `p_x` whose channel carries `mi_bits`.
inline double dc_for_mu(const ScalarModel& model, const Pmf& p_x, double mi_bits, const SweepConfig& cfg = {}) {
    return detail::dc_eval(model, p_x, mi_bits, cfg).dc;
}

inline SweepResult sweep(const ScalarModel& model, const std::vector<double>& mu_set, const SweepConfig& cfg = {}) {
    if (mu_set.empty()) throw InvalidArgument("empty penalty set");
    for (double mu : mu_set)
        if (!(mu >= 0.0)) throw InvalidArgument("penalty factors must be non-negative");
    std::vector<double> mus = mu_set;
    std::sort(mus.begin(), mus.end());

    SweepResult out;
    out.records.resize(mus.size());
    parallel_for(
        mus.size(),
        [&](std::size_t i) {
            BaCapacityConfig ba = cfg.ba;
            ba.penalty = mus[i];
            ba.budget = model.scenario.power_budget;
            const BaCapacityResult r = solve_ba_capacity(model.costs, model.comm, ba);
            const DcEvaluation dc = detail::dc_eval(model, r.p_x, r.mi_bits, cfg);
            SweepRecord& rec = out.records[i];
            rec.mu = mus[i];
            rec.ds = r.sensing_distortion;
            rec.mi_bits = r.mi_bits;
            rec.dc = dc.dc;
            rec.d = rec.ds + rec.dc;
            rec.rate_at_dc = dc.rate_at_dc;
            rec.p_x = r.p_x;
            rec.ba_iterations = r.iterations;
            rec.converged = r.converged && dc.converged;
        },
        cfg.workers == 0 ? worker_count() : cfg.workers);

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        const SweepRecord& rec = out.records[i];
        if (rec.rate_at_dc > rec.mi_bits + cfg.msst_slack)
            throw Error("separation feasibility violated at mu = " + std::to_string(rec.mu));
        if (!rec.converged) {
            out.warnings.push_back("mu = " + std::to_string(rec.mu) + ": inner solver did not converge; excluded");
            continue;
        }
        if (rec.d < best) {
            best = rec.d;
            out.best = i;
        }
    }
    return out;
}

inline SweepResult sweep(const ScalarScenario& sc, const std::vector<double>& mu_set, const SweepConfig& cfg = {}) {
    return sweep(build_scalar_model(sc, cfg.generic_sensing), mu_set, cfg);
}

}  // namespace casopt
