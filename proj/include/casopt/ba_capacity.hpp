// SPDX-License-Identifier: Apache-2.0
#pragma once

// Penalized Blahut-Arimoto iteration for
//
//     max_{P_X}  I(X;Y) - mu * E[e(X)]   subject to  E[b(X)] <= B.
//
// Each outer iteration forms the posterior Q_{X|Y} from the current P_X, tilts
// P_X by exp(sum_y Q(y|x) ln Q_{X|Y}(x|y) - mu e(x) + lambda b(x)) and re-solves
// the multiplier lambda <= 0 by bisection so that the budget holds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

#include "casopt/errors.hpp"
#include "casopt/prob.hpp"
#include "casopt/scalar_model.hpp"

namespace casopt {

struct BaCapacityConfig {
    double penalty = 0.0;  // mu
    double budget = 5.0;   // B
    std::size_t max_iters = 50000;
    double rel_tol = 1e-9;
    double budget_tol = 1e-6;        // relative residual |E[b] - B| / B accepted when binding
    double lambda_initial = 1.0;     // first bracket [-lambda_initial, 0]
    double lambda_ceiling = 1e12;    // bracket growth stops here
    double mass_floor = 1e-15;
    double monotone_slack = 1e-12;

    void validate() const {
        if (!(penalty >= 0.0)) throw InvalidArgument("penalty factor must be non-negative");
        if (!(budget > 0.0)) throw InvalidArgument("budget must be positive");
        if (!(rel_tol > 0.0) || !(budget_tol > 0.0)) throw InvalidArgument("tolerances must be positive");
        if (max_iters == 0) throw InvalidArgument("max_iters must be positive");
    }
};

struct BaIterate {
    std::size_t iteration;
    double lambda;
    double mi_bits;
    double sensing_distortion;
    double expected_cost;
    double objective_nats;  // I - mu E[e]
};

struct BaCapacityResult {
    Pmf p_x;
    double sensing_distortion = 0.0;  // sum_x P_X(x) e(x)
    double mi_bits = 0.0;
    double lambda_star = 0.0;
    double expected_cost = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool budget_binding = false;
    // Outer iterations (after the first) whose penalized objective decreased beyond the slack.
    std::size_t monotone_violations = 0;
};

using BaTraceSink = std::function<void(const BaIterate&)>;

namespace detail {

/// exp-tilt of `log_base + lambda * b`, normalized in place into `out`.
inline void tilt(const Vector& log_base, const Vector& b, double lambda, Vector& out) {
    out = log_base + lambda * b;
    out.array() -= out.maxCoeff();
    out = out.array().exp();
    out /= out.sum();
}

}  // namespace detail

inline BaCapacityResult solve_ba_capacity(const SensingCostTable& costs, const CondPmf& comm,
                                          const BaCapacityConfig& cfg, const BaTraceSink& trace = {}) {
    cfg.validate();
    const auto n = static_cast<Eigen::Index>(comm.inputs());
    if (costs.e.size() != n || costs.b.size() != n)
        throw DimensionMismatch("cost table and channel do not share the input grid");
    if (costs.b.minCoeff() > cfg.budget) throw InvalidArgument("budget is below the cheapest input cost");

    const RowMatrix& q = comm.rows();
    // sum_y Q ln Q per input; the divergence to any output marginal is this minus Q * ln(marginal).
    Vector neg_entropy(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < q.cols(); ++j)
            if (q(i, j) > 0.0) acc += q(i, j) * std::log(q(i, j));
        neg_entropy[i] = acc;
    }
    auto divergences = [&](const Vector& p) {
        Vector log_out = (q.transpose() * p).array().max(std::numeric_limits<double>::min()).log().matrix();
        return Vector(neg_entropy - q * log_out);
    };

    Vector p = Vector::Constant(n, 1.0 / static_cast<double>(n));
    Vector log_base(n);
    Vector cand(n);
    BaCapacityResult res;
    double prev_obj = -std::numeric_limits<double>::infinity();
    double lambda = 0.0;

    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
        const Vector d = divergences(p);
        // ln Q_{X|Y} summed against Q(y|x) equals ln P_X(x) + D(Q(.|x) || P_Y).
        log_base = p.array().log().matrix() + d - cfg.penalty * costs.e;

        detail::tilt(log_base, costs.b, 0.0, cand);
        lambda = 0.0;
        bool binding = cand.dot(costs.b) > cfg.budget;
        if (binding) {
            double lo = -cfg.lambda_initial;
            for (;;) {
                detail::tilt(log_base, costs.b, lo, cand);
                if (cand.dot(costs.b) <= cfg.budget) break;
                if (-lo >= cfg.lambda_ceiling) throw InvalidArgument("budget cannot be met by any multiplier");
                lo *= 2.0;
            }
            double hi = 0.0;
            // Keep `lo` on the feasible side; stop when the bracket collapses or the residual is negligible.
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid == lo || mid == hi) break;
                detail::tilt(log_base, costs.b, mid, cand);
                const double used = cand.dot(costs.b);
                if (used > cfg.budget) {
                    hi = mid;
                } else {
                    lo = mid;
                    if (cfg.budget - used <= 1e-13 * cfg.budget) break;
                }
            }
            lambda = lo;
            detail::tilt(log_base, costs.b, lambda, cand);
        }

        p = cand.array().max(cfg.mass_floor).matrix();
        p /= p.sum();

        const double mi = std::max(0.0, p.dot(divergences(p)));
        const double ds = p.dot(costs.e);
        const double used = p.dot(costs.b);
        const double obj = mi - cfg.penalty * ds;
        if (k > 1 && obj < prev_obj - cfg.monotone_slack * std::max(1.0, std::abs(prev_obj)))
            ++res.monotone_violations;
        if (trace) trace(BaIterate{k, lambda, nats_to_bits(mi), ds, used, obj});

        res.iterations = k;
        res.budget_binding = binding;
        const bool budget_ok = !binding || std::abs(used - cfg.budget) <= cfg.budget_tol * cfg.budget;
        const bool settled = k > 1 && std::abs(obj - prev_obj) <= cfg.rel_tol * std::max(std::abs(obj), 1e-12);
        prev_obj = obj;
        if (settled && budget_ok) {
            res.converged = true;
            break;
        }
    }

    res.p_x = normalize(p);
    res.sensing_distortion = res.p_x.expectation(costs.e);
    res.mi_bits = mutual_information(res.p_x, comm);
    res.expected_cost = res.p_x.expectation(costs.b);
    res.lambda_star = lambda;
    return res;
}

}  // namespace casopt
