// SPDX-License-Identifier: Apache-2.0
#pragma once

// Log-barrier interior-point method for
//
//     min f0(x)  subject to  x in the domain of every barrier term,
//
// following the central path of t f0 + sum_i phi_i with damped Newton steps
// and multiplying t by a fixed factor until the duality measure m / t is small.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "casopt/errors.hpp"
#include "casopt/linalg.hpp"

namespace casopt {

struct SmoothValue {
    double value = 0.0;
    Eigen::VectorXd grad;
    Matrix hess;
};

/// Evaluates a twice differentiable function; returns false outside its domain.
using SmoothFn = std::function<bool(const Eigen::VectorXd& x, SmoothValue& out, bool want_hessian)>;

struct BarrierTerm {
    std::string name;
    double degree = 1.0;  // barrier parameter: 1 per scalar constraint, N per N x N matrix inequality
    SmoothFn phi;
};

struct BarrierProblem {
    Eigen::Index dim = 0;
    SmoothFn objective;
    std::vector<BarrierTerm> barriers;
};

struct BarrierConfig {
    double t_initial = 1.0;
    double t_factor = 10.0;
    double gap_tol = 1e-8;       // stop once sum(degree) / t falls below this
    double newton_tol = 1e-10;   // half squared Newton decrement ending the final centering stage
    double stage_tol = 1e-3;     // same, for the intermediate stages
    std::size_t max_stage_steps = 200;
    std::size_t max_steps = 5000;
    double armijo = 1e-4;
    double backtrack = 0.5;
    double min_step = 1e-14;
};

struct BarrierResult {
    Eigen::VectorXd x;
    double objective = 0.0;
    double t = 0.0;
    double duality_gap = 0.0;    // sum(degree) / t
    double stationarity = 0.0;   // |grad f0 + grad(sum phi) / t|_inf at the returned point
    std::size_t newton_steps = 0;
    std::size_t steepest_steps = 0;
    std::size_t stages = 0;
    bool converged = false;
    bool stalled = false;
    std::string diagnostic;
    std::vector<double> stage_objectives;  // f0 after each centering stage
    std::vector<std::size_t> stage_steps;  // Newton iterations spent in each stage
};

namespace detail {

struct Merit {
    double t;
    const BarrierProblem& problem;

    bool eval(const Eigen::VectorXd& x, SmoothValue& out, bool hessian, SmoothValue* f0 = nullptr) const {
        const Eigen::Index n = problem.dim;
        SmoothValue part;
        if (!problem.objective(x, part, hessian)) return false;
        if (f0) *f0 = part;
        out.value = t * part.value;
        out.grad = t * part.grad;
        if (hessian) out.hess = t * part.hess;
        for (const auto& b : problem.barriers) {
            if (!b.phi(x, part, hessian) || !std::isfinite(part.value)) return false;
            out.value += part.value;
            out.grad += part.grad;
            if (hessian) out.hess += part.hess;
        }
        if (out.grad.size() != n) throw DimensionMismatch("barrier term gradient has the wrong size");
        return true;
    }
};

/// Full Newton steps accepted on a falling gradient norm. Near the boundary the merit value
/// sits at rounding level long before its gradient does.
inline std::size_t polish(const Merit& merit, Eigen::VectorXd& x, std::size_t max_steps) {
    SmoothValue cur, trial;
    if (!merit.eval(x, cur, true)) return 0;
    std::size_t steps = 0;
    for (; steps < max_steps; ++steps) {
        const double g0 = cur.grad.norm();
        if (!(g0 > 1e-12 * merit.t)) break;
        Eigen::LLT<Matrix> llt(cur.hess);
        if (llt.info() != Eigen::Success) break;
        const Eigen::VectorXd dx = -llt.solve(cur.grad);
        if (!dx.allFinite()) break;
        const double slack = 1e-10 * std::max(1.0, std::abs(cur.value));
        double s = 1.0;
        bool ok = false;
        for (int k = 0; k < 40; ++k) {
            if (merit.eval(x + s * dx, trial, true) && trial.grad.norm() < g0 && trial.value <= cur.value + slack) {
                ok = true;
                break;
            }
            s *= 0.5;
        }
        if (!ok) break;
        x += s * dx;
        cur = trial;
    }
    return steps;
}

}  // namespace detail

inline BarrierResult barrier_solve(const BarrierProblem& problem, Eigen::VectorXd x,
                                   const BarrierConfig& cfg = {}) {
    if (x.size() != problem.dim) throw DimensionMismatch("start point does not match the problem dimension");
    double m = 0.0;
    for (const auto& b : problem.barriers) m += b.degree;

    BarrierResult res;
    double t = cfg.t_initial;
    SmoothValue cur;
    SmoothValue trial;
    SmoothValue f0;
    {
        detail::Merit merit{t, problem};
        if (!merit.eval(x, cur, false)) throw InfeasibleStart("start point is not strictly feasible");
    }

    for (;;) {
        detail::Merit merit{t, problem};
        const bool final_stage = m / t < cfg.gap_tol || m == 0.0;
        const double decrement_tol = final_stage ? cfg.newton_tol : std::max(cfg.newton_tol, cfg.stage_tol);
        bool centered = false;
        const std::size_t steps_before = res.newton_steps;
        for (std::size_t step = 0; step < cfg.max_stage_steps && res.newton_steps < cfg.max_steps; ++step) {
            merit.eval(x, cur, true);
            Eigen::VectorXd dx;
            Eigen::LLT<Matrix> llt(cur.hess);
            bool newton = llt.info() == Eigen::Success;
            if (newton) {
                dx = -llt.solve(cur.grad);
                newton = dx.allFinite() && cur.grad.dot(dx) < 0.0;
            }
            if (!newton) {
                dx = -cur.grad;
                ++res.steepest_steps;
            }
            const double slope = cur.grad.dot(dx);
            // Absolute decrement target, floored at the rounding level of the merit value.
            if (newton && -0.5 * slope <= std::max(decrement_tol, 1e-12 * std::abs(cur.value))) {
                centered = true;
                break;
            }
            if (!(slope < 0.0)) {
                centered = true;  // zero gradient
                break;
            }
            double s = 1.0;
            bool accepted = false;
            while (s >= cfg.min_step) {
                const Eigen::VectorXd xn = x + s * dx;
                if (merit.eval(xn, trial, false) && trial.value <= cur.value + cfg.armijo * s * slope) {
                    x = xn;
                    accepted = true;
                    break;
                }
                s *= cfg.backtrack;
            }
            ++res.newton_steps;
            if (!accepted) {
                // The predicted decrease is below the resolution of the merit value: as centered as it gets.
                if (-slope <= 1e-9 * std::max(1.0, std::abs(cur.value))) centered = true;
                break;
            }
        }
        ++res.stages;
        res.stage_steps.push_back(res.newton_steps - steps_before);
        merit.eval(x, cur, false, &f0);
        res.stage_objectives.push_back(f0.value);
        if (!centered) {
            res.stalled = true;
            res.diagnostic = "centering stalled at t = " + std::to_string(t);
            break;
        }
        if (final_stage) {
            res.newton_steps += detail::polish(merit, x, 8);
            res.converged = true;
            break;
        }
        t *= cfg.t_factor;
    }

    detail::Merit merit{t, problem};
    merit.eval(x, cur, false, &f0);
    res.x = std::move(x);
    res.objective = f0.value;
    res.t = t;
    res.duality_gap = m / t;
    res.stationarity = (cur.grad / t).lpNorm<Eigen::Infinity>();
    return res;
}

/// -log(g(x)) for a concave g given as a SmoothFn.
inline BarrierTerm concave_barrier(std::string name, SmoothFn g) {
    return BarrierTerm{std::move(name), 1.0, [g = std::move(g)](const Eigen::VectorXd& x, SmoothValue& out, bool hess) {
                           SmoothValue v;
                           if (!g(x, v, hess) || !(v.value > 0.0)) return false;
                           out.value = -std::log(v.value);
                           out.grad = -v.grad / v.value;
                           if (hess) {
                               out.hess = v.hess / -v.value;
                               out.hess.noalias() += out.grad * out.grad.transpose();
                           }
                           return true;
                       }};
}

/// -log(b - a^T x).
inline BarrierTerm affine_barrier(std::string name, Eigen::VectorXd a, double b) {
    return BarrierTerm{std::move(name), 1.0, [a = std::move(a), b](const Eigen::VectorXd& x, SmoothValue& out, bool hess) {
                           const double slack = b - a.dot(x);
                           if (!(slack > 0.0)) return false;
                           out.value = -std::log(slack);
                           out.grad = a / slack;
                           if (hess) out.hess.noalias() = out.grad * out.grad.transpose();
                           return true;
                       }};
}

/// -log det(M0 + sum_k x_k M_k) for Hermitian M0, M_k.
inline BarrierTerm lmi_barrier(std::string name, CMatrix m0, std::vector<CMatrix> mk) {
    const double degree = static_cast<double>(m0.rows());
    return BarrierTerm{std::move(name), degree,
                       [m0 = std::move(m0), mk = std::move(mk)](const Eigen::VectorXd& x, SmoothValue& out, bool hess) {
                           CMatrix m = m0;
                           for (std::size_t k = 0; k < mk.size(); ++k) m += x[static_cast<Eigen::Index>(k)] * mk[k];
                           Eigen::LLT<CMatrix> llt(hermitian_part(m));
                           if (llt.info() != Eigen::Success) return false;
                           const CMatrix inv = llt.solve(CMatrix::Identity(m.rows(), m.cols()));
                           const double ld = logdet_pd(m);
                           if (!std::isfinite(ld)) return false;
                           const auto n = static_cast<Eigen::Index>(mk.size());
                           out.value = -ld;
                           out.grad.resize(n);
                           std::vector<CMatrix> ym(mk.size());
                           for (Eigen::Index k = 0; k < n; ++k) {
                               ym[static_cast<std::size_t>(k)] = inv * mk[static_cast<std::size_t>(k)];
                               out.grad[k] = -ym[static_cast<std::size_t>(k)].trace().real();
                           }
                           if (hess) {
                               out.hess.resize(n, n);
                               for (Eigen::Index k = 0; k < n; ++k)
                                   for (Eigen::Index l = k; l < n; ++l) {
                                       const double v = (ym[static_cast<std::size_t>(k)].transpose().cwiseProduct(
                                                             ym[static_cast<std::size_t>(l)]))
                                                            .sum()
                                                            .real();
                                       out.hess(k, l) = v;
                                       out.hess(l, k) = v;
                                   }
                           }
                           return true;
                       }};
}

struct FdReport {
    double max_rel_error = 0.0;
    Eigen::Index worst = -1;
};

/// Compares `grad` with central differences of f at `x`, step 1e-5 * scale.
inline FdReport fd_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& grad,
                         const Eigen::VectorXd& x, double scale = 1.0) {
    if (grad.size() != x.size()) throw DimensionMismatch("gradient and point differ in size");
    const double h = 1e-5 * scale;
    const double floor = 1e-8 * std::max(1.0, grad.lpNorm<Eigen::Infinity>());
    FdReport rep;
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        const double fd = (fp - fm) / (2.0 * h);
        const double err = std::abs(fd - grad[i]) / std::max({std::abs(grad[i]), std::abs(fd), floor});
        if (err > rep.max_rel_error || rep.worst < 0) {
            rep.max_rel_error = err;
            rep.worst = i;
        }
    }
    return rep;
}

}  // namespace casopt
