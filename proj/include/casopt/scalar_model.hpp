// SPDX-License-Identifier: Apache-2.0
#pragma once

// Discretized scalar communication-assisted sensing model.
//
//   sensing:        Z = X S + N_s,   S ~ N(0, nu^2),  N_s ~ N(0, sigma_s^2)
//   communication:  Y = X + N_c,     N_c ~ N(0, sigma_c^2)
//
// All alphabets are real amplitude grids. Channels are discretized by
// integrating the Gaussian density over each output bin and renormalizing
// each row, so every row is exactly stochastic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "casopt/errors.hpp"
#include "casopt/prob.hpp"

namespace casopt {

struct ScalarGrids {
    Grid x;
    Grid s;
    Grid z;
    Grid y;
    Grid s_tilde;
    Grid s_hat;
};

struct ScalarScenario {
    double state_variance = 1.0;          // nu_s^2
    double sensing_noise_variance = 1.0;  // sigma_s^2
    double comm_noise_variance = 1.0;     // sigma_c^2
    double power_budget = 5.0;            // B, bound on E[X^2]
    ScalarGrids grids;

    void validate() const {
        if (!(state_variance > 0.0)) throw InvalidArgument("state variance must be positive");
        if (!(sensing_noise_variance > 0.0)) throw InvalidArgument("sensing noise variance must be positive");
        if (!(comm_noise_variance > 0.0)) throw InvalidArgument("communication noise variance must be positive");
        if (!(power_budget > 0.0)) throw InvalidArgument("power budget must be positive");
        if (grids.s_tilde.size() != grids.s_hat.size())
            throw DimensionMismatch("estimate and reconstruction grids must have equal size");
    }
};

struct GridSizes {
    // 121 X points keep the two sensing-optimal atoms +-sqrt(B) on the grid.
    std::size_t x = 121;
    std::size_t s = 101;
    std::size_t z = 151;
    std::size_t y = 151;
};

/// Default grids: X on [-3 sqrt(B), 3 sqrt(B)], S on [-5 nu, 5 nu], Z and Y spanning
/// five total standard deviations, S_tilde and S_hat equal to S.
inline ScalarGrids default_scalar_grids(double state_variance, double sensing_noise_variance,
                                        double comm_noise_variance, double power_budget,
                                        GridSizes sizes = {}) {
    const double x_half = 3.0 * std::sqrt(power_budget);
    const double nu = std::sqrt(state_variance);
    const double z_half = 5.0 * std::sqrt(x_half * x_half * state_variance + sensing_noise_variance);
    const double y_half = 5.0 * std::sqrt(power_budget + comm_noise_variance);
    Grid s = Grid::symmetric(5.0 * nu, sizes.s);
    return ScalarGrids{Grid::symmetric(x_half, sizes.x), s, Grid::symmetric(z_half, sizes.z),
                       Grid::symmetric(std::max(y_half, x_half + 5.0 * std::sqrt(comm_noise_variance)), sizes.y),
                       s, s};
}

inline ScalarScenario make_scalar_scenario(double state_variance, double sensing_noise_variance,
                                           double comm_noise_variance, double power_budget,
                                           GridSizes sizes = {}) {
    ScalarScenario sc{state_variance, sensing_noise_variance, comm_noise_variance, power_budget,
                      default_scalar_grids(state_variance, sensing_noise_variance, comm_noise_variance,
                                           power_budget, sizes)};
    sc.validate();
    return sc;
}

/// Per-input estimation cost e(x) and resource cost b(x) = x^2.
struct SensingCostTable {
    Vector e;
    Vector b;
};

/// Posterior-mean estimates over the X x Z grid; `reachable(x, z)` is false where P(z | x) = 0.
struct EstimatorTable {
    RowMatrix estimate;
    std::vector<bool> reachable_flags;
    std::size_t nz = 0;

    bool reachable(std::size_t ix, std::size_t iz) const { return reachable_flags[ix * nz + iz]; }
    double operator()(std::size_t ix, std::size_t iz) const {
        return estimate(static_cast<Eigen::Index>(ix), static_cast<Eigen::Index>(iz));
    }
};

namespace detail {

/// P(a < N(mean, var) <= b), evaluated on the tail side that keeps precision.
inline double gaussian_interval(double a, double b, double mean, double stddev) {
    const double ta = (a - mean) / stddev;
    const double tb = (b - mean) / stddev;
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    if (ta >= 0.0) return 0.5 * (std::erfc(ta * inv_sqrt2) - std::erfc(tb * inv_sqrt2));
    if (tb <= 0.0) return 0.5 * (std::erfc(-tb * inv_sqrt2) - std::erfc(-ta * inv_sqrt2));
    return 1.0 - 0.5 * std::erfc(-ta * inv_sqrt2) - 0.5 * std::erfc(tb * inv_sqrt2);
}

/// Bin-integrated N(mean, var) over `edges`; writes the unnormalized masses and returns the mass outside.
inline double discretize_gaussian(const std::vector<double>& edges, double mean, double variance,
                                  double* out) {
    const std::size_t n = edges.size() - 1;
    if (variance <= 0.0) {
        for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
        if (mean < edges.front() || mean > edges.back()) return 1.0;
        std::size_t j = 0;
        while (j + 1 < n && mean > edges[j + 1]) ++j;
        out[j] = 1.0;
        return 0.0;
    }
    const double sd = std::sqrt(variance);
    double inside = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = gaussian_interval(edges[j], edges[j + 1], mean, sd);
        inside += out[j];
    }
    return std::max(0.0, 1.0 - inside);
}

}  // namespace detail

/// Discretized N(0, nu^2) prior on the S grid.
inline Pmf state_prior(const ScalarScenario& sc) {
    const auto edges = sc.grids.s.edges();
    Vector w(static_cast<Eigen::Index>(sc.grids.s.size()));
    detail::discretize_gaussian(edges, 0.0, sc.state_variance, w.data());
    return normalize(w);
}

/// Sensing channel law with rows indexed by ix * |S| + is and columns by Z bin.
/// Throws TruncationError when, for some x, the prior-weighted mass falling outside
/// the Z grid exceeds `truncation_tol`.
inline CondPmf build_sensing_channel(const ScalarScenario& sc, double truncation_tol = 1e-5) {
    sc.validate();
    const auto& gx = sc.grids.x;
    const auto& gs = sc.grids.s;
    const auto edges = sc.grids.z.edges();
    const Pmf prior = state_prior(sc);
    const auto nx = gx.size();
    const auto ns = gs.size();
    const auto nz = sc.grids.z.size();
    RowMatrix rows(static_cast<Eigen::Index>(nx * ns), static_cast<Eigen::Index>(nz));
    double worst = 0.0;
    for (std::size_t ix = 0; ix < nx; ++ix) {
        double lost_x = 0.0;
        for (std::size_t is = 0; is < ns; ++is) {
            const auto r = static_cast<Eigen::Index>(ix * ns + is);
            const double lost = detail::discretize_gaussian(edges, gx[ix] * gs[is], sc.sensing_noise_variance,
                                                            rows.row(r).data());
            lost_x += prior[is] * lost;
            const double kept = rows.row(r).sum();
            if (!(kept > 0.0)) throw TruncationError("sensing channel row has no mass on the Z grid", 1.0);
            rows.row(r) /= kept;
        }
        worst = std::max(worst, lost_x);
    }
    if (worst > truncation_tol) throw TruncationError("Z grid does not span the sensing observation", worst);
    return CondPmf(std::move(rows));
}

/// Communication channel law X -> Y. Throws TruncationError if any row loses more than `truncation_tol`.
inline CondPmf build_comm_channel(const ScalarScenario& sc, double truncation_tol = 1e-5) {
    sc.validate();
    const auto& gx = sc.grids.x;
    const auto edges = sc.grids.y.edges();
    RowMatrix rows(static_cast<Eigen::Index>(gx.size()), static_cast<Eigen::Index>(sc.grids.y.size()));
    double worst = 0.0;
    for (std::size_t ix = 0; ix < gx.size(); ++ix) {
        const auto r = static_cast<Eigen::Index>(ix);
        worst = std::max(worst, detail::discretize_gaussian(edges, gx[ix], sc.comm_noise_variance, rows.row(r).data()));
        rows.row(r) /= rows.row(r).sum();
    }
    if (worst > truncation_tol) throw TruncationError("Y grid does not span the channel output", worst);
    return CondPmf(std::move(rows));
}

/// Posterior-mean (quadratic-distortion) estimator over the X x Z grid.
inline EstimatorTable optimal_estimator(const ScalarScenario& sc, const CondPmf& sensing, const Pmf& prior) {
    const auto& gs = sc.grids.s;
    const auto nx = sc.grids.x.size();
    const auto ns = gs.size();
    const auto nz = sc.grids.z.size();
    if (sensing.inputs() != nx * ns || sensing.outputs() != nz || prior.size() != ns)
        throw DimensionMismatch("optimal_estimator: channel does not match scenario grids");
    EstimatorTable t{RowMatrix::Zero(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nz)),
                     std::vector<bool>(nx * nz, false), nz};
    const auto& q = sensing.rows();
    for (std::size_t ix = 0; ix < nx; ++ix) {
        for (std::size_t iz = 0; iz < nz; ++iz) {
            double w = 0.0;
            double ws = 0.0;
            for (std::size_t is = 0; is < ns; ++is) {
                const double joint = prior[is] * q(static_cast<Eigen::Index>(ix * ns + is), static_cast<Eigen::Index>(iz));
                w += joint;
                ws += joint * gs[is];
            }
            if (w > 0.0) {
                // Clamp rounding so the estimate stays inside the hull of the S grid.
                t.estimate(static_cast<Eigen::Index>(ix), static_cast<Eigen::Index>(iz)) =
                    std::clamp(ws / w, gs.min(), gs.max());
                t.reachable_flags[ix * nz + iz] = true;
            }
        }
    }
    return t;
}

/// e(x) = E[(S - s_tilde(x, Z))^2 | X = x] from the discretized model.
inline SensingCostTable sensing_cost(const ScalarScenario& sc, const CondPmf& sensing, const Pmf& prior,
                                     const EstimatorTable& est) {
    const auto& gx = sc.grids.x;
    const auto& gs = sc.grids.s;
    const auto nx = gx.size();
    const auto ns = gs.size();
    const auto nz = sc.grids.z.size();
    if (est.nz != nz || static_cast<std::size_t>(est.estimate.rows()) != nx)
        throw DimensionMismatch("sensing_cost: estimator does not match scenario grids");
    SensingCostTable t{Vector::Zero(static_cast<Eigen::Index>(nx)), Vector::Zero(static_cast<Eigen::Index>(nx))};
    const auto& q = sensing.rows();
    for (std::size_t ix = 0; ix < nx; ++ix) {
        double acc = 0.0;
        for (std::size_t iz = 0; iz < nz; ++iz) {
            if (!est.reachable(ix, iz)) continue;
            const double shat = est(ix, iz);
            for (std::size_t is = 0; is < ns; ++is) {
                const double d = gs[is] - shat;
                acc += prior[is] * q(static_cast<Eigen::Index>(ix * ns + is), static_cast<Eigen::Index>(iz)) * d * d;
            }
        }
        t.e[static_cast<Eigen::Index>(ix)] = acc;
        t.b[static_cast<Eigen::Index>(ix)] = gx[ix] * gx[ix];
    }
    return t;
}

/// Linear-Gaussian MMSE gain x nu^2 / (sigma_s^2 + x^2 nu^2).
inline double mmse_gain(const ScalarScenario& sc, double x) {
    return x * sc.state_variance / (sc.sensing_noise_variance + x * x * sc.state_variance);
}

/// Variance of the MMSE estimate given X = x: x^2 nu^4 / (sigma_s^2 + x^2 nu^2).
inline double estimate_variance(const ScalarScenario& sc, double x) {
    const double nu2 = sc.state_variance;
    return x * x * nu2 * nu2 / (sc.sensing_noise_variance + x * x * nu2);
}

/// Closed-form e(x) = nu^2 sigma_s^2 / (sigma_s^2 + x^2 nu^2) with b(x) = x^2.
inline SensingCostTable gaussian_sensing_cost(const ScalarScenario& sc) {
    const auto& gx = sc.grids.x;
    SensingCostTable t{Vector(static_cast<Eigen::Index>(gx.size())), Vector(static_cast<Eigen::Index>(gx.size()))};
    for (std::size_t i = 0; i < gx.size(); ++i) {
        const double x = gx[i];
        t.e[static_cast<Eigen::Index>(i)] = sc.state_variance * sc.sensing_noise_variance /
                                            (sc.sensing_noise_variance + x * x * sc.state_variance);
        t.b[static_cast<Eigen::Index>(i)] = x * x;
    }
    return t;
}

/// P_S_tilde as a discretized mixture over x of N(0, estimate_variance(x)).
inline Pmf estimate_distribution(const ScalarScenario& sc, const Pmf& p_x, double truncation_tol = 1e-6) {
    const auto& gx = sc.grids.x;
    if (p_x.size() != gx.size()) throw DimensionMismatch("estimate_distribution: P_X length differs from X grid");
    const auto edges = sc.grids.s_tilde.edges();
    const auto n = static_cast<Eigen::Index>(sc.grids.s_tilde.size());
    Vector acc = Vector::Zero(n);
    Vector row(n);
    double lost = 0.0;
    for (std::size_t ix = 0; ix < gx.size(); ++ix) {
        if (p_x[ix] <= 0.0) continue;
        lost += p_x[ix] * detail::discretize_gaussian(edges, 0.0, estimate_variance(sc, gx[ix]), row.data());
        acc += p_x[ix] * row;
    }
    if (lost > truncation_tol) throw TruncationError("estimate grid does not span the estimate mixture", lost);
    return normalize(acc);
}

/// P_S_tilde by pushing P_X * Q_{Z|X} through the estimator table onto the nearest estimate bin.
inline Pmf estimate_distribution_generic(const ScalarScenario& sc, const Pmf& p_x, const CondPmf& sensing,
                                         const Pmf& prior, const EstimatorTable& est,
                                         double truncation_tol = 1e-6) {
    const auto nx = sc.grids.x.size();
    const auto ns = sc.grids.s.size();
    const auto nz = sc.grids.z.size();
    const auto& gt = sc.grids.s_tilde;
    if (p_x.size() != nx) throw DimensionMismatch("estimate_distribution_generic: P_X length differs from X grid");
    const auto edges = gt.edges();
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(gt.size()));
    double lost = 0.0;
    const auto& q = sensing.rows();
    for (std::size_t ix = 0; ix < nx; ++ix) {
        if (p_x[ix] <= 0.0) continue;
        for (std::size_t iz = 0; iz < nz; ++iz) {
            if (!est.reachable(ix, iz)) continue;
            double pz = 0.0;
            for (std::size_t is = 0; is < ns; ++is)
                pz += prior[is] * q(static_cast<Eigen::Index>(ix * ns + is), static_cast<Eigen::Index>(iz));
            const double v = est(ix, iz);
            const double m = p_x[ix] * pz;
            if (v < edges.front() || v > edges.back()) lost += m;
            acc[static_cast<Eigen::Index>(gt.nearest(v))] += m;
        }
    }
    if (lost > truncation_tol) throw TruncationError("estimate grid does not span the pushed-forward estimates", lost);
    return normalize(acc);
}

/// Everything the scalar pipeline needs, built once per scenario.
struct ScalarModel {
    ScalarScenario scenario;
    Pmf prior;
    CondPmf comm;
    SensingCostTable costs;
    // Present only when built with the generic discrete sensing path.
    std::optional<CondPmf> sensing;
    std::optional<EstimatorTable> estimator;

    bool generic() const noexcept { return sensing.has_value(); }

    Pmf estimates(const Pmf& p_x) const {
        if (generic()) return estimate_distribution_generic(scenario, p_x, *sensing, prior, *estimator);
        return estimate_distribution(scenario, p_x);
    }
};

/// Builds the scalar model. With `generic_sensing` the sensing cost and estimate
/// distribution come from the discretized sensing channel; otherwise the
/// linear-Gaussian closed forms are used.
inline ScalarModel build_scalar_model(const ScalarScenario& sc, bool generic_sensing = false) {
    sc.validate();
    ScalarModel m{sc, state_prior(sc), build_comm_channel(sc), {}, std::nullopt, std::nullopt};
    if (generic_sensing) {
        m.sensing = build_sensing_channel(sc);
        m.estimator = optimal_estimator(sc, *m.sensing, m.prior);
        m.costs = sensing_cost(sc, *m.sensing, m.prior, *m.estimator);
    } else {
        m.costs = gaussian_sensing_cost(sc);
    }
    return m;
}

}  // namespace casopt
