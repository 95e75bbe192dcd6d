// SPDX-License-Identifier: Apache-2.0
#pragma once

// Gaussian MIMO communication-assisted sensing.
//
//   Z = H_s X + N_s,  Y = H_c X + N_c,  columns of H_s ~ CN(0, Sigma_s) (M_s of them).
//
// For a transmit covariance R the MMSE error covariance of each column is
// P = (R / sigma_s^2 + Sigma_s^-1)^-1, the estimate covariance is Sigma_s - P and
// the end-to-end distortion is D_s + tr(D), where D is the reverse water-filling
// distortion matrix whose rate matches the capacity C(R).
//
// Information quantities are computed in nats and reported in bits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "casopt/barrier.hpp"
#include "casopt/errors.hpp"
#include "casopt/linalg.hpp"
#include "casopt/prob.hpp"
#include "casopt/rng.hpp"

namespace casopt {

struct MimoScenario {
    CMatrix hc;                   // M_c x N_t
    CMatrix sigma;                // N_t x N_t
    double sensing_noise = 1.0;   // sigma_s^2
    double comm_noise = 1.0;      // sigma_c^2
    double power = 1.0;           // P_T
    int ms = 1;

    Eigen::Index nt() const noexcept { return sigma.rows(); }
    Eigen::Index mc() const noexcept { return hc.rows(); }

    void validate() const {
        if (sigma.rows() == 0 || sigma.rows() != sigma.cols()) throw DimensionMismatch("state covariance must be square");
        if (hc.cols() != sigma.rows()) throw DimensionMismatch("channel columns must match the transmit dimension");
        if (hc.rows() == 0) throw DimensionMismatch("channel needs at least one receive antenna");
        const double scale = std::max(1.0, sigma.norm());
        if (hermitian_defect(sigma) > 1e-10 * scale) throw InvalidArgument("state covariance is not Hermitian");
        if (min_eigenvalue(sigma) < -1e-9 * scale) throw InvalidArgument("state covariance is not positive semidefinite");
        if (!(sensing_noise > 0.0) || !(comm_noise > 0.0)) throw InvalidArgument("noise variances must be positive");
        if (!(power > 0.0)) throw InvalidArgument("power budget must be positive");
        if (ms < 1) throw InvalidArgument("at least one sensing receive antenna is required");
    }
};

/// Hermitian PSD matrix up to tolerance; tiny negative eigenvalues are clipped.
inline CMatrix make_covariance(const CMatrix& a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("covariance must be square");
    if (hermitian_defect(a) > 1e-10 * std::max(1.0, a.norm())) throw InvalidArgument("covariance is not Hermitian");
    return psd_clip(a, 1e-9);
}

inline double snr_db_to_noise(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

namespace detail {

inline CMatrix identity(Eigen::Index n) { return CMatrix::Identity(n, n); }

inline CMatrix inverse_pd(const CMatrix& a) {
    Eigen::LLT<CMatrix> llt(hermitian_part(a));
    if (llt.info() != Eigen::Success) throw Error("matrix is not positive definite");
    return llt.solve(identity(a.rows()));
}

}  // namespace detail

/// Per-column MMSE error covariance P. Uses Sigma^1/2 so that singular Sigma is allowed.
inline CMatrix posterior_covariance(const CMatrix& r, const MimoScenario& sc) {
    const CMatrix t = psd_sqrt(sc.sigma);
    const CMatrix m = detail::identity(sc.nt()) + t * r * t / sc.sensing_noise;
    return hermitian_part(t * hermitian_part(m).llt().solve(t));
}

inline double sensing_distortion(const CMatrix& r, const MimoScenario& sc) {
    return static_cast<double>(sc.ms) * posterior_covariance(r, sc).trace().real();
}

inline CMatrix estimate_covariance(const CMatrix& r, const MimoScenario& sc) {
    return hermitian_part(sc.sigma - posterior_covariance(r, sc));
}

inline double capacity_nats(const CMatrix& r, const MimoScenario& sc) {
    const CMatrix m = detail::identity(sc.mc()) + sc.hc * r * sc.hc.adjoint() / sc.comm_noise;
    return std::max(0.0, logdet_pd(m));
}

inline double capacity(const CMatrix& r, const MimoScenario& sc) { return nats_to_bits(capacity_nats(r, sc)); }

struct GaussianRd {
    double rate_bits = 0.0;
    double distortion = 0.0;  // tr(D)
    double level = 0.0;       // water level theta
    CMatrix d;
};

/// Reverse water-filling at distortion budget `dc`: d_i = min(theta, r_i), sum d_i = min(dc, tr R).
inline GaussianRd gaussian_rd(const CMatrix& rs, double dc, int ms) {
    if (!(dc > 0.0)) throw InvalidArgument("distortion budget must be positive");
    if (ms < 1) throw InvalidArgument("at least one sensing receive antenna is required");
    EigenDecomposition e = hermitian_eig(rs);
    e.values = e.values.cwiseMax(0.0);
    const double total = e.values.sum();
    GaussianRd out;
    if (dc >= total) {
        out.distortion = total;
        out.level = e.values.size() ? e.values[0] : 0.0;
        out.d = hermitian_part(e.reconstruct());
        return out;
    }
    auto used = [&](double theta) { return e.values.cwiseMin(theta).sum(); };
    double lo = 0.0, hi = e.values[0];
    for (int it = 0; it < 200 && hi - lo > 1e-16 * e.values[0]; ++it) {
        const double mid = 0.5 * (lo + hi);
        (used(mid) > dc ? hi : lo) = mid;
    }
    const double theta = 0.5 * (lo + hi);
    double rate = 0.0;
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
        if (e.values[i] > theta) rate += std::log(e.values[i] / theta);
    out.rate_bits = nats_to_bits(static_cast<double>(ms) * rate);
    out.level = theta;
    e.values = e.values.cwiseMin(theta);
    out.distortion = e.values.sum();
    out.d = hermitian_part(e.reconstruct());
    return out;
}

/// Inverse of gaussian_rd: the smallest tr(D) whose rate M_s log det(R/D) does not exceed `rate_bits`.
inline GaussianRd gaussian_dr(const CMatrix& rs, double rate_bits, int ms) {
    if (!(rate_bits >= 0.0)) throw InvalidArgument("rate must be non-negative");
    if (ms < 1) throw InvalidArgument("at least one sensing receive antenna is required");
    EigenDecomposition e = hermitian_eig(rs);
    e.values = e.values.cwiseMax(0.0);
    GaussianRd out;
    const double rho = bits_to_nats(rate_bits) / static_cast<double>(ms);
    Eigen::Index positive = 0;
    while (positive < e.values.size() && e.values[positive] > 0.0) ++positive;
    if (rho <= 0.0 || positive == 0) {
        out.distortion = e.values.sum();
        out.level = positive ? e.values[0] : 0.0;
        out.d = hermitian_part(e.reconstruct());
        return out;
    }
    // With the k largest eigenvalues above the level: k log(theta) = sum_{i<k} log r_i - rho.
    double log_sum = 0.0;
    double theta = 0.0;
    for (Eigen::Index k = 1; k <= positive; ++k) {
        log_sum += std::log(e.values[k - 1]);
        theta = std::exp((log_sum - rho) / static_cast<double>(k));
        if (k == positive || theta >= e.values[k]) break;
    }
    out.rate_bits = rate_bits;
    out.level = theta;
    e.values = e.values.cwiseMin(theta);
    out.distortion = e.values.sum();
    out.d = hermitian_part(e.reconstruct());
    return out;
}

struct EndToEnd {
    double ds = 0.0;
    double dc = 0.0;
    double total = 0.0;  // D_s + tr(D)
    double capacity_bits = 0.0;
    double average = 0.0;  // total / (M_s N_t)
};

inline EndToEnd end_to_end(const CMatrix& r, const MimoScenario& sc) {
    EndToEnd out;
    const CMatrix p = posterior_covariance(r, sc);
    out.ds = static_cast<double>(sc.ms) * p.trace().real();
    out.capacity_bits = capacity(r, sc);
    out.dc = gaussian_dr(hermitian_part(sc.sigma - p), out.capacity_bits, sc.ms).distortion;
    out.total = out.ds + out.dc;
    out.average = out.total / (static_cast<double>(sc.ms) * static_cast<double>(sc.nt()));
    return out;
}

/// Restriction of a scenario to the range of Sigma_s.
struct Deflation {
    MimoScenario reduced;
    CMatrix basis;  // N_t x r, orthonormal columns
    bool trivial = true;

    CMatrix lift(const CMatrix& r) const { return trivial ? r : CMatrix(basis * r * basis.adjoint()); }
    CMatrix project(const CMatrix& r) const { return trivial ? r : CMatrix(basis.adjoint() * r * basis); }
};

inline Deflation deflate(const MimoScenario& sc, double rel_tol = 1e-12) {
    sc.validate();
    const EigenDecomposition e = hermitian_eig(sc.sigma);
    const double cut = rel_tol * std::max(e.values[0], 0.0);
    Eigen::Index r = 0;
    while (r < e.values.size() && e.values[r] > cut) ++r;
    Deflation out;
    out.reduced = sc;
    out.basis = detail::identity(sc.nt());
    if (r == sc.nt()) return out;
    if (r == 0) throw InvalidArgument("state covariance is zero");
    out.trivial = false;
    out.basis = e.vectors.leftCols(r);
    out.reduced.sigma = e.values.head(r).cast<cdouble>().asDiagonal();
    out.reduced.hc = sc.hc * out.basis;
    return out;
}

// ---------------------------------------------------------------------------
// Baselines

inline CMatrix isotropic(const MimoScenario& sc) { return (sc.power / static_cast<double>(sc.nt())) * detail::identity(sc.nt()); }

namespace detail {

inline CMatrix water_filled(const EigenDecomposition& e, double power) {
    std::vector<double> gains;
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
        if (e.values[i] > 1e-14 * std::max(1.0, e.values[0])) gains.push_back(e.values[i]);
    const WaterFill wf = water_fill(gains, power);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(e.values.size());
    for (std::size_t i = 0; i < wf.powers.size(); ++i) p[static_cast<Eigen::Index>(i)] = wf.powers[i];
    return hermitian_part(e.vectors * p.asDiagonal() * e.vectors.adjoint());
}

}  // namespace detail

/// Capacity-achieving covariance: water-filling over the eigenmodes of H_c^H H_c / sigma_c^2.
inline CMatrix baseline_comm_optimal(const MimoScenario& sc) {
    sc.validate();
    const EigenDecomposition e = hermitian_eig(sc.hc.adjoint() * sc.hc / sc.comm_noise);
    if (!(e.values[0] > 0.0)) return isotropic(sc);
    return detail::water_filled(e, sc.power);
}

/// MMSE-minimizing covariance: p_i = max(0, c - sigma_s^2 / lambda_i) in the eigenbasis of Sigma_s.
inline CMatrix baseline_sensing_optimal(const MimoScenario& sc) {
    sc.validate();
    const EigenDecomposition e = hermitian_eig(sc.sigma / sc.sensing_noise);
    if (!(e.values[0] > 0.0)) return isotropic(sc);
    return detail::water_filled(e, sc.power);
}

namespace detail {

/// log det(I + G R G^H / noise) with gradient and Hessian in Hermitian coordinates.
inline void logdet_channel(const HermitianBasis& basis, const CMatrix& g, double noise, const CMatrix& r, double& value,
                           Eigen::VectorXd* grad, Matrix* hess) {
    const CMatrix m = noise * identity(g.rows()) + g * r * g.adjoint();
    const double ld = logdet_pd(m);
    value = ld - static_cast<double>(g.rows()) * std::log(noise);
    if (!std::isfinite(ld) || (!grad && !hess)) return;
    const CMatrix q = hermitian_part(g.adjoint() * inverse_pd(m) * g);
    if (grad) *grad = basis.linear(q);
    if (hess) *hess = -basis.bilinear(q, q);
}

}  // namespace detail

struct WeightedMiConfig {
    BarrierConfig barrier{.t_initial = 100.0};
};

/// argmax beta C(R) + (1 - beta) log det(I + Sigma_s R / sigma_s^2) subject to tr(R) <= P_T, R >= 0.
inline CMatrix weighted_mi_optimal(const MimoScenario& sc, double beta, const WeightedMiConfig& cfg = {}) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("weight must lie in [0, 1]");
    sc.validate();
    if (beta == 1.0) return baseline_comm_optimal(sc);
    const Eigen::Index n = sc.nt();
    const HermitianBasis basis(n);
    const CMatrix t = psd_sqrt(sc.sigma);
    BarrierProblem prob;
    prob.dim = basis.dim();
    prob.objective = [&](const Eigen::VectorXd& x, SmoothValue& out, bool want_hess) {
        const CMatrix r = basis.matrix(x);
        double vc = 0.0, vs = 0.0;
        Eigen::VectorXd gc, gs;
        Matrix hc, hs;
        detail::logdet_channel(basis, sc.hc, sc.comm_noise, r, vc, &gc, want_hess ? &hc : nullptr);
        detail::logdet_channel(basis, t, sc.sensing_noise, r, vs, &gs, want_hess ? &hs : nullptr);
        if (!std::isfinite(vc) || !std::isfinite(vs)) return false;
        out.value = -(beta * vc + (1.0 - beta) * vs);
        out.grad = -(beta * gc + (1.0 - beta) * gs);
        if (want_hess) out.hess = -(beta * hc + (1.0 - beta) * hs);
        return true;
    };
    prob.barriers.push_back(BarrierTerm{"R >= 0", static_cast<double>(n), [&](const Eigen::VectorXd& x, SmoothValue& out, bool want_hess) {
                                            const CMatrix r = basis.matrix(x);
                                            const double ld = logdet_pd(r);
                                            if (!std::isfinite(ld)) return false;
                                            const CMatrix inv = detail::inverse_pd(r);
                                            out.value = -ld;
                                            out.grad = -basis.linear(inv);
                                            if (want_hess) out.hess = basis.bilinear(inv, inv);
                                            return true;
                                        }});
    Eigen::VectorXd trace_row = Eigen::VectorXd::Zero(basis.dim());
    trace_row.head(n).setOnes();
    prob.barriers.push_back(affine_barrier("tr R <= P_T", trace_row, sc.power));
    const Eigen::VectorXd x0 = basis.coords(0.5 * isotropic(sc));
    const BarrierResult res = barrier_solve(prob, x0, cfg.barrier);
    return make_covariance(basis.matrix(res.x));
}

inline std::vector<double> beta_grid(std::size_t points = 11) {
    if (points < 2) throw InvalidArgument("weight grid needs at least 2 points");
    std::vector<double> b(points);
    for (std::size_t i = 0; i < points; ++i) b[i] = static_cast<double>(i) / static_cast<double>(points - 1);
    return b;
}

struct HeuristicResult {
    CMatrix r;
    double beta = 0.0;
    EndToEnd value;
    std::vector<double> totals;  // end-to-end distortion per grid weight
};

/// Best end-to-end covariance among the weighted-MI maximizers over `betas`.
inline HeuristicResult baseline_heuristic(const MimoScenario& sc, const std::vector<double>& betas = beta_grid(),
                                          const WeightedMiConfig& cfg = {}) {
    if (betas.empty()) throw InvalidArgument("empty weight grid");
    HeuristicResult best;
    best.value.total = std::numeric_limits<double>::infinity();
    for (double b : betas) {
        const CMatrix r = weighted_mi_optimal(sc, b, cfg);
        const EndToEnd v = end_to_end(r, sc);
        best.totals.push_back(v.total);
        if (v.total < best.value.total) {
            best.r = r;
            best.beta = b;
            best.value = v;
        }
    }
    return best;
}

struct Exhaustive2d {
    CMatrix r;
    double split = 0.0;  // power on the strongest channel eigenvector
    EndToEnd value;
};

/// Grid search over power splits (p, P_T - p) along the right singular vectors of H_c; N_t = 2, diagonal Sigma_s.
inline Exhaustive2d exhaustive_2d(const MimoScenario& sc, std::size_t points = 2001) {
    sc.validate();
    if (sc.nt() != 2) throw DimensionMismatch("exhaustive search needs two transmit antennas");
    if (std::abs(sc.sigma(0, 1)) > 1e-12 * std::max(1.0, sc.sigma.norm()))
        throw InvalidArgument("exhaustive search needs a diagonal state covariance");
    if (points < 2) throw InvalidArgument("exhaustive search needs at least 2 grid points");
    const EigenDecomposition e = hermitian_eig(sc.hc.adjoint() * sc.hc);
    // With H_c = 0 every basis is a singular basis; take the one that diagonalizes Sigma_s.
    const CMatrix v = e.values[0] > 0.0 ? e.vectors : detail::identity(2);
    Exhaustive2d best;
    best.value.total = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points; ++i) {
        const double p = sc.power * static_cast<double>(i) / static_cast<double>(points - 1);
        Eigen::Vector2d diag(p, sc.power - p);
        const CMatrix r = hermitian_part(v * diag.cast<cdouble>().asDiagonal() * v.adjoint());
        const EndToEnd val = end_to_end(r, sc);
        if (val.total < best.value.total) {
            best.r = r;
            best.split = p;
            best.value = val;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Successive convex approximation

/// First-order expansion of R_s~(R) and log det R_s~(R) around R_0.
struct ScaLinearization {
    CMatrix r0;
    CMatrix p;         // (R_0 / sigma_s^2 + Sigma_s^-1)^-1
    CMatrix base;      // Sigma_s - P
    CMatrix base_inv;
    double base_logdet = 0.0;
    double inv_noise = 0.0;  // 1 / sigma_s^2

    CMatrix r_tilde(const CMatrix& r) const { return hermitian_part(base + inv_noise * p * (r - r0) * p); }

    double f(const CMatrix& r) const {
        return base_logdet + inv_noise * (base_inv * p * (r - r0) * p).trace().real();
    }

    /// G with f(R) = f(R_0) + Re tr(G (R - R_0)).
    CMatrix f_gradient() const { return hermitian_part(inv_noise * p * base_inv * p); }
};

inline ScaLinearization sca_linearize(const CMatrix& r0, const MimoScenario& sc) {
    ScaLinearization lin;
    lin.inv_noise = 1.0 / sc.sensing_noise;
    CMatrix r = r0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        lin.r0 = r;
        lin.p = posterior_covariance(r, sc);
        lin.base = hermitian_part(sc.sigma - lin.p);
        lin.base_logdet = logdet_pd(lin.base);
        if (std::isfinite(lin.base_logdet)) {
            lin.base_inv = detail::inverse_pd(lin.base);
            return lin;
        }
        r += (1e-8 * sc.power / static_cast<double>(sc.nt())) * detail::identity(sc.nt());
    }
    throw Error("estimate covariance is singular at the expansion point");
}

struct P3Config {
    BarrierConfig barrier{.t_initial = 100.0};
    double interior = 1e-7;  // expand at (1 - interior) R_0 + interior * P_T / (2 N_t) I
};

struct P3Solution {
    CMatrix r;
    CMatrix d;
    double objective = 0.0;   // D_s(R) + tr(D)
    double msst_slack = 0.0;  // C(R) - M_s (f(R) - log det D), nats
    double lmi_margin = 0.0;  // min eig(R~ - D)
    BarrierResult solver;
};

/// Convex subproblem: min D_s(R) + tr(D) s.t. C(R) >= M_s (f(R) - log det D), R~(R) >= D, R >= 0, tr R <= P_T.
inline P3Solution solve_p3(const CMatrix& r0, const MimoScenario& sc, const P3Config& cfg = {}) {
    sc.validate();
    const Eigen::Index n = sc.nt();
    const HermitianBasis basis(n);
    const Eigen::Index nb = basis.dim();
    // Expand at R_0 pulled strictly inside the cone and the budget; the start point is then the
    // expansion point itself and D = alpha R~ leaves half the capacity to spare.
    const CMatrix rs = (1.0 - cfg.interior) * make_covariance(r0) +
                       (cfg.interior * 0.5 * sc.power / static_cast<double>(n)) * detail::identity(n);
    const ScaLinearization lin = sca_linearize(rs, sc);
    const CMatrix fg = lin.f_gradient();
    const double ms = static_cast<double>(sc.ms);
    const double s2 = sc.sensing_noise;

    auto split = [&](const Eigen::VectorXd& x) {
        return std::pair<CMatrix, CMatrix>{basis.matrix(x.head(nb)), basis.matrix(x.tail(nb))};
    };

    BarrierProblem prob;
    prob.dim = 2 * nb;
    prob.objective = [&](const Eigen::VectorXd& x, SmoothValue& out, bool want_hess) {
        const auto [r, d] = split(x);
        const CMatrix p = posterior_covariance(r, sc);
        const CMatrix p2 = p * p;
        out.value = ms * p.trace().real() + d.trace().real();
        out.grad.resize(2 * nb);
        out.grad.head(nb) = -(ms / s2) * basis.linear(p2);
        out.grad.tail(nb) = basis.linear(detail::identity(n));
        if (want_hess) {
            out.hess = Matrix::Zero(2 * nb, 2 * nb);
            const Matrix k = basis.bilinear(p2, p);
            out.hess.topLeftCorner(nb, nb) = (ms / (s2 * s2)) * (k + k.transpose());
        }
        return true;
    };
    prob.barriers.push_back(concave_barrier("separation", [&](const Eigen::VectorXd& x, SmoothValue& out, bool want_hess) {
        const auto [r, d] = split(x);
        const double ldd = logdet_pd(d);
        if (!std::isfinite(ldd)) return false;
        double cap = 0.0;
        Eigen::VectorXd gc;
        Matrix hc;
        detail::logdet_channel(basis, sc.hc, sc.comm_noise, r, cap, &gc, want_hess ? &hc : nullptr);
        if (!std::isfinite(cap)) return false;
        const CMatrix dinv = detail::inverse_pd(d);
        out.value = cap - ms * (lin.f(r) - ldd);
        out.grad.resize(2 * nb);
        out.grad.head(nb) = gc - ms * basis.linear(fg);
        out.grad.tail(nb) = ms * basis.linear(dinv);
        if (want_hess) {
            out.hess = Matrix::Zero(2 * nb, 2 * nb);
            out.hess.topLeftCorner(nb, nb) = hc;
            out.hess.bottomRightCorner(nb, nb) = -ms * basis.bilinear(dinv, dinv);
        }
        return true;
    }));
    prob.barriers.push_back(BarrierTerm{"R~ - D >= 0", static_cast<double>(n), [&](const Eigen::VectorXd& x, SmoothValue& out, bool want_hess) {
                                            const auto [r, d] = split(x);
                                            const CMatrix m = lin.r_tilde(r) - d;
                                            const double ld = logdet_pd(m);
                                            if (!std::isfinite(ld)) return false;
                                            const CMatrix y = detail::inverse_pd(m);
                                            const CMatrix pyp = hermitian_part(lin.p * y * lin.p);
                                            const double c = lin.inv_noise;
                                            out.value = -ld;
                                            out.grad.resize(2 * nb);
                                            out.grad.head(nb) = -c * basis.linear(pyp);
                                            out.grad.tail(nb) = basis.linear(y);
                                            if (want_hess) {
                                                out.hess.resize(2 * nb, 2 * nb);
                                                out.hess.topLeftCorner(nb, nb) = (c * c) * basis.bilinear(pyp, pyp);
                                                const Matrix rd = -c * basis.bilinear(y * lin.p, lin.p * y);
                                                out.hess.topRightCorner(nb, nb) = rd;
                                                out.hess.bottomLeftCorner(nb, nb) = rd.transpose();
                                                out.hess.bottomRightCorner(nb, nb) = basis.bilinear(y, y);
                                            }
                                            return true;
                                        }});
    prob.barriers.push_back(BarrierTerm{"R >= 0", static_cast<double>(n), [&](const Eigen::VectorXd& x, SmoothValue& out, bool want_hess) {
                                            const CMatrix r = basis.matrix(x.head(nb));
                                            const double ld = logdet_pd(r);
                                            if (!std::isfinite(ld)) return false;
                                            const CMatrix inv = detail::inverse_pd(r);
                                            out.value = -ld;
                                            out.grad = Eigen::VectorXd::Zero(2 * nb);
                                            out.grad.head(nb) = -basis.linear(inv);
                                            if (want_hess) {
                                                out.hess = Matrix::Zero(2 * nb, 2 * nb);
                                                out.hess.topLeftCorner(nb, nb) = basis.bilinear(inv, inv);
                                            }
                                            return true;
                                        }});
    Eigen::VectorXd trace_row = Eigen::VectorXd::Zero(2 * nb);
    trace_row.head(n).setOnes();
    prob.barriers.push_back(affine_barrier("tr R <= P_T", trace_row, sc.power));

    const CMatrix rt = lin.r_tilde(lin.r0);
    const double ldt = logdet_pd(rt);
    const double cap = capacity_nats(lin.r0, sc);
    if (!std::isfinite(ldt)) throw InfeasibleStart("linearized estimate covariance is singular at the start point");
    if (!(cap > 0.0)) throw InfeasibleStart("zero capacity leaves no strictly feasible point");
    const double log_alpha = (-0.5 * cap - ms * ldt + ms * lin.f(lin.r0)) / (ms * static_cast<double>(n));
    if (!(log_alpha < 0.0)) throw InfeasibleStart("no strictly feasible distortion matrix at the start point");
    Eigen::VectorXd x0(2 * nb);
    x0.head(nb) = basis.coords(lin.r0);
    x0.tail(nb) = basis.coords(std::exp(log_alpha) * rt);

    P3Solution sol;
    sol.solver = barrier_solve(prob, x0, cfg.barrier);
    const auto [r, d] = split(sol.solver.x);
    sol.r = hermitian_part(r);
    sol.d = hermitian_part(d);
    sol.objective = sol.solver.objective;
    sol.msst_slack = capacity_nats(sol.r, sc) - ms * (lin.f(sol.r) - logdet_pd(sol.d));
    sol.lmi_margin = min_eigenvalue(lin.r_tilde(sol.r) - sol.d);
    return sol;
}

struct ScaConfig {
    std::size_t max_outer = 50;
    double rel_tol = 1e-6;
    double min_step = 1.0 / 1024.0;  // smallest fraction of the step toward the subproblem solution tried
    double max_extension = 64.0;     // largest multiple of that step tried when the full step is accepted
    P3Config p3;
};

struct ScaResult {
    CMatrix r;
    EndToEnd value;
    std::vector<double> history;  // true end-to-end distortion, starting with R_init
    std::size_t iterations = 0;
    bool converged = false;
    std::string diagnostic;
};

/// Algorithm loop: solve the convex subproblem at R_0, move toward its solution and re-expand.
/// The move is shortened until the true objective does not increase.
inline ScaResult sca_iterate(const MimoScenario& sc, std::optional<CMatrix> r_init = std::nullopt,
                             const ScaConfig& cfg = {}) {
    const Deflation defl = deflate(sc);
    const MimoScenario& red = defl.reduced;
    ScaResult out;
    if (red.hc.norm() == 0.0) {
        // Nothing can be delivered; the sensing-optimal covariance is the only sensible choice.
        out.r = baseline_sensing_optimal(sc);
        out.value = end_to_end(out.r, sc);
        out.history.push_back(out.value.total);
        out.converged = true;
        out.diagnostic = "zero channel";
        return out;
    }
    CMatrix r0 = r_init ? defl.project(make_covariance(*r_init)) : isotropic(red);
    if (r0.trace().real() > red.power * (1.0 + 1e-9)) throw InvalidArgument("initial covariance exceeds the power budget");
    double j0 = end_to_end(r0, red).total;
    out.history.push_back(j0);
    for (std::size_t k = 1; k <= cfg.max_outer; ++k) {
        out.iterations = k;
        P3Solution sub;
        try {
            sub = solve_p3(r0, red, cfg.p3);
        } catch (const Error& e) {
            out.diagnostic = e.what();
            break;
        }
        double step = 1.0;
        bool moved = false;
        CMatrix cand;
        double jc = 0.0;
        while (step >= cfg.min_step) {
            cand = hermitian_part(r0 + step * (sub.r - r0));
            jc = end_to_end(cand, red).total;
            if (jc <= j0) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            out.converged = true;
            break;
        }
        if (step == 1.0) {
            // The subproblem sees only a local model; keep doubling the move while it stays feasible and pays off.
            for (double ext = 2.0; ext <= cfg.max_extension; ext *= 2.0) {
                const CMatrix further = hermitian_part(r0 + ext * (sub.r - r0));
                if (further.trace().real() > red.power * (1.0 + 1e-12) || min_eigenvalue(further) < 0.0) break;
                const double jf = end_to_end(further, red).total;
                if (!(jf < jc)) break;
                cand = further;
                jc = jf;
            }
        }
        const double decrease = (j0 - jc) / std::max(j0, 1e-300);
        r0 = cand;
        j0 = jc;
        out.history.push_back(j0);
        if (decrease < cfg.rel_tol) {
            out.converged = true;
            break;
        }
    }
    out.r = defl.lift(r0);
    out.value = end_to_end(out.r, sc);
    return out;
}

// ---------------------------------------------------------------------------
// Random scenarios

struct MimoTrialSetup {
    Eigen::Index nt = 2;
    Eigen::Index mc = 2;
    int ms = 2;
    std::optional<CMatrix> sigma;  // fixed state covariance; random when absent
    double state_scale = 0.25;     // mean eigenvalue of a random state covariance
    double power = 1.0;
};

/// Rayleigh H_c (entries CN(0, 1)) and, unless fixed, Sigma_s = scale * G G^H / (2 N_t) with G in CN^{N_t x 2N_t}.
/// Streams 2 * trial and 2 * trial + 1 of `seed` feed the channel and the covariance.
inline MimoScenario draw_scenario(const MimoTrialSetup& setup, double snr_s_db, double snr_c_db, std::uint64_t seed,
                                  std::uint64_t trial) {
    MimoScenario sc;
    CounterRng ch(seed, 2 * trial);
    sc.hc.resize(setup.mc, setup.nt);
    for (Eigen::Index i = 0; i < setup.mc; ++i)
        for (Eigen::Index j = 0; j < setup.nt; ++j) sc.hc(i, j) = ch.complex_normal();
    if (setup.sigma) {
        sc.sigma = *setup.sigma;
    } else {
        CounterRng cs(seed, 2 * trial + 1);
        CMatrix g(setup.nt, 2 * setup.nt);
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = cs.complex_normal();
        sc.sigma = hermitian_part(setup.state_scale * g * g.adjoint() / static_cast<double>(2 * setup.nt));
    }
    sc.sensing_noise = snr_db_to_noise(snr_s_db);
    sc.comm_noise = snr_db_to_noise(snr_c_db);
    sc.power = setup.power;
    sc.ms = setup.ms;
    sc.validate();
    return sc;
}

}  // namespace casopt
