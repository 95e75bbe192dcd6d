// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "casopt/errors.hpp"

namespace casopt {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXd;

inline CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

inline double hermitian_defect(const CMatrix& a) { return (a - a.adjoint()).norm(); }

struct EigenDecomposition {
    Eigen::VectorXd values;  // descending
    CMatrix vectors;         // columns, unitary

    CMatrix reconstruct() const { return vectors * values.asDiagonal() * vectors.adjoint(); }
};

inline EigenDecomposition hermitian_eig(const CMatrix& a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("eigendecomposition needs a square matrix");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
    if (es.info() != Eigen::Success) throw Error("Hermitian eigendecomposition failed");
    const auto n = a.rows();
    EigenDecomposition out{Eigen::VectorXd(n), CMatrix(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values[i] = es.eigenvalues()[n - 1 - i];
        out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return out;
}

/// Clips eigenvalues in [-tol * max(1, |A|), 0) to zero; anything more negative is rejected.
inline CMatrix psd_clip(const CMatrix& a, double tol = 1e-9) {
    EigenDecomposition e = hermitian_eig(a);
    const double floor = -tol * std::max(1.0, e.values.cwiseAbs().maxCoeff());
    if (e.values.size() > 0 && e.values.minCoeff() < floor)
        throw InvalidArgument("matrix is not positive semidefinite within tolerance");
    e.values = e.values.cwiseMax(0.0);
    return hermitian_part(e.reconstruct());
}

/// Smallest eigenvalue of the Hermitian part.
inline double min_eigenvalue(const CMatrix& a) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

/// Hermitian square root of a PSD matrix.
inline CMatrix psd_sqrt(const CMatrix& a) {
    EigenDecomposition e = hermitian_eig(a);
    e.values = e.values.cwiseMax(0.0).cwiseSqrt();
    return hermitian_part(e.reconstruct());
}

/// Log-determinant of a Hermitian positive definite matrix; -inf when it is not.
inline double logdet_pd(const CMatrix& a) {
    Eigen::LLT<CMatrix> llt(hermitian_part(a));
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    const CMatrix& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double d = l(i, i).real();
        if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
        acc += 2.0 * std::log(d);
    }
    return acc;
}

struct WaterFill {
    std::vector<double> powers;
    double level = 0.0;  // theta
};

/// p_i = max(0, theta - 1/g_i) with sum p_i = budget; theta by bisection.
inline WaterFill water_fill(const std::vector<double>& gains, double budget, double tol = 1e-12) {
    if (gains.empty()) throw InvalidArgument("water-filling needs at least one mode");
    if (!(budget > 0.0)) throw InvalidArgument("water-filling budget must be positive");
    double inv_max = 0.0;
    double inv_min = std::numeric_limits<double>::infinity();
    for (double g : gains) {
        if (!(g > 0.0) || !std::isfinite(g)) throw InvalidArgument("water-filling gains must be positive");
        inv_max = std::max(inv_max, 1.0 / g);
        inv_min = std::min(inv_min, 1.0 / g);
    }
    auto used = [&](double theta) {
        double s = 0.0;
        for (double g : gains) s += std::max(0.0, theta - 1.0 / g);
        return s;
    };
    double lo = inv_min;
    double hi = inv_max + budget;
    for (int it = 0; it < 300 && hi - lo > tol * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (used(mid) > budget ? hi : lo) = mid;
    }
    WaterFill out;
    out.level = 0.5 * (lo + hi);
    out.powers.reserve(gains.size());
    for (double g : gains) out.powers.push_back(std::max(0.0, out.level - 1.0 / g));
    // Spread the last bisection residual over the active modes.
    double total = 0.0;
    std::size_t active = 0;
    for (double p : out.powers) {
        total += p;
        if (p > 0.0) ++active;
    }
    if (active > 0) {
        const double shift = (budget - total) / static_cast<double>(active);
        for (double& p : out.powers)
            if (p > 0.0) p += shift;
        out.level += shift;
    }
    return out;
}

/// Real coordinates of N x N Hermitian matrices: the N diagonal entries, then
/// (Re, Im) of each strictly upper entry in row-major order.
class HermitianBasis {
public:
    explicit HermitianBasis(Eigen::Index n) : n_(n) {
        if (n < 1) throw InvalidArgument("Hermitian basis needs a positive dimension");
        for (Eigen::Index i = 0; i < n; ++i) terms_.push_back(Term{{{i, i, cdouble(1.0, 0.0)}, {0, 0, cdouble(0.0, 0.0)}}, 1});
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                terms_.push_back(Term{{{i, j, cdouble(1.0, 0.0)}, {j, i, cdouble(1.0, 0.0)}}, 2});
                terms_.push_back(Term{{{i, j, cdouble(0.0, 1.0)}, {j, i, cdouble(0.0, -1.0)}}, 2});
            }
    }

    Eigen::Index n() const noexcept { return n_; }
    Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(terms_.size()); }

    CMatrix matrix(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != dim()) throw DimensionMismatch("coordinate vector does not match the basis");
        CMatrix m = CMatrix::Zero(n_, n_);
        for (Eigen::Index k = 0; k < dim(); ++k)
            for (int t = 0; t < terms_[k].count; ++t) m(terms_[k].e[t].a, terms_[k].e[t].b) += x[k] * terms_[k].e[t].c;
        return m;
    }

    Eigen::VectorXd coords(const CMatrix& m) const {
        if (m.rows() != n_ || m.cols() != n_) throw DimensionMismatch("matrix does not match the basis");
        const CMatrix h = hermitian_part(m);
        Eigen::VectorXd x(dim());
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < n_; ++i) x[k++] = h(i, i).real();
        for (Eigen::Index i = 0; i < n_; ++i)
            for (Eigen::Index j = i + 1; j < n_; ++j) {
                x[k++] = h(i, j).real();
                x[k++] = h(i, j).imag();
            }
        return x;
    }

    /// Basis matrix A_k.
    CMatrix element(Eigen::Index k) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim());
        x[k] = 1.0;
        return matrix(x);
    }

    /// g_k = Re tr(G A_k).
    Eigen::VectorXd linear(const CMatrix& g) const {
        Eigen::VectorXd out(dim());
        for (Eigen::Index k = 0; k < dim(); ++k) {
            cdouble acc = 0.0;
            for (int t = 0; t < terms_[k].count; ++t) acc += terms_[k].e[t].c * g(terms_[k].e[t].b, terms_[k].e[t].a);
            out[k] = acc.real();
        }
        return out;
    }

    /// K_kl = Re tr(X A_k Y A_l).
    Matrix bilinear(const CMatrix& x, const CMatrix& y) const {
        // tr(X E_ab Y E_cd) = X_da Y_bc. An off-diagonal pair contributes
        // alpha E_ij + conj(alpha) E_ji with alpha = 1 (Re) or i (Im), so the four
        // products below serve all four Re/Im combinations at once.
        const Eigen::Index n = n_;
        Matrix out(dim(), dim());
        std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
        pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
        const auto off = [n](std::size_t m) { return n + 2 * static_cast<Eigen::Index>(m); };

        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index p = 0; p < n; ++p) out(i, p) = (x(p, i) * y(i, p)).real();
            for (std::size_t m = 0; m < pairs.size(); ++m) {
                const auto [p, q] = pairs[m];
                const Eigen::Index l = off(m);
                // A = E_ii, B = beta E_pq + conj(beta) E_qp
                const cdouble h1 = x(q, i) * y(i, p);
                const cdouble h2 = x(p, i) * y(i, q);
                out(i, l) = (h1 + h2).real();
                out(i, l + 1) = -(h1 - h2).imag();
                // A = alpha E_pq + conj(alpha) E_qp, B = E_ii
                const cdouble g1 = x(i, p) * y(q, i);
                const cdouble g2 = x(i, q) * y(p, i);
                out(l, i) = (g1 + g2).real();
                out(l + 1, i) = -(g1 - g2).imag();
            }
        }
        for (std::size_t a = 0; a < pairs.size(); ++a) {
            const auto [i, j] = pairs[a];
            const Eigen::Index k = off(a);
            for (std::size_t b = 0; b < pairs.size(); ++b) {
                const auto [p, q] = pairs[b];
                const Eigen::Index l = off(b);
                const cdouble g1 = x(q, i) * y(j, p);
                const cdouble g2 = x(p, i) * y(j, q);
                const cdouble g3 = x(q, j) * y(i, p);
                const cdouble g4 = x(p, j) * y(i, q);
                out(k, l) = (g1 + g2 + g3 + g4).real();
                out(k, l + 1) = -(g1 - g2 + g3 - g4).imag();
                out(k + 1, l) = -(g1 + g2 - g3 - g4).imag();
                out(k + 1, l + 1) = (-g1 + g2 + g3 - g4).real();
            }
        }
        return out;
    }

    /// Reference evaluation of bilinear() straight from the basis matrices, O(dim^2 n^3).
    Matrix bilinear_reference(const CMatrix& x, const CMatrix& y) const {
        Matrix out(dim(), dim());
        for (Eigen::Index k = 0; k < dim(); ++k) {
            const CMatrix xay = x * element(k) * y;
            for (Eigen::Index l = 0; l < dim(); ++l) out(k, l) = (xay * element(l)).trace().real();
        }
        return out;
    }

private:
    struct Entry {
        Eigen::Index a, b;
        cdouble c;
    };
    struct Term {
        Entry e[2];
        int count;
    };
    Eigen::Index n_;
    std::vector<Term> terms_;
};

}  // namespace casopt
