#include "ppt/numerics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <lapacke.h>

namespace ppt {

Index EigenSystem::rank(double rel) const {
    if (c.size() == 0 || c(0) <= 0.0) return 0;
    const double cut = rel * c(0);
    Index r = 0;
    while (r < c.size() && c(r) > cut) ++r;
    return r;
}

EigenSystem eigendecompose_symmetric(const MatrixXd& K) {
    if (K.rows() != K.cols()) throw Error("eigendecompose: matrix is not square");
    const Index n = K.rows();
    EigenSystem es;
    if (n == 0) return es;
    const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw Error("eigendecompose: matrix is not symmetric");

    // LAPACK's relatively robust representation driver; several times faster
    // than Eigen's QR iteration at the sizes used here.
    MatrixXd A = K;
    VectorXd w(n);
    MatrixXd Z(n, n);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    lapack_int found = 0;
    const lapack_int ln = static_cast<lapack_int>(n);
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'A', 'L', ln, A.data(), ln, 0.0, 0.0, 0, 0, 0.0,
                                           &found, w.data(), Z.data(), ln, support.data());
    if (info != 0 || found != ln) throw Error("eigendecompose: solver failed");

    // ascending from LAPACK; flip to descending
    es.c = w.reverse();
    es.Gamma = Z.rowwise().reverse();
    const double top = std::max(es.c(0), 0.0);
    for (Index i = 0; i < n; ++i) {
        if (es.c(i) < 0.0) {
            if (es.c(i) < -1e-8 * top && es.c(i) < -1e-300) throw Error("matrix not PSD");
            es.c(i) = 0.0;
        }
    }
    return es;
}

MatrixXd inverse_sqrt_spd(const MatrixXd& S) {
    if (S.rows() != S.cols()) throw Error("inverse_sqrt_spd: matrix is not square");
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw Error("inverse_sqrt_spd: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(S);
    if (solver.info() != Eigen::Success) throw Error("inverse_sqrt_spd: solver failed");
    const VectorXd& lam = solver.eigenvalues();
    const double lmax = lam.maxCoeff();
    if (!(lmax > 0.0) || lam.minCoeff() <= 1e-12 * lmax) throw Error("matrix is not SPD");
    const MatrixXd& V = solver.eigenvectors();
    MatrixXd M = V * lam.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
    return 0.5 * (M + M.transpose());
}

double chi2_cdf(double df, double x) {
    if (!(df > 0.0)) throw Error("chi2_cdf: degrees of freedom must be positive");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

double chi2_quantile(double df, double p) {
    if (!(df > 0.0)) throw Error("chi2_quantile: degrees of freedom must be positive");
    if (!(p > 0.0 && p < 1.0)) throw Error("chi2_quantile: probability must lie in (0, 1)");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), p);
}

double f_cdf(double d1, double d2, double x) {
    if (!(d1 > 0.0 && d2 > 0.0)) throw Error("f_cdf: degrees of freedom must be positive");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::cdf(boost::math::fisher_f_distribution<double>(d1, d2), x);
}

namespace {

// Objective written as 1/2 x^T F x + c^T x.
struct QpForm {
    MatrixXd F;
    VectorXd c;
};

QpForm qp_form(const QpProblem& prob, bool regularize) {
    const Index J = prob.g.size();
    if (prob.F.rows() != J || prob.F.cols() != J || prob.anchor.size() != J)
        throw Error("solve_nonneg_qp: dimension mismatch");
    QpForm q;
    q.F = 0.5 * (prob.F + prob.F.transpose());
    if (regularize && J > 0) {
        const double tr = q.F.trace();
        const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(q.F, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .minCoeff();
        const double ref = std::max(std::abs(tr), 1e-300);
        if (lmin < -1e-8 * ref) throw Error("solve_nonneg_qp: curvature matrix is indefinite");
        if (lmin < 1e-12 * ref) q.F.diagonal().array() += 1e-12 * std::max(ref, 1.0);
    }
    q.c = -prob.g - q.F * prob.anchor;
    return q;
}

}  // namespace

VectorXd solve_nonneg_qp(const QpProblem& prob) {
    const QpForm q = qp_form(prob, true);
    const Index J = q.c.size();
    VectorXd x = prob.anchor.cwiseMax(0.0);
    std::vector<bool> active(J);
    for (Index i = 0; i < J; ++i) active[i] = (x(i) == 0.0);

    const double tol = 1e-13 * (1.0 + q.c.cwiseAbs().maxCoeff() + q.F.cwiseAbs().maxCoeff());
    const int max_iter = 50 * static_cast<int>(J + 1);
    for (int it = 0; it < max_iter; ++it) {
        std::vector<Index> fr;
        for (Index i = 0; i < J; ++i)
            if (!active[i]) fr.push_back(i);

        VectorXd target = VectorXd::Zero(J);
        if (!fr.empty()) {
            const Index m = static_cast<Index>(fr.size());
            MatrixXd Ff(m, m);
            VectorXd cf(m);
            for (Index a = 0; a < m; ++a) {
                cf(a) = q.c(fr[a]);
                for (Index b = 0; b < m; ++b) Ff(a, b) = q.F(fr[a], fr[b]);
            }
            const VectorXd xf = Ff.ldlt().solve(-cf);
            for (Index a = 0; a < m; ++a) target(fr[a]) = xf(a);
        }

        bool feasible = true;
        for (Index i : fr)
            if (target(i) < 0.0) feasible = false;

        if (feasible) {
            x = target;
            const VectorXd grad = q.F * x + q.c;
            Index worst = -1;
            double most_negative = -tol;
            for (Index i = 0; i < J; ++i) {
                if (active[i] && grad(i) < most_negative) {
                    most_negative = grad(i);
                    worst = i;
                }
            }
            if (worst < 0) return x;
            active[worst] = false;
        } else {
            const VectorXd p = target - x;
            double step = 1.0;
            Index blocking = -1;
            for (Index i : fr) {
                if (p(i) < 0.0) {
                    const double t = -x(i) / p(i);
                    if (t < step) {
                        step = t;
                        blocking = i;
                    }
                }
            }
            x += step * p;
            if (blocking >= 0) {
                x(blocking) = 0.0;
                active[blocking] = true;
            }
            for (Index i = 0; i < J; ++i) x(i) = std::max(x(i), 0.0);
        }
    }
    throw Error("solve_nonneg_qp: active-set iteration limit reached");
}

double qp_kkt_residual(const QpProblem& prob, const VectorXd& x) {
    const QpForm q = qp_form(prob, false);
    const VectorXd grad = q.F * x + q.c;
    double r = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        r = std::max(r, -x(i));
        if (x(i) > 0.0)
            r = std::max(r, std::abs(grad(i)));
        else
            r = std::max(r, -grad(i));
    }
    return r;
}

NelderMeadResult nelder_mead(const std::function<double(const VectorXd&)>& f, const VectorXd& x0,
                             const VectorXd& lower, const VectorXd& upper,
                             const NelderMeadOptions& opt) {
    const Index d = x0.size();
    auto clamp = [&](VectorXd v) { return VectorXd(v.cwiseMax(lower).cwiseMin(upper)); };
    NelderMeadResult res;
    auto eval = [&](const VectorXd& v) {
        ++res.evals;
        const double y = f(v);
        return std::isfinite(y) ? y : std::numeric_limits<double>::infinity();
    };

    std::vector<VectorXd> pts(d + 1);
    std::vector<double> val(d + 1);
    pts[0] = clamp(x0);
    val[0] = eval(pts[0]);
    for (Index k = 0; k < d; ++k) {
        VectorXd v = pts[0];
        v(k) += opt.step;
        if (v(k) > upper(k)) v(k) = pts[0](k) - opt.step;
        pts[k + 1] = clamp(v);
        val[k + 1] = eval(pts[k + 1]);
    }

    std::vector<Index> order(d + 1);
    while (res.evals < opt.max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Index a, Index b) { return val[a] < val[b]; });
        const Index best = order.front(), worst = order.back(), second = order[d > 0 ? d - 1 : 0];

        double diam = 0.0;
        for (Index k = 0; k <= d; ++k)
            diam = std::max(diam, (pts[k] - pts[best]).cwiseAbs().maxCoeff());
        if (diam < opt.xtol && std::abs(val[worst] - val[best]) <= opt.ftol * (1.0 + std::abs(val[best]))) {
            res.converged = true;
            break;
        }

        VectorXd centroid = VectorXd::Zero(d);
        for (Index k = 0; k <= d; ++k)
            if (k != worst) centroid += pts[k];
        centroid /= static_cast<double>(d);

        const VectorXd xr = clamp(centroid + (centroid - pts[worst]));
        const double fr = eval(xr);
        if (fr < val[best]) {
            const VectorXd xe = clamp(centroid + 2.0 * (centroid - pts[worst]));
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                val[worst] = fe;
            } else {
                pts[worst] = xr;
                val[worst] = fr;
            }
            continue;
        }
        if (fr < val[second]) {
            pts[worst] = xr;
            val[worst] = fr;
            continue;
        }
        const bool outside = fr < val[worst];
        const VectorXd xc = outside ? clamp(centroid + 0.5 * (xr - centroid))
                                    : clamp(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = eval(xc);
        if (fc < std::min(fr, val[worst])) {
            pts[worst] = xc;
            val[worst] = fc;
            continue;
        }
        for (Index k = 0; k <= d; ++k) {
            if (k == best) continue;
            pts[k] = clamp(pts[best] + 0.5 * (pts[k] - pts[best]));
            val[k] = eval(pts[k]);
        }
    }

    Index best = 0;
    for (Index k = 1; k <= d; ++k)
        if (val[k] < val[best]) best = k;
    res.x = pts[best];
    res.value = val[best];
    return res;
}

}  // namespace ppt
