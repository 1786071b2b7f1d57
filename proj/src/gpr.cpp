#include "ppt/gpr.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "ppt/numerics.hpp"

namespace ppt {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
constexpr double kInf = std::numeric_limits<double>::infinity();

double sample_variance(const VectorXd& Y) {
    const Index n = Y.size();
    if (n < 2) return Y.squaredNorm();
    return (Y.array() - Y.mean()).square().sum() / static_cast<double>(n - 1);
}

VcmFit zero_response_fit(Index J, FitMethod m) {
    VcmFit f;
    f.tau2 = VectorXd::Zero(J);
    f.loglik = kInf;
    f.converged = true;
    f.method = m;
    return f;
}

Index rank_of(const MatrixXd& G) {
    if (G.isDiagonal()) {
        const VectorXd d = G.diagonal().cwiseAbs();
        const double top = d.maxCoeff();
        if (top <= 0.0) return 0;
        return (d.array() > 1e-10 * top).count();
    }
    const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues();
    const double top = ev.maxCoeff();
    if (top <= 0.0) return 0;
    return (ev.array() > 1e-10 * top).count();
}

MatrixXd covariance(const VcmSpec& spec, const VectorXd& tau2) {
    if (static_cast<Index>(spec.G.size()) != tau2.size()) throw Error("tau2 length does not match components");
    const Index n = spec.G.front().rows();
    MatrixXd S = MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < spec.G.size(); ++j)
        if (tau2(j) != 0.0) S += tau2(j) * spec.G[j];
    return S;
}

// Cholesky pieces of Sigma needed by both fitters.
struct CovState {
    bool ok = false;
    double loglik = -kInf;
    VectorXd alpha;  // Sigma^{-1} Y
    MatrixXd Sinv;
};

CovState cov_state(const VcmSpec& spec, const VectorXd& tau2, const VectorXd& Y, bool need_inverse) {
    CovState st;
    const MatrixXd S = covariance(spec, tau2);
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return st;
    const auto L = llt.matrixL();
    double logdet = 0.0;
    for (Index i = 0; i < S.rows(); ++i) {
        const double d = llt.matrixLLT()(i, i);
        if (!(d > 0.0)) return st;
        logdet += 2.0 * std::log(d);
    }
    (void)L;
    st.alpha = llt.solve(Y);
    st.loglik = -0.5 * (static_cast<double>(Y.size()) * kLog2Pi + logdet + Y.dot(st.alpha));
    if (need_inverse) st.Sinv = llt.solve(MatrixXd::Identity(S.rows(), S.cols()));
    st.ok = std::isfinite(st.loglik);
    return st;
}

}  // namespace

std::string to_string(GprModel m) {
    switch (m) {
        case GprModel::H0: return "h0";
        case GprModel::H1: return "h1";
        case GprModel::H1Prime: return "h1prime";
        case GprModel::Pseudo: return "pseudo";
    }
    return "?";
}

GprModel parse_gpr_model(const std::string& s) {
    if (s == "h0") return GprModel::H0;
    if (s == "h1") return GprModel::H1;
    if (s == "h1prime") return GprModel::H1Prime;
    if (s == "pseudo") return GprModel::Pseudo;
    throw Error("unknown model '" + s + "' (expected h0, h1, h1prime or pseudo)");
}

double marginal_loglik(const VcmSpec& spec, const VectorXd& tau2, const VectorXd& Y) {
    if (spec.G.empty()) throw Error("marginal_loglik: no components");
    const CovState st = cov_state(spec, tau2, Y, false);
    if (!st.ok) throw Error("marginal_loglik: singular covariance");
    return st.loglik;
}

double vcm1_loglik(const VectorXd& g, const VectorXd& U, double tau1, double tau2) {
    double acc = static_cast<double>(U.size()) * kLog2Pi;
    for (Index i = 0; i < U.size(); ++i) {
        const double s = tau1 * g(i) + tau2;
        if (!(s > 0.0)) {
            if (U(i) != 0.0) return -kInf;
            continue;
        }
        acc += std::log(s) + U(i) * U(i) / s;
    }
    return -0.5 * acc;
}

VcmFit fit_vcm1_em_spectral(const VectorXd& g, const VectorXd& U, double tol, int max_iter, double init_var) {
    const Index n = U.size();
    if (U.squaredNorm() == 0.0) return zero_response_fit(2, FitMethod::Em);

    const double gmax = g.size() ? g.maxCoeff() : 0.0;
    Index r = 0;
    for (Index i = 0; i < n; ++i)
        if (g(i) > 1e-10 * gmax) ++r;

    // Scale-matched start; U carries the same norm as Y.
    const double v = init_var > 0.0 ? init_var : std::max(U.squaredNorm() / static_cast<double>(n), 1e-300);
    double t1 = r > 0 ? v / 2.0 : 0.0;
    double t2 = v / 2.0;

    VcmFit fit;
    fit.method = FitMethod::Em;
    double ll = vcm1_loglik(g, U, t1, t2);
    fit.trace.push_back(ll);
    for (int it = 1; it <= max_iter; ++it) {
        double a1 = 0.0, a2 = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double s = t1 * g(i) + t2;
            if (!(s > 0.0)) continue;
            const double u2s = U(i) * U(i) / (s * s);
            if (g(i) > 1e-10 * gmax) a1 += t1 * t2 / s + t1 * t1 * g(i) * u2s;
            a2 += t2 * t1 * g(i) / s + t2 * t2 * u2s;
        }
        t1 = r > 0 ? a1 / static_cast<double>(r) : 0.0;
        t2 = a2 / static_cast<double>(n);
        const double ll_new = vcm1_loglik(g, U, t1, t2);
        fit.trace.push_back(ll_new);
        fit.iterations = it;
        const bool done = std::abs(ll_new - ll) < tol;
        ll = ll_new;
        if (done) {
            fit.converged = true;
            break;
        }
    }
    fit.tau2 = (VectorXd(2) << t1, t2).finished();
    fit.loglik = ll;
    return fit;
}

VcmFit fit_vcm1_em(const MatrixXd& G1, const VectorXd& Y, double tol, int max_iter) {
    const EigenSystem es = eigendecompose_symmetric(0.5 * (G1 + G1.transpose()));
    return fit_vcm1_em_spectral(es.c, es.Gamma.transpose() * Y, tol, max_iter, sample_variance(Y));
}

VcmFit fit_vcm1_profile(const VectorXd& g, const VectorXd& U) {
    const Index n = U.size();
    if (U.squaredNorm() == 0.0) return zero_response_fit(2, FitMethod::Profile);
    const VectorXd u2 = U.array().square();
    const double nd = static_cast<double>(n);
    const double gbar = std::max(g.sum() / nd, 1e-300);

    // lambda = tau1 / tau2 = exp(t) / gbar
    auto tau2_at = [&](double lambda) {
        return (u2.array() / (lambda * g.array() + 1.0)).sum() / nd;
    };
    auto profile = [&](double lambda) {
        const double t2 = tau2_at(lambda);
        if (!(t2 > 0.0)) return kInf;
        const double logdet = (lambda * g.array() + 1.0).log().sum();
        return 0.5 * (nd * (kLog2Pi + 1.0 + std::log(t2)) + logdet);  // negative loglik
    };
    auto neg_t = [&](double t) { return profile(std::exp(t) / gbar); };

    constexpr double lo = -18.0, hi = 18.0, step = 1.0;
    double best_t = lo, best_v = kInf;
    for (double t = lo; t <= hi + 1e-9; t += step) {
        const double v = neg_t(t);
        if (v < best_v) {
            best_v = v;
            best_t = t;
        }
    }
    const auto refined = boost::math::tools::brent_find_minima(
        neg_t, std::max(lo, best_t - step), std::min(hi, best_t + step), 40);
    double lambda = std::exp(refined.first) / gbar;
    double value = refined.second;
    if (best_v < value) {
        lambda = std::exp(best_t) / gbar;
        value = best_v;
    }
    const double at_zero = profile(0.0);
    if (at_zero <= value) {
        lambda = 0.0;
        value = at_zero;
    }

    VcmFit fit;
    fit.method = FitMethod::Profile;
    const double t2 = tau2_at(lambda);
    fit.tau2 = (VectorXd(2) << lambda * t2, t2).finished();
    fit.loglik = -value;
    fit.trace.push_back(fit.loglik);
    fit.iterations = 1;
    fit.converged = true;
    return fit;
}

VcmFit fit_vcm2_em(const VcmSpec& spec, const VectorXd& Y, double tol, int max_iter, const VectorXd* init) {
    const Index J = static_cast<Index>(spec.G.size());
    if (J == 0) throw Error("fit_vcm2_em: no components");
    if (Y.squaredNorm() == 0.0) return zero_response_fit(J, FitMethod::Em);

    std::vector<double> rank(J);
    for (Index j = 0; j < J; ++j) rank[j] = static_cast<double>(rank_of(spec.G[j]));

    VectorXd tau = init ? *init : VectorXd::Constant(J, sample_variance(Y) / static_cast<double>(J));
    for (Index j = 0; j < J; ++j)
        if (rank[j] == 0) tau(j) = 0.0;

    VcmFit fit;
    fit.method = FitMethod::Em;
    double prev = -kInf;
    for (int it = 0;; ++it) {
        const CovState st = cov_state(spec, tau, Y, true);
        if (!st.ok) throw Error("fit_vcm2_em: covariance became singular");
        fit.trace.push_back(st.loglik);
        fit.iterations = it;
        if (it > 0 && std::abs(st.loglik - prev) < tol) {
            fit.converged = true;
            prev = st.loglik;
            break;
        }
        prev = st.loglik;
        if (it >= max_iter) break;

        VectorXd next(J);
        for (Index j = 0; j < J; ++j) {
            if (rank[j] == 0 || tau(j) == 0.0) {
                next(j) = 0.0;
                continue;
            }
            const double quad = st.alpha.dot(spec.G[j] * st.alpha);
            const double tr = (st.Sinv.array() * spec.G[j].array()).sum();
            next(j) = std::max(0.0, tau(j) + tau(j) * tau(j) / rank[j] * (quad - tr));
        }
        tau = next;
    }
    fit.tau2 = tau;
    fit.loglik = prev;
    return fit;
}

VcmFit fit_vcm2_newton(const VcmSpec& spec, const VectorXd& Y, double tol, int max_iter) {
    const Index J = static_cast<Index>(spec.G.size());
    if (Y.squaredNorm() == 0.0) return zero_response_fit(J, FitMethod::NewtonFisher);

    const VcmFit warm = fit_vcm2_em(spec, Y, 1e-10, 50);
    VectorXd tau = warm.tau2;
    double ll = warm.loglik;

    VcmFit fit;
    fit.method = FitMethod::NewtonFisher;
    fit.trace.push_back(ll);
    for (int it = 1; it <= max_iter; ++it) {
        const CovState st = cov_state(spec, tau, Y, true);
        if (!st.ok) {
            fit.fell_back = true;
            break;
        }
        std::vector<MatrixXd> A(J);
        VectorXd score(J);
        for (Index j = 0; j < J; ++j) {
            A[j] = st.Sinv * spec.G[j];
            score(j) = -0.5 * A[j].trace() + 0.5 * st.alpha.dot(spec.G[j] * st.alpha);
        }
        MatrixXd F(J, J);
        for (Index j = 0; j < J; ++j)
            for (Index k = j; k < J; ++k) {
                F(j, k) = 0.5 * (A[j].array() * A[k].transpose().array()).sum();
                F(k, j) = F(j, k);
            }

        VectorXd target;
        try {
            target = solve_nonneg_qp(QpProblem{score, F, tau});
        } catch (const Error&) {
            fit.fell_back = true;
            break;
        }
        const VectorXd step = target - tau;
        double t = 1.0;
        bool improved = false;
        VectorXd cand;
        double ll_cand = -kInf;
        while (t > 1e-6) {
            cand = (tau + t * step).cwiseMax(0.0);
            const CovState cs = cov_state(spec, cand, Y, false);
            if (cs.ok && cs.loglik >= ll - 1e-12) {
                ll_cand = cs.loglik;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        fit.iterations = it;
        const double moved = (t * step).norm();
        if (!improved) {
            fit.converged = step.norm() < tol * (1.0 + tau.norm());
            break;
        }
        tau = cand;
        ll = ll_cand;
        fit.trace.push_back(ll);
        if (moved < tol * (1.0 + tau.norm())) {
            fit.converged = true;
            break;
        }
    }
    fit.tau2 = tau;
    fit.loglik = ll;
    if (fit.fell_back || warm.loglik > fit.loglik) {
        VcmFit em = warm;
        em.fell_back = fit.fell_back;
        if (fit.fell_back) {
            em = fit_vcm2_em(spec, Y);
            em.fell_back = true;
        }
        return em;
    }
    return fit;
}

VcmSpec model_components(const Dataset& ds, const MatrixXd& K, GprModel model, double gamma) {
    const Index n = ds.n();
    if (K.rows() != n || K.cols() != n) throw Error("kernel matrix size does not match dataset");
    const double scale = std::pow(static_cast<double>(n), 1.0 - gamma);
    VcmSpec spec;
    spec.G.push_back(K / scale);
    if (model == GprModel::H0) {
        spec.structure = VcmStructure::Vcm1;
        spec.G.push_back(MatrixXd::Identity(n, n));
        return spec;
    }
    if (model == GprModel::Pseudo) throw Error("the pseudo model has no pooled component form");
    const GroupIndex gi = group_index(ds);
    for (const auto& rows : gi.rows) {
        MatrixXd Gh = MatrixXd::Zero(n, n);
        for (Index a : rows)
            for (Index b : rows) Gh(a, b) = K(a, b) / scale;
        spec.G.push_back(std::move(Gh));
    }
    if (model == GprModel::H1) {
        spec.G.push_back(MatrixXd::Identity(n, n));
    } else {
        for (const auto& rows : gi.rows) {
            MatrixXd Ih = MatrixXd::Zero(n, n);
            for (Index a : rows) Ih(a, a) = 1.0;
            spec.G.push_back(std::move(Ih));
        }
    }
    return spec;
}

namespace {

VcmFit fit_vcm1_dense(const MatrixXd& G, const VectorXd& Y, Vcm1Solver solver) {
    const EigenSystem es = eigendecompose_symmetric(0.5 * (G + G.transpose()));
    const VectorXd U = es.Gamma.transpose() * Y;
    return solver == Vcm1Solver::Profile ? fit_vcm1_profile(es.c, U)
                                         : fit_vcm1_em_spectral(es.c, U, 1e-8, 5000, sample_variance(Y));
}

}  // namespace

ModelFit fit_model(const Dataset& ds, const MatrixXd& K, GprModel model, double gamma, Vcm1Solver solver) {
    const Index n = ds.n();
    const double scale = std::pow(static_cast<double>(n), 1.0 - gamma);
    ModelFit out;
    out.model = model;
    switch (model) {
        case GprModel::H0: out.fit = fit_vcm1_dense(K / scale, ds.Y, solver); break;
        case GprModel::Pseudo: {
            const GroupIndex gi = group_index(ds);
            out.fit.tau2.resize(2 * gi.H());
            out.fit.loglik = 0.0;
            out.fit.converged = true;
            out.fit.method = solver == Vcm1Solver::Profile ? FitMethod::Profile : FitMethod::Em;
            for (int h = 0; h < gi.H(); ++h) {
                const auto& rows = gi.rows[h];
                VcmFit f = fit_vcm1_dense(subset_block(K, rows) / scale, subset(ds.Y, rows), solver);
                out.fit.tau2.segment(2 * h, 2) = f.tau2;
                out.fit.loglik += f.loglik;
                out.fit.iterations = std::max(out.fit.iterations, f.iterations);
                out.fit.converged = out.fit.converged && f.converged;
                out.groups.push_back(std::move(f));
            }
            break;
        }
        case GprModel::H1:
        case GprModel::H1Prime:
            out.fit = fit_vcm2_newton(model_components(ds, K, model, gamma), ds.Y);
            break;
    }
    return out;
}

ModelFit fit_model(const Dataset& ds, const GprModelSpec& spec) {
    return fit_model(ds, build_kernel_matrix(spec.kernel, ds.X), spec.model, spec.gamma, spec.vcm1_solver);
}

double lr_statistic(const Dataset& ds, GprModel alt, const KernelSpec& kernel, double gamma, Vcm1Solver solver) {
    if (alt == GprModel::H0) throw Error("lr_statistic: the alternative must differ from H0");
    const MatrixXd K = build_kernel_matrix(kernel, ds.X);
    const double l1 = fit_model(ds, K, alt, gamma, solver).fit.loglik;
    const double l0 = fit_model(ds, K, GprModel::H0, gamma, solver).fit.loglik;
    return l1 - l0;
}

VectorXd vcm1_posterior_mean(const MatrixXd& V, const VectorXd& g, const VectorXd& Y, double tau1, double tau2) {
    VectorXd U = V.transpose() * Y;
    for (Index i = 0; i < U.size(); ++i) {
        const double s = tau1 * g(i) + tau2;
        U(i) *= s > 0.0 ? tau1 * g(i) / s : 0.0;
    }
    return V * U;
}

}  // namespace ppt
