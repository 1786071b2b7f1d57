#include "ppt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "ppt/gpr.hpp"
#include "ppt/numerics.hpp"

namespace ppt {

KernelSpec KernelSpec::linear() { return KernelSpec{}; }

KernelSpec KernelSpec::polynomial(int p) {
    KernelSpec s;
    s.family = KernelFamily::Polynomial;
    s.degree = p;
    return s;
}

KernelSpec KernelSpec::gaussian(double omega) { return gaussian(VectorXd::Constant(1, omega)); }

KernelSpec KernelSpec::gaussian(const VectorXd& omega) {
    KernelSpec s;
    s.family = KernelFamily::Gaussian;
    s.omega = omega;
    return s;
}

KernelSpec KernelSpec::rational_quadratic(double omega, double eta) {
    KernelSpec s;
    s.family = KernelFamily::RationalQuadratic;
    s.omega = VectorXd::Constant(1, omega);
    s.eta = eta;
    return s;
}

KernelSpec KernelSpec::truncated(int q, BasisFamily basis) {
    KernelSpec s;
    s.family = KernelFamily::TruncatedBasis;
    s.q = q;
    s.basis = basis;
    return s;
}

void KernelSpec::check() const {
    if (family == KernelFamily::Polynomial && degree < 1) throw Error("polynomial degree must be >= 1");
    if (stationary()) {
        if (omega.size() < 1 || !(omega.array() > 0.0).all()) throw Error("bandwidths must be positive");
        if (family == KernelFamily::RationalQuadratic && !(eta > 0.0)) throw Error("eta must be positive");
    }
    if (family == KernelFamily::TruncatedBasis && q < 1) throw Error("basis truncation q must be >= 1");
    if (!(jitter >= 0.0)) throw Error("jitter must be nonnegative");
}

std::string KernelSpec::describe() const {
    std::ostringstream os;
    switch (family) {
        case KernelFamily::Linear: os << "linear"; break;
        case KernelFamily::Polynomial: os << "poly:" << degree; break;
        case KernelFamily::Gaussian: os << "gaussian"; break;
        case KernelFamily::RationalQuadratic: os << "rq(eta=" << eta << ")"; break;
        case KernelFamily::TruncatedBasis:
            os << "basis:" << q << (basis == BasisFamily::Monomial ? ":monomial" : ":fourier");
            break;
    }
    return os.str();
}

double default_gpr_jitter(KernelFamily family) {
    return (family == KernelFamily::Gaussian || family == KernelFamily::RationalQuadratic) ? 1e-5 : 0.0;
}

namespace {

double bandwidth(const KernelSpec& s, Index k) { return s.omega.size() == 1 ? s.omega(0) : s.omega(k); }

void check_omega_dim(const KernelSpec& s, Index d) {
    if (s.stationary() && s.omega.size() != 1 && s.omega.size() != d)
        throw Error("bandwidth vector length does not match covariate dimension");
}

// Multi-indices of total degree <= max_degree in graded order, truncated
// to `limit` entries (limit < 0 means all).
std::vector<std::vector<int>> graded_indices(Index d, int max_degree, long limit) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(d, 0);
    for (int total = 0; total <= max_degree; ++total) {
        // enumerate compositions of `total` into d parts, lexicographically descending in x1
        std::function<void(Index, int)> rec = [&](Index pos, int left) {
            if (limit >= 0 && static_cast<long>(out.size()) >= limit) return;
            if (pos == d - 1) {
                cur[pos] = left;
                out.push_back(cur);
                return;
            }
            for (int a = left; a >= 0; --a) {
                cur[pos] = a;
                rec(pos + 1, left - a);
            }
        };
        rec(0, total);
        if (limit >= 0 && static_cast<long>(out.size()) >= limit) break;
    }
    return out;
}

double basis_1d(BasisFamily b, int j, double x) {
    if (b == BasisFamily::Monomial) return std::pow(x, j);
    if (j == 0) return 1.0;
    const int m = (j + 1) / 2;
    return (j % 2 == 1) ? std::cos(m * std::numbers::pi * x) : std::sin(m * std::numbers::pi * x);
}

double log_factorial(int k) { return std::lgamma(static_cast<double>(k) + 1.0); }

}  // namespace

double eval_kernel(const KernelSpec& spec, const VectorXd& x, const VectorXd& xp) {
    if (x.size() != xp.size()) throw Error("eval_kernel: dimension mismatch");
    check_omega_dim(spec, x.size());
    switch (spec.family) {
        case KernelFamily::Linear: return 1.0 + x.dot(xp);
        case KernelFamily::Polynomial: return std::pow(1.0 + x.dot(xp), spec.degree);
        case KernelFamily::Gaussian:
        case KernelFamily::RationalQuadratic: {
            double s = 0.0;
            for (Index k = 0; k < x.size(); ++k) {
                const double diff = x(k) - xp(k);
                s += bandwidth(spec, k) * diff * diff;
            }
            return spec.family == KernelFamily::Gaussian ? std::exp(-s) : std::pow(1.0 + s, -spec.eta);
        }
        case KernelFamily::TruncatedBasis: {
            MatrixXd both(2, x.size());
            both.row(0) = x.transpose();
            both.row(1) = xp.transpose();
            const MatrixXd phi = feature_matrix(spec, both);
            return phi.row(0).dot(phi.row(1));
        }
    }
    return 0.0;
}

MatrixXd build_kernel_matrix(const KernelSpec& spec, const MatrixXd& X) {
    spec.check();
    const Index n = X.rows(), d = X.cols();
    check_omega_dim(spec, d);
    MatrixXd K(n, n);
    switch (spec.family) {
        case KernelFamily::Linear:
        case KernelFamily::Polynomial: {
            K = (X * X.transpose()).array() + 1.0;
            if (spec.family == KernelFamily::Polynomial && spec.degree > 1)
                K = K.array().pow(static_cast<double>(spec.degree));
            break;
        }
        case KernelFamily::Gaussian:
        case KernelFamily::RationalQuadratic: {
            VectorXd w(d);
            for (Index k = 0; k < d; ++k) w(k) = bandwidth(spec, k);
            const bool gauss = spec.family == KernelFamily::Gaussian;
            for (Index j = 0; j < n; ++j) {
                K(j, j) = 1.0;
                for (Index i = j + 1; i < n; ++i) {
                    double s = 0.0;
                    for (Index k = 0; k < d; ++k) {
                        const double diff = X(i, k) - X(j, k);
                        s += w(k) * diff * diff;
                    }
                    const double v = gauss ? std::exp(-s) : std::pow(1.0 + s, -spec.eta);
                    K(i, j) = v;
                    K(j, i) = v;
                }
            }
            break;
        }
        case KernelFamily::TruncatedBasis: {
            const MatrixXd phi = feature_matrix(spec, X);
            K = phi * phi.transpose();
            break;
        }
    }
    if (spec.jitter > 0.0) K.diagonal().array() += spec.jitter;
    return K;
}

std::optional<Index> feature_dimension(const KernelSpec& spec, Index d) {
    switch (spec.family) {
        case KernelFamily::Linear: return d + 1;
        case KernelFamily::Polynomial: {
            // C(d + p, d)
            double c = 1.0;
            for (int k = 1; k <= spec.degree; ++k) c = c * static_cast<double>(d + k) / k;
            return static_cast<Index>(std::llround(c));
        }
        case KernelFamily::TruncatedBasis: return spec.q;
        default: return std::nullopt;
    }
}

MatrixXd feature_matrix(const KernelSpec& spec, const MatrixXd& X) {
    const Index n = X.rows(), d = X.cols();
    switch (spec.family) {
        case KernelFamily::Linear: {
            MatrixXd phi(n, d + 1);
            phi.col(0).setOnes();
            phi.rightCols(d) = X;
            return phi;
        }
        case KernelFamily::Polynomial: {
            // (1 + x^T x')^p expands into monomials x^a with multinomial weights.
            const int p = spec.degree;
            const auto idx = graded_indices(d, p, -1);
            MatrixXd phi(n, static_cast<Index>(idx.size()));
            for (std::size_t m = 0; m < idx.size(); ++m) {
                int total = 0;
                double logc = log_factorial(p);
                for (int a : idx[m]) {
                    total += a;
                    logc -= log_factorial(a);
                }
                logc -= log_factorial(p - total);
                const double w = std::exp(0.5 * logc);
                for (Index i = 0; i < n; ++i) {
                    double v = w;
                    for (Index k = 0; k < d; ++k) v *= std::pow(X(i, k), idx[m][k]);
                    phi(i, m) = v;
                }
            }
            return phi;
        }
        case KernelFamily::TruncatedBasis: {
            const auto idx = graded_indices(d, spec.q, spec.q);
            MatrixXd phi(n, spec.q);
            for (Index m = 0; m < spec.q; ++m)
                for (Index i = 0; i < n; ++i) {
                    double v = 1.0;
                    for (Index k = 0; k < d; ++k) v *= basis_1d(spec.basis, idx[m][k], X(i, k));
                    phi(i, m) = v;
                }
            return phi;
        }
        default: throw Error("kernel family has no finite feature map");
    }
}

int choose_q_n(Index n, double kappa) {
    if (n < 2) throw Error("choose_q_n: n must be at least 2");
    if (!(kappa > 0.0)) throw Error("choose_q_n: kappa must be positive");
    const double q = std::round(std::pow(static_cast<double>(n), 2.0 / (2.0 * kappa + 1.0)));
    return static_cast<int>(std::clamp<double>(q, 1.0, static_cast<double>(n - 1)));
}

double bandwidth_loglik(const MatrixXd& X, const VectorXd& Y, KernelFamily family, const VectorXd& omega,
                        const KernelFitOptions& opt) {
    KernelSpec spec;
    spec.family = family;
    spec.omega = omega;
    spec.eta = opt.eta;
    MatrixXd K = build_kernel_matrix(spec, X);
    if (opt.whitening) {
        K = (*opt.whitening) * K * (*opt.whitening);
        K = 0.5 * (K + K.transpose());
    }
    K.diagonal().array() += opt.jitter;
    const EigenSystem es = eigendecompose_symmetric(K);
    return fit_vcm1_profile(es.c, es.Gamma.transpose() * Y).loglik;
}

VectorXd apply_safeguard(const VectorXd& pooled, const std::vector<VectorXd>& groups, bool* applied) {
    VectorXd out = pooled;
    bool any = false;
    if (!groups.empty()) {
        for (Index j = 0; j < pooled.size(); ++j) {
            bool all_smaller = true;
            double mx = 0.0;
            for (const auto& g : groups) {
                all_smaller = all_smaller && g(j) < pooled(j);
                mx = std::max(mx, g(j));
            }
            if (all_smaller) {
                out(j) = mx;
                any = true;
            }
        }
    }
    if (applied) *applied = any;
    return out;
}

namespace {

struct BandwidthSearch {
    VectorXd omega;
    double loglik;
};

BandwidthSearch search_bandwidth(const MatrixXd& X, const VectorXd& Y, KernelFamily family,
                                 const KernelFitOptions& opt) {
    const Index dim = opt.isotropic ? 1 : X.cols();
    auto objective = [&](const VectorXd& logw) {
        return -bandwidth_loglik(X, Y, family, logw.array().exp().matrix(), opt);
    };
    const VectorXd lo = VectorXd::Constant(dim, opt.log_lower);
    const VectorXd hi = VectorXd::Constant(dim, opt.log_upper);

    NelderMeadOptions nm;
    nm.step = 1.0;
    nm.xtol = 1e-3;
    nm.ftol = 1e-10;
    nm.max_evals = 200 * static_cast<int>(dim);

    NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    const int R = std::max(1, opt.restarts);
    for (int r = 0; r < R; ++r) {
        const double start = opt.log_lower + (opt.log_upper - opt.log_lower) * (r + 1) / (R + 1);
        const NelderMeadResult res = nelder_mead(objective, VectorXd::Constant(dim, start), lo, hi, nm);
        any_converged = any_converged || res.converged;
        if (res.value < best.value) best = res;
    }
    if (!any_converged) {
        std::ostringstream os;
        os << "bandwidth search did not converge; best log-omega so far: " << best.x.transpose();
        throw Error(os.str());
    }
    return {best.x.array().exp().matrix(), -best.value};
}

}  // namespace

KernelFit fit_kernel_params(const Dataset& ds, KernelFamily family, double gamma, const KernelFitOptions& opt) {
    (void)gamma;  // the profiled likelihood is invariant to the n^{1-gamma} scaling
    if (family != KernelFamily::Gaussian && family != KernelFamily::RationalQuadratic)
        throw Error("fit_kernel_params: only gaussian and rational-quadratic kernels have bandwidths");

    KernelFit out;
    const BandwidthSearch pooled = search_bandwidth(ds.X, ds.Y, family, opt);
    out.pooled_omega = pooled.omega;
    out.loglik = pooled.loglik;

    VectorXd omega = pooled.omega;
    if (opt.safeguard && ds.H >= 2 && !opt.whitening) {
        const GroupIndex gi = group_index(ds);
        bool usable = true;
        for (Index s : gi.sizes) usable = usable && s >= 3;
        if (usable) {
            for (const auto& rows : gi.rows) {
                out.group_omega.push_back(
                    search_bandwidth(subset_rows(ds.X, rows), subset(ds.Y, rows), family, opt).omega);
            }
            omega = apply_safeguard(pooled.omega, out.group_omega, &out.safeguard_applied);
        }
    }

    out.spec.family = family;
    out.spec.omega = omega;
    out.spec.eta = opt.eta;
    if (out.safeguard_applied) out.loglik = bandwidth_loglik(ds.X, ds.Y, family, omega, opt);
    return out;
}

}  // namespace ppt
