#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ppt/data.hpp"

namespace ppt {

enum class KernelFamily { Linear, Polynomial, Gaussian, RationalQuadratic, TruncatedBasis };
enum class BasisFamily { Monomial, Fourier };

/// Kernel family and parameters. `omega` holds either one shared bandwidth
/// (isotropic) or one bandwidth per covariate.
struct KernelSpec {
    KernelFamily family = KernelFamily::Linear;
    int degree = 1;
    VectorXd omega = VectorXd::Ones(1);
    double eta = 1.0;
    int q = 1;
    BasisFamily basis = BasisFamily::Monomial;
    double jitter = 0.0;

    static KernelSpec linear();
    static KernelSpec polynomial(int p);
    static KernelSpec gaussian(double omega);
    static KernelSpec gaussian(const VectorXd& omega);
    static KernelSpec rational_quadratic(double omega, double eta);
    static KernelSpec truncated(int q, BasisFamily basis = BasisFamily::Monomial);

    bool stationary() const {
        return family == KernelFamily::Gaussian || family == KernelFamily::RationalQuadratic;
    }
    void check() const;
    std::string describe() const;
};

/// Jitter applied inside GPR fits when the user does not choose one.
double default_gpr_jitter(KernelFamily family);

double eval_kernel(const KernelSpec& spec, const VectorXd& x, const VectorXd& xp);

/// Sample kernel matrix, with spec.jitter added to the diagonal.
MatrixXd build_kernel_matrix(const KernelSpec& spec, const MatrixXd& X);

/// Feature-space dimension; empty for infinite-dimensional families.
std::optional<Index> feature_dimension(const KernelSpec& spec, Index d);

/// Explicit feature map phi with phi(x)^T phi(x') = K(x, x'), one row per
/// observation. Only defined for finite-dimensional families.
MatrixXd feature_matrix(const KernelSpec& spec, const MatrixXd& X);

/// Basis truncation q_n = round(n^{2/(2 kappa + 1)}) clamped to [1, n-1].
int choose_q_n(Index n, double kappa);

struct KernelFitOptions {
    bool isotropic = true;
    double eta = 1.0;         // held fixed for rational-quadratic fits
    double jitter = 1e-5;
    double log_lower = -9.0;
    double log_upper = 4.0;
    int restarts = 5;
    bool safeguard = true;
    // Optional Sigma^{-1/2}: the kernel is conjugated by it and Y is taken as
    // already whitened. The group safeguard is skipped in that case.
    const MatrixXd* whitening = nullptr;
};

struct KernelFit {
    KernelSpec spec;
    VectorXd pooled_omega;
    std::vector<VectorXd> group_omega;
    bool safeguard_applied = false;
    double loglik = 0.0;
};

/// Profiled H0 marginal log-likelihood of Y at the given bandwidths.
double bandwidth_loglik(const MatrixXd& X, const VectorXd& Y, KernelFamily family,
                        const VectorXd& omega, const KernelFitOptions& opt);

/// Marginal-likelihood bandwidth fit on pooled data followed by the
/// group-wise smoothness safeguard.
KernelFit fit_kernel_params(const Dataset& ds, KernelFamily family, double gamma,
                            const KernelFitOptions& opt = {});

/// The safeguard rule on its own: if every group bandwidth is strictly
/// below the pooled one (componentwise), return the componentwise group max.
VectorXd apply_safeguard(const VectorXd& pooled, const std::vector<VectorXd>& groups, bool* applied = nullptr);

}  // namespace ppt
