#pragma once

#include <string>
#include <vector>

#include "ppt/data.hpp"
#include "ppt/kernels.hpp"

namespace ppt {

enum class VcmStructure { Vcm1, Vcm2 };

/// Y ~ N(0, sum_j tau2_j G_j). For Vcm1 there are two components and the
/// second one is the identity.
struct VcmSpec {
    std::vector<MatrixXd> G;
    VcmStructure structure = VcmStructure::Vcm2;
};

enum class FitMethod { Em, NewtonFisher, Profile };

struct VcmFit {
    VectorXd tau2;
    double loglik = 0.0;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
    FitMethod method = FitMethod::Em;
    bool fell_back = false;  // Newton-Fisher gave up and EM was returned
};

double marginal_loglik(const VcmSpec& spec, const VectorXd& tau2, const VectorXd& Y);

/// VCM I in the eigenbasis of G_1: g are its eigenvalues and U = V^T Y.
double vcm1_loglik(const VectorXd& g, const VectorXd& U, double tau1, double tau2);

VcmFit fit_vcm1_em(const MatrixXd& G1, const VectorXd& Y, double tol = 1e-8, int max_iter = 5000);
VcmFit fit_vcm1_em_spectral(const VectorXd& g, const VectorXd& U, double tol = 1e-8, int max_iter = 5000,
                            double init_var = -1.0);

/// Exact VCM I maximizer: profiles tau2_2 out and searches the variance
/// ratio on a log grid followed by Brent refinement.
VcmFit fit_vcm1_profile(const VectorXd& g, const VectorXd& U);

VcmFit fit_vcm2_em(const VcmSpec& spec, const VectorXd& Y, double tol = 1e-8, int max_iter = 5000,
                   const VectorXd* init = nullptr);
VcmFit fit_vcm2_newton(const VcmSpec& spec, const VectorXd& Y, double tol = 1e-8, int max_iter = 100);

enum class GprModel { H0, H1, H1Prime, Pseudo };
std::string to_string(GprModel m);
GprModel parse_gpr_model(const std::string& s);

enum class Vcm1Solver { Em, Profile };

struct GprModelSpec {
    GprModel model = GprModel::H0;
    KernelSpec kernel;  // jitter is taken from here
    double gamma = 0.1;
    Vcm1Solver vcm1_solver = Vcm1Solver::Em;
};

struct ModelFit {
    GprModel model = GprModel::H0;
    VcmFit fit;                   // pooled fit, or the combined pseudo fit
    std::vector<VcmFit> groups;   // per-group fits for the pseudo model
};

/// Fits one of the GPR models given the (jittered) kernel matrix K.
ModelFit fit_model(const Dataset& ds, const MatrixXd& K, GprModel model, double gamma,
                   Vcm1Solver solver = Vcm1Solver::Em);
ModelFit fit_model(const Dataset& ds, const GprModelSpec& spec);

/// Component matrices for a model (pooled, H0/H1/H1'), with the
/// n^{1-gamma} factor absorbed.
VcmSpec model_components(const Dataset& ds, const MatrixXd& K, GprModel model, double gamma);

/// loglik(alt) - loglik(H0).
double lr_statistic(const Dataset& ds, GprModel alt, const KernelSpec& kernel, double gamma,
                    Vcm1Solver solver = Vcm1Solver::Profile);

/// Posterior mean of f at the observed points under VCM I,
/// tau1 G (tau1 G + tau2 I)^{-1} Y, from the eigen form of G.
VectorXd vcm1_posterior_mean(const MatrixXd& V, const VectorXd& g, const VectorXd& Y, double tau1, double tau2);

}  // namespace ppt
