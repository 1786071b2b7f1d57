#pragma once

#include <functional>

#include "ppt/common.hpp"

namespace ppt {

/// Eigendecomposition K = Gamma diag(c) Gamma^T with c sorted descending and
/// clamped at zero.
struct EigenSystem {
    MatrixXd Gamma;
    VectorXd c;

    Index size() const { return c.size(); }
    /// Number of eigenvalues above rel * c_1.
    Index rank(double rel = 1e-10) const;
};

EigenSystem eigendecompose_symmetric(const MatrixXd& K);

/// Symmetric M with M S M = I.
MatrixXd inverse_sqrt_spd(const MatrixXd& S);

double chi2_cdf(double df, double x);
double chi2_quantile(double df, double p);
double f_cdf(double d1, double d2, double x);

/// minimize (-g)^T (x - a) + 1/2 (x - a)^T F (x - a)  subject to x >= 0
struct QpProblem {
    VectorXd g;
    MatrixXd F;
    VectorXd anchor;
};

VectorXd solve_nonneg_qp(const QpProblem& prob);

/// Largest violation of the KKT conditions at x.
double qp_kkt_residual(const QpProblem& prob, const VectorXd& x);

struct NelderMeadOptions {
    double step = 1.0;
    double xtol = 1e-4;
    double ftol = 1e-9;
    int max_evals = 400;
};

struct NelderMeadResult {
    VectorXd x;
    double value = 0.0;
    int evals = 0;
    bool converged = false;
};

/// Box-constrained Nelder-Mead minimization; trial points are clamped to
/// [lower, upper].
NelderMeadResult nelder_mead(const std::function<double(const VectorXd&)>& f, const VectorXd& x0,
                             const VectorXd& lower, const VectorXd& upper,
                             const NelderMeadOptions& opt = {});

}  // namespace ppt
