#pragma once

#include <string>
#include <vector>

#include "ppt/data.hpp"
#include "ppt/kernels.hpp"
#include "ppt/numerics.hpp"

namespace ppt {

double losp_fixed(const EigenSystem& es, const VectorXd& f_vec, double sigma, Index b_n);
double correction_v(Index b_n, double omega, double alpha0);
double losp_gp(double xi, const EigenSystem& es, Index b_n);
double correction_v_tilde(Index b_n, double omega_tilde, double alpha0);

struct Nuisance {
    double xi = 0.0;
    VectorXd f_hat;
    double sigma0 = 0.0;  // sqrt of the residual variance
    double delta2 = 0.0;
    double sigma2 = 0.0;  // MLE noise variance
    bool delta_zero = false;
};

/// H0 fit and plug-in estimates. K is the GPR kernel matrix (jittered and,
/// for correlated noise, whitened); Y the matching response.
Nuisance estimate_nuisance(const VectorXd& Y, const MatrixXd& K, double gamma);
Nuisance estimate_nuisance(const Dataset& ds, const KernelSpec& kernel, double gamma);

enum class SizingMode { Fixed, Gp };
std::string to_string(SizingMode m);
SizingMode parse_sizing_mode(const std::string& s);

struct SizingInputs {
    const EigenSystem* es = nullptr;  // kernel matrix used for permutation
    double xi = 0.0;
    VectorXd f_std;                   // sigma0^{-1} f_hat
};

struct SizingChoice {
    Index b_n = 0;
    double alpha0 = 0.0;
    double v = 0.0;
    std::vector<std::string> warnings;
};

/// Correction at permutation size b (v in fixed mode, v-tilde in gp mode).
double correction_at(SizingMode mode, const SizingInputs& in, Index b, double alpha0);

/// Largest b with correction(b) + alpha0 <= 1e-3 alpha, by binary search.
SizingChoice choose_b_n(SizingMode mode, const SizingInputs& in, double alpha);
/// Same rule by exhaustive scan; used to cross-check the search.
SizingChoice choose_b_n_scan(SizingMode mode, const SizingInputs& in, double alpha);

double corrected_pvalue(double raw_p, double v, double alpha0);

}  // namespace ppt
