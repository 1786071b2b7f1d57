#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ppt/data.hpp"
#include "ppt/kernels.hpp"
#include "ppt/permute.hpp"
#include "ppt/stats.hpp"

namespace ppt {

/// Noise covariance known up to scale: either a dense SPD matrix or the
/// paired-equicorrelated structure (each row correlated with one partner).
struct CovarianceModel {
    enum class Kind { Dense, Paired };
    Kind kind = Kind::Dense;
    MatrixXd sigma;                               // dense form
    std::vector<std::pair<Index, Index>> pairs;   // 0-based perfect matching
    double rho = 0.0;

    static CovarianceModel dense(MatrixXd s);
    static CovarianceModel paired(std::vector<std::pair<Index, Index>> pairs, double rho);
};

/// Dense covariance with unit mean diagonal (dense input) or unit diagonal
/// (paired form). Throws on a bad matching, |rho| >= 1 or a non-SPD matrix.
MatrixXd expand_covariance(const CovarianceModel& model, Index n);

/// Sigma^{-1/2} and Sigma^{1/2} from one eigendecomposition.
struct Whitening {
    MatrixXd M;       // Sigma^{-1/2}
    MatrixXd M_inv;   // Sigma^{1/2}
    bool identity = false;

    VectorXd apply(const VectorXd& y) const { return identity ? y : VectorXd(M * y); }
    VectorXd unapply(const VectorXd& y) const { return identity ? y : VectorXd(M_inv * y); }
    MatrixXd conjugate(const MatrixXd& K) const;
};

Whitening make_whitening(const MatrixXd& sigma);
/// Y_C = Sigma^{-1/2} Y together with the transform.
std::pair<VectorXd, Whitening> whiten(const Dataset& ds, const MatrixXd& sigma);

/// Sample correlation of paired residuals Y - f_hat, clamped to [-0.99, 0.99].
double estimate_structured_rho(const Dataset& ds, const std::vector<std::pair<Index, Index>>& pairs,
                               const VectorXd& f_hat);

/// Pairs (i, n/2 + i), the layout of duplicated-covariate designs.
std::vector<std::pair<Index, Index>> half_split_pairs(Index n);

/// Whitens Y and K_n, eigendecomposes K_n^C and runs the permutation test.
/// The GPR kernel for likelihood statistics is K_n^C + jitter I.
TestReport run_test_correlated(const Dataset& ds, const KernelSpec& kernel, const CovarianceModel& model,
                               const PermutationPlan& plan, StatKind stat, double gamma = 0.1);

/// Reads an n x n comma-separated matrix (no header).
MatrixXd load_sigma_csv(const std::string& path);
/// Reads 1-based index pairs "i,j", one per line; an "i,j" header is allowed.
std::vector<std::pair<Index, Index>> load_pairs_csv(const std::string& path);

}  // namespace ppt
