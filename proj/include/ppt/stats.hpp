#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ppt/data.hpp"
#include "ppt/kernels.hpp"

namespace ppt {

/// Residual projections for the pooled design (rank p0) and the
/// group-interacted design (rank p1), kept as thin orthonormal bases.
class ProjectionPair {
public:
    ProjectionPair(const MatrixXd& pooled_design, const MatrixXd& full_design);

    Index p0() const { return p0_; }
    Index p1() const { return p1_; }
    Index n() const { return Q0_.rows(); }
    VectorXd residual0(const VectorXd& y) const { return y - Q0_ * (Q0_.transpose() * y); }
    VectorXd residual1(const VectorXd& y) const { return y - Q1_ * (Q1_.transpose() * y); }

private:
    MatrixXd Q0_, Q1_;
    Index p0_ = 0, p1_ = 0;
};

/// Pooled feature design Phi and its group-interacted version, optionally
/// premultiplied by a whitening matrix.
ProjectionPair feature_projections(const Dataset& ds, const KernelSpec& fm, const MatrixXd* whitening = nullptr);

struct FStat {
    double F = 0.0;
    Index p0 = 0;
    Index p1 = 0;
};

FStat f_statistic(const ProjectionPair& pp, const VectorXd& y);
FStat f_statistic(const Dataset& ds, const KernelSpec& fm);

/// Classical F-test p-value 1 - F_{p1-p0, n-p1}(F).
double f_test_pvalue(const FStat& f, Index n);

/// n log MSE - sum_h n_h log MSE_h. group_fits[h] holds fitted values for
/// the rows of group h in increasing row order.
double mse_statistic(const Dataset& ds, const VectorXd& pooled_fit, const std::vector<VectorXd>& group_fits);

enum class StatKind { F, Mse, LrH1, LrH1Prime, LrPseudo, Custom };
StatKind parse_stat_kind(const std::string& s);
std::string to_string(StatKind k);

/// Statistic evaluated on a response vector; X and Z are bound at
/// construction.
using Statistic = std::function<double(const VectorXd& y)>;
using CustomStatistic = std::function<double(const MatrixXd& X, const VectorXd& y, const VectorXi& Z)>;

struct StatContext {
    const Dataset* ds = nullptr;
    KernelSpec kernel;              // features for F; GPR kernel otherwise
    const MatrixXd* K = nullptr;    // GPR kernel matrix (jittered, whitened if applicable)
    const MatrixXd* whitening = nullptr;
    double gamma = 0.1;
    CustomStatistic custom;
};

Statistic statistic_adapter(StatKind kind, const StatContext& ctx);

}  // namespace ppt
