#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ppt/correlated.hpp"
#include "ppt/data.hpp"
#include "ppt/kernels.hpp"
#include "ppt/permute.hpp"
#include "ppt/sizing.hpp"
#include "ppt/stats.hpp"

namespace ppt {

/// Everything needed to go from a dataset to a corrected p-value.
struct TestConfig {
    KernelFamily family = KernelFamily::Gaussian;
    int degree = 1;
    int q = 1;
    BasisFamily basis = BasisFamily::Monomial;
    std::optional<VectorXd> bandwidth;   // empty: marginal-likelihood fit
    double eta = 1.0;
    std::optional<double> jitter;        // GPR jitter; empty: family default
    bool isotropic = true;
    bool safeguard = true;
    double gamma = 0.1;

    StatKind stat = StatKind::LrPseudo;
    CustomStatistic custom;

    PermMode mode = PermMode::Discrete;
    std::optional<Index> b_n;            // empty: chosen from the budget rule
    SizingMode sizing = SizingMode::Gp;
    double alpha = 0.05;
    int B = 999;
    std::uint64_t seed = 0;
    int threads = 1;
    bool allow_exhaustive = true;

    std::optional<bool> standardize;     // empty: on for Gaussian/RQ only
    std::optional<CovarianceModel> sigma;
    bool rho_auto = false;               // paired structure with estimated rho
    double truncate = 0.0;
};

struct TruncationInfo {
    double tail = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    Index clamped = 0;
};

struct PipelineResult {
    TestReport report;
    std::optional<KernelFit> bandwidth_fit;
    bool standardized = false;
    bool whitened = false;
    std::optional<double> rho;           // structured correlation used
    std::optional<TruncationInfo> truncation;
    bool b_n_auto = false;
    SizingMode sizing = SizingMode::Gp;
    double alpha = 0.05;
};

/// Kernel spec implied by the config; bandwidth left at its default when
/// it is to be fitted.
KernelSpec config_kernel(const TestConfig& cfg);

/// Checks flag combinations that do not depend on the data.
void validate_config(const TestConfig& cfg);

/// Optional whitening, standardization, bandwidth fit, eigendecomposition,
/// nuisance fit, optional residual truncation, permutation-size choice,
/// the permutation test and the correction.
PipelineResult run_pipeline(const Dataset& ds, const TestConfig& cfg);

}  // namespace ppt
