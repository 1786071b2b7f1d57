#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ppt/data.hpp"
#include "ppt/kernels.hpp"
#include "ppt/numerics.hpp"
#include "ppt/stats.hpp"

namespace ppt {

enum class PermMode { Discrete, Continuous };
std::string to_string(PermMode m);
PermMode parse_perm_mode(const std::string& s);

using Rng = std::mt19937_64;

/// Independent stream for replicate `index` of a run seeded with `seed`.
/// Streams depend only on (seed, index), never on scheduling.
Rng replicate_rng(std::uint64_t seed, std::uint64_t index);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

struct PermutationPlan {
    Index b_n = 0;
    PermMode mode = PermMode::Discrete;
    int B = 999;
    std::uint64_t seed = 0;
    int threads = 0;           // 0: hardware concurrency
    bool allow_exhaustive = true;
};

struct NuisanceEstimate {
    bool available = false;
    double delta2 = 0.0;   // fitted delta_0^2
    double sigma2 = 0.0;   // fitted sigma_0^2 (MLE under H0)
    double xi = 0.0;       // (delta2 / n^{1-gamma}) / sigma2
    double sigma0_2 = 0.0; // residual variance around the posterior mean
};

struct TestReport {
    double T_obs = 0.0;
    std::vector<double> T_perm;
    double raw_p = 1.0;
    bool correction_applied = false;
    double correction = 0.0;  // v or v-tilde at b_n
    double alpha0 = 0.0;
    double corrected_p = 1.0;
    Index b_n = 0;
    PermMode mode = PermMode::Discrete;
    std::uint64_t seed = 0;
    int B = 0;
    bool exhaustive = false;
    KernelSpec kernel;
    NuisanceEstimate nuisance;
    std::vector<std::string> warnings;
};

VectorXd project_responses(const EigenSystem& es, const VectorXd& Y);
VectorXd sample_discrete(const VectorXd& W, Index b_n, Rng& rng);
VectorXd sample_continuous(const VectorXd& W, Index b_n, Rng& rng);

/// The partial permutation test. The statistic is evaluated on Y and on B permuted responses
/// Gamma W^p. When the discrete tail has at most 5 entries the full
/// permutation group is enumerated instead of sampled.
TestReport run_test(const VectorXd& Y, const EigenSystem& es, const PermutationPlan& plan, const Statistic& stat);
TestReport run_test(const Dataset& ds, const EigenSystem& es, const PermutationPlan& plan, const Statistic& stat);

/// Runs fn(i) for i in [0, count) on a pool of `threads` workers.
void parallel_for(Index count, int threads, const std::function<void(Index)>& fn);
int resolve_threads(int threads);

}  // namespace ppt
