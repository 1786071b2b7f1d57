#pragma once

#include <string>
#include <vector>

#include "ppt/data.hpp"
#include "ppt/permute.hpp"
#include "ppt/pipeline.hpp"

namespace ppt {

enum class NoiseFamily { Gaussian, Uniform, StudentT5 };
std::string to_string(NoiseFamily f);
NoiseFamily parse_noise_family(const std::string& s);

/// One simulation design. `fn` picks from the function menus: 1-6 for
/// Scenarios 1 and 2, 1-3 for Scenario 3, 4-6 for Scenario 4, 1-2 for
/// Scenario 5; 0 selects the non-smooth g0 (Scenarios 1 and 2).
struct ScenarioSpec {
    int scenario = 1;
    char case_tag = 'a';
    int fn = 1;
    Index n = 200;
    double sigma2 = 0.1;
    double delta = 1.0;          // heterogeneity scale, Scenarios 3 and 4
    bool null_model = false;     // Scenario 5: both groups use f_1
    NoiseFamily noise = NoiseFamily::Gaussian;
    double rho = 0.0;            // Scenario 6

    void check() const;
    std::string describe() const;
};

/// Parses "i".."vi", "1".."6" or "g0".
int parse_function_id(const std::string& s);

struct CaseWeights {
    double p1, p2;   // group probabilities
    double a1, a2;   // weight on Unif(-1, 0) per group
};
CaseWeights case_weights(char case_tag);

double nonsmooth_g0(double x);

/// Mean function of group z (1 or 2) at x.
double scenario_mean(const ScenarioSpec& spec, int z, const VectorXd& x);

/// Centering constants m1, m2, m3 of the Scenario 5 menu.
double parallel_center(int k);

Dataset generate(const ScenarioSpec& spec, Rng& rng);

/// Residuals Y - f_hat winsorized at their tail and 1 - tail sample
/// quantiles (linear interpolation between order statistics).
VectorXd truncate_residuals(const VectorXd& Y, const VectorXd& f_hat, double tail, TruncationInfo* info = nullptr);
/// Sample quantile with linear interpolation, p in [0, 1].
double sample_quantile(std::vector<double> v, double p);

struct StudyConfig {
    TestConfig test;
    int reps = 500;
    std::vector<double> alphas{0.05};
    std::uint64_t seed = 1;
    int threads = 1;
    bool use_corrected = false;        // reject on the corrected p-value
    // Optional classical F-test on the same draws, with these features.
    std::optional<KernelSpec> f_reference;
    // Scenario 6: supply the true pair structure with this correlation;
    // empty means whatever test.sigma holds.
    std::optional<double> supply_rho;
};

struct StudyResult {
    std::vector<double> p_values;
    std::vector<double> corrected;
    std::vector<Index> b_n;
    std::vector<double> reference_p;   // classical F-test, when requested
    std::vector<std::pair<double, double>> rejection;  // (alpha, rate)
    std::vector<double> ecdf;          // at 0, 0.01, ..., 1
    double seconds = 0.0;
};

double rejection_rate(const std::vector<double>& p, double alpha);
std::vector<double> ecdf_grid(const std::vector<double>& p);

/// Kolmogorov-Smirnov distances to Uniform(0,1): `above` is the largest
/// excess of the ECDF over the diagonal (anti-conservative side), `below`
/// the largest shortfall.
struct KsDistance {
    double d = 0.0;
    double above = 0.0;
    double below = 0.0;
};
KsDistance ks_uniform(std::vector<double> p);
/// KS distance between an empirical sample and a continuous CDF.
double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf);

/// Independent generate-then-test replicates; replicate r draws data and
/// permutations from streams derived from (seed, r) only.
StudyResult run_calibration(const ScenarioSpec& spec, const StudyConfig& cfg);

/// One study per grid point.
std::vector<StudyResult> run_power(const std::vector<ScenarioSpec>& grid, const StudyConfig& cfg);

}  // namespace ppt
