#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ppt/pipeline.hpp"
#include "ppt/report.hpp"

namespace ppt {

/// Raw flag values shared by `test` and `simulate`, before validation.
struct TestFlags {
    std::string kernel = "gaussian";
    std::string bandwidth = "auto";
    double eta = 1.0;
    double jitter = -1.0;          // negative: family default
    double gamma = 0.1;
    bool anisotropic = false;
    bool no_safeguard = false;
    std::string stat = "lr-pseudo";
    std::string mode = "discrete";
    std::string bn = "auto";
    std::string bn_mode = "gp";
    double alpha = 0.05;
    int B = 999;
    std::string seed;              // empty: drawn from entropy
    int threads = 0;
    std::string standardize = "auto";
    std::string sigma;
    std::string sigma_pairs;
    std::string rho;
    double truncate = 0.0;
};

/// Applies a --kernel value (linear, poly:<p>, gaussian, rq, basis:<q>[:fourier]).
void apply_kernel_flag(const std::string& value, TestConfig& cfg);
/// "auto" or comma-separated positive values.
std::optional<VectorXd> parse_bandwidth(const std::string& value);
std::uint64_t resolve_seed(const std::string& value);

/// Builds and validates a config. Covariance files are read here; their
/// size is checked against the data later.
TestConfig build_test_config(const TestFlags& f, std::uint64_t seed);

json flags_json(const TestFlags& f);

/// Entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ppt
