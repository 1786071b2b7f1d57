#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "ppt/data.hpp"

namespace testutil {

inline std::string temp_file(const std::string& name, const std::string& content) {
    const auto dir = std::filesystem::temp_directory_path() / "ppt_unit";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream(path) << content;
    return path.string();
}

inline ppt::MatrixXd random_matrix(ppt::Index r, ppt::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    ppt::MatrixXd m(r, c);
    for (ppt::Index i = 0; i < r; ++i)
        for (ppt::Index j = 0; j < c; ++j) m(i, j) = N(rng);
    return m;
}

inline ppt::VectorXd random_vector(ppt::Index n, std::mt19937_64& rng) { return random_matrix(n, 1, rng).col(0); }

inline ppt::MatrixXd random_psd(ppt::Index n, ppt::Index rank, std::mt19937_64& rng) {
    const ppt::MatrixXd A = random_matrix(n, rank, rng);
    return A * A.transpose();
}

// Two-group dataset with uniform covariates on (-1, 1) and y = f(x) + noise.
template <class F>
ppt::Dataset two_group_data(ppt::Index n, ppt::Index d, F f, double sd, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::normal_distribution<double> N(0.0, sd);
    ppt::MatrixXd X(n, d);
    ppt::VectorXd Y(n);
    std::vector<long long> z(n);
    for (ppt::Index i = 0; i < n; ++i) {
        for (ppt::Index k = 0; k < d; ++k) X(i, k) = U(rng);
        z[i] = i % 2 ? 2 : 1;
        Y(i) = f(X.row(i).transpose(), z[i]) + N(rng);
    }
    return ppt::make_dataset(X, Y, z);
}

// Regularized lower incomplete gamma by its power series; independent of
// the library's distribution code.
inline double gamma_p_series(double a, double x) {
    if (x <= 0.0) return 0.0;
    double term = 1.0 / a, sum = term;
    for (int k = 1; k < 10000; ++k) {
        term *= x / (a + k);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double chi2_quantile_bisect(double df, double p) {
    double lo = 0.0, hi = 1000.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gamma_p_series(df / 2.0, mid / 2.0) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace testutil
