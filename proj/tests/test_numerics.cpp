#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ppt/numerics.hpp"

using namespace ppt;

namespace {

void check_eigensystem(const MatrixXd& K, const EigenSystem& es) {
    const Index n = K.rows();
    CHECK((es.Gamma.transpose() * es.Gamma - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-8);
    const MatrixXd rec = es.Gamma * es.c.asDiagonal() * es.Gamma.transpose();
    CHECK((rec - K).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, es.c(0)));
    for (Index i = 0; i + 1 < n; ++i) CHECK(es.c(i) >= es.c(i + 1));
    CHECK(es.c.minCoeff() >= 0.0);
}

}  // namespace

TEST_CASE("eigendecompose_symmetric examples") {
    const EigenSystem id = eigendecompose_symmetric(MatrixXd::Identity(2, 2));
    CHECK(id.c(0) == doctest::Approx(1.0));
    CHECK(id.c(1) == doctest::Approx(1.0));
    check_eigensystem(MatrixXd::Identity(2, 2), id);

    const EigenSystem ones = eigendecompose_symmetric(MatrixXd::Ones(2, 2));
    CHECK(ones.c(0) == doctest::Approx(2.0));
    CHECK(std::abs(ones.c(1)) < 1e-14);
    CHECK(ones.rank() == 1);

    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const MatrixXd K = testutil::random_psd(5, 5, rng) + 0.1 * MatrixXd::Identity(5, 5);
        check_eigensystem(K, eigendecompose_symmetric(K));
    }
    const MatrixXd low = testutil::random_psd(30, 4, rng);
    const EigenSystem les = eigendecompose_symmetric(low);
    check_eigensystem(low, les);
    CHECK(les.rank() == 4);
}

TEST_CASE("eigendecompose_symmetric errors") {
    MatrixXd A(2, 2);
    A << 1, 0.5, 0.4, 1;
    CHECK_THROWS(eigendecompose_symmetric(A));
    MatrixXd B(2, 2);
    B << 1, 0, 0, -1;
    CHECK_THROWS_WITH(eigendecompose_symmetric(B), doctest::Contains("not PSD"));
}

TEST_CASE("inverse_sqrt_spd") {
    const MatrixXd I = MatrixXd::Identity(3, 3);
    CHECK((inverse_sqrt_spd(I) - I).cwiseAbs().maxCoeff() < 1e-14);
    MatrixXd D = MatrixXd::Zero(2, 2);
    D.diagonal() << 4, 9;
    const MatrixXd M = inverse_sqrt_spd(D);
    CHECK(M(0, 0) == doctest::Approx(0.5));
    CHECK(M(1, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(std::abs(M(0, 1)) < 1e-15);

    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        const MatrixXd S = testutil::random_psd(6, 6, rng) + 0.05 * MatrixXd::Identity(6, 6);
        const MatrixXd W = inverse_sqrt_spd(S);
        CHECK((W * S * W - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((W - W.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    MatrixXd sing = MatrixXd::Ones(2, 2);
    CHECK_THROWS_WITH(inverse_sqrt_spd(sing), doctest::Contains("not SPD"));
}

TEST_CASE("chi-square quantiles") {
    CHECK(chi2_quantile(2, 0.95) == doctest::Approx(-2.0 * std::log(0.05)).epsilon(1e-12));
    CHECK(chi2_quantile(1, 0.95) == doctest::Approx(testutil::chi2_quantile_bisect(1, 0.95)).epsilon(1e-10));
    CHECK(chi2_quantile(1, 0.95) == doctest::Approx(3.84146).epsilon(1e-5));
    CHECK(chi2_quantile(10, 0.5) == doctest::Approx(testutil::chi2_quantile_bisect(10, 0.5)).epsilon(1e-10));
    CHECK(chi2_quantile(10, 0.5) == doctest::Approx(9.34182).epsilon(1e-5));
    CHECK_THROWS(chi2_quantile(3, 0.0));
    CHECK_THROWS(chi2_quantile(3, 1.0));
    CHECK(chi2_cdf(4, chi2_quantile(4, 0.3)) == doctest::Approx(0.3).epsilon(1e-10));
}

TEST_CASE("chi2 cdf and quantile are inverse on a grid") {
    double worst = 0.0;
    for (int df = 1; df <= 50; ++df)
        for (double p : {0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999})
            worst = std::max(worst, std::abs(chi2_cdf(df, chi2_quantile(df, p)) - p));
    CHECK(worst < 1e-8);
}

TEST_CASE("F distribution function") {
    CHECK(f_cdf(1, 1, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f_cdf(3, 7, 0.0) == 0.0);
    CHECK(f_cdf(3, 7, -1.0) == 0.0);
    double prev = 0.0;
    for (double x = 0.0; x < 20.0; x += 0.25) {
        const double v = f_cdf(3, 54, x);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(f_cdf(3, 54, 1e6) == doctest::Approx(1.0));

    std::mt19937_64 rng(2024);
    std::chi_squared_distribution<double> c3(3.0), c54(54.0);
    const int draws = 1000000;
    int below = 0;
    for (int k = 0; k < draws; ++k) below += (c3(rng) / 3.0) / (c54(rng) / 54.0) <= 2.0;
    CHECK(std::abs(f_cdf(3, 54, 2.0) - static_cast<double>(below) / draws) < 5e-3);
}

TEST_CASE("nonnegative QP examples") {
    QpProblem p1{VectorXd::Constant(1, 2.0), MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1)};
    CHECK(solve_nonneg_qp(p1)(0) == doctest::Approx(1.0));
    QpProblem p2{VectorXd::Constant(1, -2.0), MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1)};
    CHECK(solve_nonneg_qp(p2)(0) == doctest::Approx(0.0));
    CHECK(qp_kkt_residual(p2, solve_nonneg_qp(p2)) < 1e-10);

    MatrixXd indef(2, 2);
    indef << 1, 0, 0, -1;
    QpProblem bad{VectorXd::Ones(2), indef, VectorXd::Zero(2)};
    CHECK_THROWS(solve_nonneg_qp(bad));
}

TEST_CASE("nonnegative QP matches projected gradient on random instances") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 25; ++rep) {
        QpProblem p;
        p.F = testutil::random_psd(4, 4, rng) + 0.2 * MatrixXd::Identity(4, 4);
        p.g = testutil::random_vector(4, rng);
        p.anchor = testutil::random_vector(4, rng).cwiseAbs();
        const VectorXd x = solve_nonneg_qp(p);
        CHECK(x.minCoeff() >= 0.0);
        CHECK(qp_kkt_residual(p, x) < 1e-10);

        // oracle: projected gradient descent on the same objective
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(p.F);
        const double step = 1.0 / es.eigenvalues().maxCoeff();
        VectorXd y = p.anchor;
        for (int it = 0; it < 100000; ++it) {
            const VectorXd grad = -p.g + p.F * (y - p.anchor);
            y = (y - step * grad).cwiseMax(0.0);
        }
        CHECK((x - y).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("Nelder-Mead minimizes a box-constrained quadratic") {
    auto f = [](const VectorXd& x) { return (x(0) - 1.0) * (x(0) - 1.0) + 3.0 * (x(1) + 0.5) * (x(1) + 0.5); };
    const VectorXd lo = VectorXd::Constant(2, -2.0), hi = VectorXd::Constant(2, 2.0);
    NelderMeadOptions opt;
    opt.xtol = 1e-8;
    opt.ftol = 1e-14;
    opt.max_evals = 2000;
    const auto r = nelder_mead(f, VectorXd::Zero(2), lo, hi, opt);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.x(1) == doctest::Approx(-0.5).epsilon(1e-4));

    // optimum outside the box lands on the boundary
    const VectorXd hi2 = VectorXd::Constant(2, 0.5);
    const auto r2 = nelder_mead(f, VectorXd::Zero(2), lo, hi2, opt);
    CHECK(r2.x(0) == doctest::Approx(0.5).epsilon(1e-4));
}
