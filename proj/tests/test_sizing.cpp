#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ppt/kernels.hpp"
#include "ppt/numerics.hpp"
#include "ppt/sizing.hpp"

using namespace ppt;

namespace {

struct Linear1d {
    MatrixXd X;
    EigenSystem es;
};

Linear1d linear_system(Index n, std::mt19937_64& g) {
    Linear1d s;
    s.X = testutil::random_matrix(n, 1, g);
    s.es = eigendecompose_symmetric(build_kernel_matrix(KernelSpec::linear(), s.X));
    return s;
}

EigenSystem gaussian_system(Index n, std::mt19937_64& g) {
    std::uniform_real_distribution<double> U(-1, 1);
    MatrixXd X(n, 1);
    for (Index i = 0; i < n; ++i) X(i, 0) = U(g);
    return eigendecompose_symmetric(build_kernel_matrix(KernelSpec::gaussian(2.0), X));
}

}  // namespace

TEST_CASE("losp_fixed") {
    std::mt19937_64 g(1);
    const Linear1d s = linear_system(30, g);
    for (Index b = 1; b <= 30; ++b) CHECK(losp_fixed(s.es, VectorXd::Zero(30), 1.0, b) == 0.0);

    const VectorXd f = (2.0 - 3.0 * s.X.col(0).array()).matrix();
    for (Index b = 1; b <= 28; ++b) CHECK(losp_fixed(s.es, f, 1.0, b) <= 1e-16 * f.squaredNorm() * b);
    CHECK(losp_fixed(s.es, f, 1.0, 30) > 1.0);

    const VectorXd r = testutil::random_vector(30, g);
    CHECK(losp_fixed(s.es, r, 0.5, 30) == doctest::Approx(r.squaredNorm() / 0.25).epsilon(1e-10));
    CHECK_THROWS(losp_fixed(s.es, r, 0.0, 5));
}

TEST_CASE("correction_v") {
    CHECK(correction_v(10, 0.0, 1e-5) == 0.0);
    for (double w : {1e-6, 1e-3, 0.01, 0.5}) CHECK(correction_v(20, w, 1e-5) >= correction_v(10, w, 1e-5));
    const double Q = testutil::chi2_quantile_bisect(10, 1.0 - 1e-5);
    const double oracle = 0.5 * std::exp(2.0 * std::sqrt(0.02) * std::sqrt(Q + 0.01)) - 0.5;
    CHECK(std::abs(correction_v(10, 0.01, 1e-5) - oracle) < 1e-10);
}

TEST_CASE("losp_gp") {
    std::mt19937_64 g(2);
    const EigenSystem es = gaussian_system(20, g);
    CHECK(losp_gp(0.0, es, 7) == 0.0);
    CHECK(losp_gp(3.0, es, 20) == doctest::Approx(3.0 * es.c(0)));
    CHECK(losp_gp(3.0, es, 5) == doctest::Approx(3.0 * es.c(15)));
    EigenSystem id;
    id.Gamma = MatrixXd::Identity(6, 6);
    id.c = VectorXd::Ones(6);
    for (Index b = 1; b <= 6; ++b) CHECK(losp_gp(2.0, id, b) == 2.0);
}

TEST_CASE("correction_v_tilde") {
    CHECK(correction_v_tilde(5, 0.0, 5e-6) == 0.0);
    for (Index b = 1; b < 40; ++b) CHECK(correction_v_tilde(b + 1, 0.01, 1e-5) >= correction_v_tilde(b, 0.01, 1e-5));
    const double Q = testutil::chi2_quantile_bisect(5, 1.0 - 5e-6);
    const double oracle = 0.5 * std::exp(0.5 * 0.001 * Q) - 0.5;
    CHECK(std::abs(correction_v_tilde(5, 0.001, 5e-6) - oracle) < 1e-12);
}

TEST_CASE("corrections are monotone in their arguments") {
    for (Index b : {1, 5, 20, 80})
        for (double w : {1e-6, 1e-4, 1e-2}) {
            CHECK(correction_v(b, 2 * w, 1e-5) >= correction_v(b, w, 1e-5));
            CHECK(correction_v_tilde(b, 2 * w, 1e-5) >= correction_v_tilde(b, w, 1e-5));
            CHECK(correction_v(b, w, 1e-4) < correction_v(b, w, 1e-6));
            CHECK(correction_v_tilde(b, w, 1e-4) < correction_v_tilde(b, w, 1e-6));
        }
}

TEST_CASE("corrected_pvalue") {
    CHECK(corrected_pvalue(0.3, 0.0, 0.0) == 0.3);
    CHECK(corrected_pvalue(0.04, 0.0, 5e-6) == doctest::Approx(0.040005).epsilon(1e-14));
    CHECK(corrected_pvalue(0.999, 0.01, 1e-5) > 1.0);
}

TEST_CASE("estimate_nuisance") {
    // Y orthogonal to the only kernel direction: delta^2 fits to 0
    const Index n = 12;
    VectorXd v = VectorXd::Ones(n), y(n);
    for (Index i = 0; i < n; ++i) y(i) = i % 2 ? 1.0 + 0.1 * i : -1.0 - 0.1 * (i + 1);
    y.array() -= y.mean();
    const Nuisance z = estimate_nuisance(y, v * v.transpose(), 0.1);
    CHECK(z.delta_zero);
    CHECK(z.xi == 0.0);
    CHECK(z.f_hat.norm() == 0.0);
    CHECK(z.sigma0 * z.sigma0 == doctest::Approx(y.squaredNorm() / n));

    std::mt19937_64 g(3);
    MatrixXd X(10, 1);
    VectorXd y10(10);
    std::normal_distribution<double> N(0, 0.2);
    for (Index i = 0; i < 10; ++i) {
        X(i, 0) = -1.0 + 0.2 * i;
        y10(i) = std::sin(2.0 * X(i, 0)) + N(g);
    }
    const MatrixXd K = build_kernel_matrix(KernelSpec::gaussian(1.0), X);
    const Nuisance e = estimate_nuisance(y10, K, 0.1);
    REQUIRE(e.delta2 > 0.0);
    const double tau = e.sigma2 / (std::pow(10.0, 0.1) * e.delta2);
    const VectorXd oracle = K * (K + 10.0 * tau * MatrixXd::Identity(10, 10)).ldlt().solve(y10);
    CHECK((e.f_hat - oracle).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(e.xi == doctest::Approx(e.delta2 / std::pow(10.0, 0.9) / e.sigma2));

    for (int rep = 0; rep < 100; ++rep) {
        const Index m = 15 + rep % 20;
        MatrixXd Xm = testutil::random_matrix(m, 1, g);
        VectorXd ym = (Xm.col(0).array() * 1.5).sin().matrix() + 0.3 * testutil::random_vector(m, g);
        ym.array() -= ym.mean();
        const Nuisance r = estimate_nuisance(ym, build_kernel_matrix(KernelSpec::gaussian(1.0), Xm), 0.1);
        CHECK(r.sigma0 * r.sigma0 <= ym.squaredNorm() / m * (1 + 1e-12));
    }
}

TEST_CASE("choose_b_n") {
    std::mt19937_64 g(4);
    const EigenSystem es = gaussian_system(200, g);
    SizingInputs in;
    in.es = &es;
    in.xi = 0.0;
    in.f_std = VectorXd::Zero(200);
    CHECK(choose_b_n(SizingMode::Gp, in, 0.05).b_n == 200);
    CHECK(choose_b_n(SizingMode::Fixed, in, 0.05).b_n == 200);
    CHECK(choose_b_n(SizingMode::Gp, in, 0.05).alpha0 == doctest::Approx(5e-6));

    for (double xi : {0.5, 5.0, 50.0, 1e4}) {
        in.xi = xi;
        in.f_std = es.Gamma * (es.c.array().sqrt() * testutil::random_vector(200, g).array()).matrix() * std::sqrt(xi);
        for (SizingMode m : {SizingMode::Gp, SizingMode::Fixed}) {
            const SizingChoice a = choose_b_n(m, in, 0.05), b = choose_b_n_scan(m, in, 0.05);
            CHECK(a.b_n == b.b_n);
            CHECK(a.v + a.alpha0 <= 1e-3 * 0.05);
            if (a.b_n < 200) CHECK(correction_at(m, in, a.b_n + 1, a.alpha0) + a.alpha0 > 1e-3 * 0.05);
        }
    }

    // tail directions outside the kernel's range carry no signal
    const Linear1d s = linear_system(50, g);
    SizingInputs lin;
    lin.es = &s.es;
    lin.xi = 10.0;
    lin.f_std = (1.0 + 4.0 * s.X.col(0).array()).matrix();
    CHECK(choose_b_n(SizingMode::Fixed, lin, 0.05).b_n >= 50 - s.es.rank());
    CHECK(choose_b_n(SizingMode::Gp, lin, 0.05).b_n >= 50 - s.es.rank());

    EigenSystem id;
    id.Gamma = MatrixXd::Identity(20, 20);
    id.c = VectorXd::Ones(20);
    SizingInputs flat;
    flat.es = &id;
    flat.xi = 1e3;
    const SizingChoice none = choose_b_n(SizingMode::Gp, flat, 0.05);
    CHECK(none.b_n == 0);
    CHECK(!none.warnings.empty());
}
