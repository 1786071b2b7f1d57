#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ppt/correlated.hpp"
#include "ppt/numerics.hpp"
#include "ppt/sim.hpp"

using namespace ppt;

TEST_CASE("expand_covariance") {
    const auto pairs = std::vector<std::pair<Index, Index>>{{0, 2}, {1, 3}};
    CHECK(expand_covariance(CovarianceModel::paired(pairs, 0.0), 4) == MatrixXd::Identity(4, 4));
    const MatrixXd S = expand_covariance(CovarianceModel::paired(pairs, 0.5), 4);
    MatrixXd expect = MatrixXd::Identity(4, 4);
    expect(0, 2) = expect(2, 0) = expect(1, 3) = expect(3, 1) = 0.5;
    CHECK(S == expect);
    const MatrixXd N = expand_covariance(CovarianceModel::paired(pairs, -0.5), 4);
    const EigenSystem es = eigendecompose_symmetric(N);
    CHECK(es.c(0) == doctest::Approx(1.5));
    CHECK(es.c(3) == doctest::Approx(0.5));

    CHECK_THROWS(expand_covariance(CovarianceModel::paired(pairs, 1.0), 4));
    CHECK_THROWS(expand_covariance(CovarianceModel::paired({{0, 1}, {1, 2}}, 0.3), 4));
    CHECK_THROWS(expand_covariance(CovarianceModel::paired({{0, 1}}, 0.3), 4));
    MatrixXd bad = MatrixXd::Identity(3, 3);
    bad(0, 1) = bad(1, 0) = 2.0;
    CHECK_THROWS(expand_covariance(CovarianceModel::dense(bad), 3));
    const MatrixXd scaled = expand_covariance(CovarianceModel::dense(4.0 * MatrixXd::Identity(3, 3)), 3);
    CHECK(scaled.isApprox(MatrixXd::Identity(3, 3)));
}

TEST_CASE("whiten") {
    std::mt19937_64 g(1);
    const Dataset ds = testutil::two_group_data(6, 1, [](const VectorXd& x, long long) { return x(0); }, 1.0, g);
    auto [y1, w1] = whiten(ds, MatrixXd::Identity(6, 6));
    CHECK(y1 == ds.Y);
    const MatrixXd K = testutil::random_psd(6, 6, g);
    CHECK(w1.conjugate(K) == K);
    auto [y4, w4] = whiten(ds, 4.0 * MatrixXd::Identity(6, 6));
    CHECK((y4 - ds.Y / 2.0).norm() < 1e-12);

    const MatrixXd S = testutil::random_psd(6, 6, g) + 0.5 * MatrixXd::Identity(6, 6);
    const Whitening w = make_whitening(S);
    const VectorXd y = testutil::random_vector(6, g);
    CHECK((w.unapply(w.apply(y)) - y).norm() < 1e-10);
    const EigenSystem kc = eigendecompose_symmetric(w.conjugate(K));
    CHECK(kc.c.minCoeff() >= -1e-8 * kc.c(0));

    const Eigen::LLT<MatrixXd> L(S);
    MatrixXd acc = MatrixXd::Zero(6, 6);
    const int draws = 100000;
    for (int k = 0; k < draws; ++k) {
        const VectorXd e = w.apply(L.matrixL() * testutil::random_vector(6, g));
        acc += e * e.transpose();
    }
    CHECK((acc / draws - MatrixXd::Identity(6, 6)).norm() < 0.02);

    MatrixXd ns = MatrixXd::Identity(6, 6);
    ns(5, 5) = -1.0;
    CHECK_THROWS(make_whitening(ns));
}

TEST_CASE("estimate_structured_rho") {
    MatrixXd X(8, 1);
    X << 0, 1, 2, 3, 0, 1, 2, 3;
    VectorXd y(8);
    y << 1, -2, 3, 0.5, 1, -2, 3, 0.5;
    const Dataset ds = make_dataset(X, y, {1, 1, 1, 1, 2, 2, 2, 2});
    const auto pairs = half_split_pairs(8);
    CHECK(estimate_structured_rho(ds, pairs, VectorXd::Zero(8)) == 0.99);
    Dataset opp = ds;
    opp.Y.tail(4) = -ds.Y.head(4);
    CHECK(estimate_structured_rho(opp, pairs, VectorXd::Zero(8)) == -0.99);
    CHECK_THROWS(estimate_structured_rho(make_dataset(X.topRows(4), y.head(4), {1, 1, 2, 2}), half_split_pairs(4),
                                         VectorXd::Zero(4)));

    // sampling distribution at rho = 0.5, n = 200. The coverage of
    // [0.35, 0.65] is about 0.952, so 500 draws cannot separate it from
    // 0.95; the same bound is checked on 20000 draws.
    std::mt19937_64 g(2);
    std::normal_distribution<double> N(0, 1);
    int inside = 0;
    const double c = std::sqrt(1 - 0.25);
    for (int rep = 0; rep < 20000; ++rep) {
        MatrixXd Xr(200, 1);
        VectorXd yr(200);
        std::vector<long long> z(200);
        for (Index i = 0; i < 100; ++i) {
            const double e1 = N(g), e2 = N(g);
            Xr(i, 0) = Xr(100 + i, 0) = i;
            yr(i) = e1;
            yr(100 + i) = 0.5 * e1 + c * e2;
            z[i] = 1;
            z[100 + i] = 2;
        }
        const double r = estimate_structured_rho(make_dataset(Xr, yr, z), half_split_pairs(200), VectorXd::Zero(200));
        inside += r >= 0.35 && r <= 0.65;
    }
    CHECK(inside >= 19000);
}

TEST_CASE("identity covariance reduces to the plain test") {
    std::mt19937_64 g(3);
    const Dataset ds = testutil::two_group_data(
        30, 1, [](const VectorXd& x, long long z) { return x(0) + (z == 2 ? 0.3 : 0.0); }, 0.5, g);
    const KernelSpec k = KernelSpec::polynomial(2);
    PermutationPlan plan;
    plan.b_n = 24;
    plan.B = 99;
    plan.seed = 11;
    const TestReport a =
        run_test_correlated(ds, k, CovarianceModel::dense(MatrixXd::Identity(30, 30)), plan, StatKind::F);
    StatContext ctx;
    ctx.ds = &ds;
    ctx.kernel = k;
    const TestReport b =
        run_test(ds.Y, eigendecompose_symmetric(build_kernel_matrix(k, ds.X)), plan, statistic_adapter(StatKind::F, ctx));
    CHECK(a.T_obs == b.T_obs);
    CHECK(a.T_perm == b.T_perm);
    CHECK(a.raw_p == b.raw_p);
}

TEST_CASE("balanced paired design stays valid under a wrong correlation") {
    ScenarioSpec spec;
    spec.scenario = 6;
    spec.n = 100;
    spec.rho = 0.5;
    const KernelSpec k = KernelSpec::polynomial(3);
    PermutationPlan plan;
    plan.b_n = 96;
    plan.B = 99;
    plan.threads = 1;
    const int reps = 500;
    int reject = 0;
    for (int r = 0; r < reps; ++r) {
        Rng rng = replicate_rng(17, r);
        const Dataset ds = generate(spec, rng);
        plan.seed = mix_seed(17, r);
        const TestReport rep = run_test_correlated(
            ds, k, CovarianceModel::paired(half_split_pairs(spec.n), 0.2), plan, StatKind::F);
        reject += rep.raw_p <= 0.05;
    }
    CHECK(reject / double(reps) <= 0.05 + 3 * std::sqrt(0.05 * 0.95 / reps));
}

TEST_CASE("covariance files") {
    const std::string s = testutil::temp_file("sigma.csv", "2,0.5\n0.5,2\n");
    const MatrixXd S = load_sigma_csv(s);
    CHECK(S.rows() == 2);
    CHECK(S(0, 1) == 0.5);
    const std::string p = testutil::temp_file("pairs.csv", "i,j\n1,3\n2,4\n");
    const auto pairs = load_pairs_csv(p);
    REQUIRE(pairs.size() == 2u);
    CHECK(pairs[0] == std::pair<Index, Index>{0, 2});
    CHECK_THROWS(load_sigma_csv(testutil::temp_file("bad.csv", "1,x\n0,1\n")));
}
