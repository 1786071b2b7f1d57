#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ppt/data.hpp"

using namespace ppt;

TEST_CASE("load_dataset parses a small file") {
    const auto path = testutil::temp_file("four.csv", "x1,y,z\n0.1,1.5,1\n0.2,2.5,2\n0.3,-1,1\n0.4,0,2\n");
    const Dataset ds = load_dataset(path);
    CHECK(ds.n() == 4);
    CHECK(ds.d() == 1);
    CHECK(ds.H == 2);
    CHECK(ds.Y(2) == doctest::Approx(-1.0));
    CHECK(ds.Z(1) == 2);
}

TEST_CASE("load_dataset rejects bad input with row context") {
    SUBCASE("zero label") {
        const auto path = testutil::temp_file("zero.csv", "x1,y,z\n0.1,1,1\n0.2,2,0\n");
        CHECK_THROWS_WITH(load_dataset(path), doctest::Contains("group labels must be ≥ 1"));
    }
    SUBCASE("blank y names the row") {
        const auto path = testutil::temp_file("blank.csv", "x1,y,z\n0.1,1,1\n0.2,,2\n");
        CHECK_THROWS_WITH(load_dataset(path), doctest::Contains("row 3"));
    }
    SUBCASE("non-numeric") {
        const auto path = testutil::temp_file("nonnum.csv", "x1,y,z\n0.1,abc,1\n0.2,1,2\n");
        CHECK_THROWS_WITH(load_dataset(path), doctest::Contains("non-numeric"));
    }
    SUBCASE("short row") {
        const auto path = testutil::temp_file("short.csv", "x1,y,z\n0.1,1\n0.2,1,2\n");
        CHECK_THROWS_WITH(load_dataset(path), doctest::Contains("row 2"));
    }
    SUBCASE("wrong header") {
        const auto path = testutil::temp_file("hdr.csv", "a,y,z\n0.1,1,1\n0.2,1,2\n");
        CHECK_THROWS_WITH(load_dataset(path), doctest::Contains("missing column 'x1'"));
    }
    SUBCASE("empty") {
        const auto path = testutil::temp_file("empty.csv", "x1,y,z\n");
        CHECK_THROWS_WITH(load_dataset(path), doctest::Contains("empty file"));
    }
}

TEST_CASE("arbitrary positive labels are remapped in sorted order") {
    const auto path = testutil::temp_file("remap.csv", "x1,y,z\n0,1,9\n1,2,5\n2,3,9\n");
    const Dataset ds = load_dataset(path);
    CHECK(ds.H == 2);
    CHECK(ds.Z(0) == 2);
    CHECK(ds.Z(1) == 1);
    REQUIRE(ds.original_labels.size() == 2);
    CHECK(ds.original_labels[0] == 5);
    CHECK(ds.original_labels[1] == 9);
}

TEST_CASE("standardize two points") {
    MatrixXd X(2, 1);
    X << 0.0, 1.0;
    VectorXd Y(2);
    Y << 1.0, 3.0;
    const auto [s, st] = standardize(make_dataset(X, Y, {1, 2}));
    CHECK(s.Y(0) == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-14));
    CHECK(s.Y(1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    CHECK(st.applied);
}

TEST_CASE("standardize is idempotent and invertible") {
    std::mt19937_64 rng(3);
    const Dataset ds = testutil::two_group_data(
        30, 2, [](const VectorXd& x, long long) { return x(0) - x(1); }, 0.5, rng);
    const auto [s1, st1] = standardize(ds);
    const auto [s2, st2] = standardize(s1);
    CHECK((s2.X - s1.X).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s2.Y - s1.Y).cwiseAbs().maxCoeff() < 1e-12);
    const Dataset back = unstandardize(s1, st1);
    CHECK((back.X - ds.X).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((back.Y - ds.Y).cwiseAbs().maxCoeff() < 1e-10);
    (void)st2;
}

TEST_CASE("standardize rejects constant columns") {
    MatrixXd X(3, 2);
    X << 1, 5, 2, 5, 3, 5;
    VectorXd Y(3);
    Y << 1, 2, 3;
    CHECK_THROWS_WITH(standardize(make_dataset(X, Y, {1, 1, 2})), doctest::Contains("x2"));
    X.col(1) << 1, 2, 4;
    Y.setConstant(2.0);
    CHECK_THROWS_WITH(standardize(make_dataset(X, Y, {1, 1, 2})), doctest::Contains("column y"));
}

TEST_CASE("group_index partitions rows") {
    MatrixXd X(3, 1);
    X << 0, 1, 2;
    VectorXd Y = VectorXd::Zero(3);
    const GroupIndex g = group_index(make_dataset(X, Y, {1, 2, 1}));
    REQUIRE(g.H() == 2);
    CHECK(g.rows[0] == std::vector<Index>{0, 2});
    CHECK(g.rows[1] == std::vector<Index>{1});
    CHECK(g.sizes == std::vector<Index>{2, 1});

    const GroupIndex one = group_index(make_dataset(X, Y, {1, 1, 1}));
    CHECK(one.H() == 1);
    CHECK(one.sizes[0] == 3);

    MatrixXd X2(2, 1);
    X2 << 0, 1;
    const GroupIndex swapped = group_index(make_dataset(X2, VectorXd::Zero(2), {2, 1}));
    CHECK(swapped.rows[0] == std::vector<Index>{1});
    CHECK(swapped.rows[1] == std::vector<Index>{0});
}

TEST_CASE("validate catches bad records") {
    Dataset ds;
    ds.X = MatrixXd::Zero(1, 1);
    ds.Y = VectorXd::Zero(1);
    ds.Z = VectorXi::Ones(1);
    CHECK_THROWS(validate(ds));
    ds.X = MatrixXd::Zero(2, 1);
    ds.Y = VectorXd::Zero(2);
    ds.Z = VectorXi::Ones(2);
    ds.H = 2;
    CHECK_THROWS_WITH(validate(ds), doctest::Contains("no rows"));
    ds.H = 1;
    ds.Y(0) = std::nan("");
    CHECK_THROWS(validate(ds));
}
