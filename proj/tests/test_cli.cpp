#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "ppt/cli.hpp"

using namespace ppt;

namespace {

const std::string kSmall = std::string(PPT_TEST_DATA_DIR) + "/small.csv";

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "ppt");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

json strip_volatile(json j) {
    j.erase("timing");
    j["config"].erase("sigma");
    return j;
}

std::string identity_csv(int n) {
    std::ostringstream s;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) s << (k ? "," : "") << (i == k ? 1 : 0);
        s << "\n";
    }
    return testutil::temp_file("identity.csv", s.str());
}

}  // namespace

TEST_CASE("minimal test run") {
    const Run r = run({"test", "--data", kSmall, "--kernel", "linear", "--stat", "f", "--mode", "continuous",
                       "--seed", "3", "--threads", "1", "--B", "99"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    const double p = j["p_value"];
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    CHECK(j["schema"] == 1);
    CHECK(j["seed"] == 3);
    CHECK(j.contains("version"));
    CHECK(j["timing"].contains("wall_seconds"));
    CHECK(j["config"]["kernel"] == "linear");
    CHECK(dump_report(json::parse(r.out)) == r.out);
}

TEST_CASE("seed is drawn and recorded when absent") {
    const Run r = run({"test", "--data", kSmall, "--kernel", "linear", "--stat", "f", "--threads", "1", "--B", "19"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    const std::uint64_t seed = j["seed"];
    const Run again = run({"test", "--data", kSmall, "--kernel", "linear", "--stat", "f", "--threads", "1", "--B",
                           "19", "--seed", std::to_string(seed)});
    CHECK(json::parse(again.out)["p_value"] == j["p_value"]);
}

TEST_CASE("identity covariance gives the same report") {
    const std::vector<std::string> base = {"test", "--data", kSmall, "--seed", "5", "--threads", "1", "--B", "99"};
    const Run a = run(base);
    std::vector<std::string> with = base;
    with.insert(with.end(), {"--sigma", identity_csv(40)});
    const Run b = run(with);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(strip_volatile(json::parse(a.out)) == strip_volatile(json::parse(b.out)));
}

TEST_CASE("truncation metadata") {
    const Run r = run({"test", "--data", kSmall, "--truncate", "0.02", "--seed", "1", "--threads", "1", "--B", "49"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    REQUIRE(j["truncation"].is_object());
    CHECK(j["truncation"]["tail"] == 0.02);
    CHECK(j["truncation"].contains("quantile_rule"));
    CHECK(run({"test", "--data", kSmall, "--seed", "1", "--B", "9"}).out.find("\"truncation\": null") !=
          std::string::npos);
}

TEST_CASE("report file output round-trips") {
    const std::string path = testutil::temp_file("report.json", "");
    const Run r = run({"test", "--data", kSmall, "--kernel", "poly:2", "--stat", "f", "--seed", "2", "--threads",
                       "1", "--B", "49", "--out", path});
    REQUIRE(r.code == 0);
    std::ifstream in(path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(dump_report(json::parse(text)) == text);
}

TEST_CASE("fit command") {
    const Run r = run({"fit", "--data", kSmall, "--model", "pseudo", "--kernel", "gaussian"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["model"] == "pseudo");
    CHECK(j["tau2"].size() == 4u);
    CHECK(j.contains("loglik"));
    CHECK(j.contains("converged"));
    CHECK(j.contains("iterations"));
    CHECK(run({"fit", "--data", kSmall, "--model", "h3"}).code != 0);
}

TEST_CASE("simulate command") {
    const std::string csv = testutil::temp_file("sim.csv", "");
    const Run r = run({"simulate", "--scenario", "1", "--case", "a", "--fn", "i", "--n", "30", "--reps", "4",
                       "--kernel", "linear", "--stat", "f", "--bn", "28", "--B", "19", "--seed", "4", "--threads", "1",
                       "--out", csv});
    REQUIRE(r.code == 0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "replicate,p_value,corrected_p,b_n");
    int rows = 0;
    for (std::string line; std::getline(in, line);) rows += !line.empty();
    CHECK(rows == 4);
    const json j = json::parse(r.out);
    CHECK(j["reps"] == 4);
    CHECK(j["rejection"][0]["alpha"] == 0.05);
}

TEST_CASE("errors exit nonzero with a message") {
    Run r = run({"test", "--data", "/nonexistent.csv"});
    CHECK(r.code != 0);
    CHECK(r.err.find("ppt: error") != std::string::npos);
    r = run({"test", "--data", kSmall, "--mode", "sideways"});
    CHECK(r.code != 0);
    r = run({"test", "--data", kSmall, "--kernel", "poly:0"});
    CHECK(r.code != 0);
    r = run({"test", "--data", kSmall, "--alpha", "1.5"});
    CHECK(r.code != 0);
    r = run({"test", "--data", kSmall, "--sigma", identity_csv(5)});
    CHECK(r.code != 0);
    r = run({"simulate", "--scenario", "3", "--case", "e", "--out", "/tmp/x.csv"});
    CHECK(r.code != 0);
    CHECK(run({"bogus"}).code != 0);
}

TEST_CASE("flag helpers") {
    TestConfig c;
    apply_kernel_flag("poly:3", c);
    CHECK(c.family == KernelFamily::Polynomial);
    CHECK(c.degree == 3);
    apply_kernel_flag("basis:4:fourier", c);
    CHECK(c.q == 4);
    CHECK(c.basis == BasisFamily::Fourier);
    CHECK_THROWS(apply_kernel_flag("spline", c));
    CHECK(!parse_bandwidth("auto"));
    CHECK(parse_bandwidth("0.5,2")->size() == 2);
    CHECK_THROWS(parse_bandwidth("-1"));
    CHECK(resolve_seed("17") == 17u);
}
