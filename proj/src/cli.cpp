#include "ppt/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "ppt/gpr.hpp"
#include "ppt/sim.hpp"

namespace ppt {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) out.push_back(part);
    return out;
}

double to_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw Error("invalid " + what + " '" + s + "'");
    }
    if (used != s.size()) throw Error("invalid " + what + " '" + s + "'");
    return v;
}

long to_long(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(s, &used);
    } catch (const std::exception&) {
        throw Error("invalid " + what + " '" + s + "'");
    }
    if (used != s.size()) throw Error("invalid " + what + " '" + s + "'");
    return v;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void apply_kernel_flag(const std::string& value, TestConfig& cfg) {
    const auto parts = split(value, ':');
    if (parts.empty()) throw Error("empty --kernel value");
    const std::string& name = parts[0];
    if (name == "linear" && parts.size() == 1) {
        cfg.family = KernelFamily::Linear;
    } else if (name == "poly" && parts.size() == 2) {
        cfg.family = KernelFamily::Polynomial;
        cfg.degree = static_cast<int>(to_long(parts[1], "polynomial degree"));
        if (cfg.degree < 1) throw Error("polynomial degree must be >= 1");
    } else if (name == "gaussian" && parts.size() == 1) {
        cfg.family = KernelFamily::Gaussian;
    } else if (name == "rq" && parts.size() == 1) {
        cfg.family = KernelFamily::RationalQuadratic;
    } else if (name == "basis" && (parts.size() == 2 || parts.size() == 3)) {
        cfg.family = KernelFamily::TruncatedBasis;
        cfg.q = static_cast<int>(to_long(parts[1], "basis size"));
        if (cfg.q < 1) throw Error("basis size must be >= 1");
        cfg.basis = BasisFamily::Monomial;
        if (parts.size() == 3) {
            if (parts[2] == "fourier")
                cfg.basis = BasisFamily::Fourier;
            else if (parts[2] != "monomial")
                throw Error("unknown basis '" + parts[2] + "'");
        }
    } else {
        throw Error("unknown kernel '" + value + "' (linear, poly:<p>, gaussian, rq, basis:<q>[:fourier])");
    }
}

std::optional<VectorXd> parse_bandwidth(const std::string& value) {
    if (value == "auto") return std::nullopt;
    const auto parts = split(value, ',');
    if (parts.empty()) throw Error("empty --bandwidth value");
    VectorXd w(static_cast<Index>(parts.size()));
    for (std::size_t k = 0; k < parts.size(); ++k) {
        w(static_cast<Index>(k)) = to_double(parts[k], "bandwidth");
        if (!(w(static_cast<Index>(k)) > 0.0)) throw Error("bandwidths must be positive");
    }
    return w;
}

std::uint64_t resolve_seed(const std::string& value) {
    if (value.empty()) {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        throw Error("invalid seed '" + value + "'");
    }
    if (used != value.size() || value[0] == '-') throw Error("invalid seed '" + value + "'");
    return v;
}

TestConfig build_test_config(const TestFlags& f, std::uint64_t seed) {
    TestConfig cfg;
    apply_kernel_flag(f.kernel, cfg);
    cfg.bandwidth = parse_bandwidth(f.bandwidth);
    cfg.eta = f.eta;
    if (f.jitter >= 0.0) cfg.jitter = f.jitter;
    cfg.gamma = f.gamma;
    cfg.isotropic = !f.anisotropic;
    cfg.safeguard = !f.no_safeguard;
    cfg.stat = parse_stat_kind(f.stat);
    if (cfg.stat == StatKind::Custom) throw Error("custom statistics are only available through the library");
    cfg.mode = parse_perm_mode(f.mode);
    if (f.bn != "auto") {
        const long b = to_long(f.bn, "--bn value");
        if (b < 0) throw Error("--bn must be nonnegative");
        cfg.b_n = b;
    }
    cfg.sizing = parse_sizing_mode(f.bn_mode);
    cfg.alpha = f.alpha;
    cfg.B = f.B;
    cfg.seed = seed;
    cfg.threads = resolve_threads(f.threads);
    if (f.standardize == "on")
        cfg.standardize = true;
    else if (f.standardize == "off")
        cfg.standardize = false;
    else if (f.standardize != "auto")
        throw Error("--standardize takes auto, on or off");
    cfg.truncate = f.truncate;

    if (!f.sigma.empty() && !f.sigma_pairs.empty()) throw Error("--sigma and --sigma-pairs are mutually exclusive");
    if (!f.rho.empty() && f.sigma_pairs.empty()) throw Error("--rho needs --sigma-pairs");
    if (!f.sigma.empty()) cfg.sigma = CovarianceModel::dense(load_sigma_csv(f.sigma));
    if (!f.sigma_pairs.empty()) {
        if (f.rho.empty()) throw Error("--sigma-pairs needs --rho <value|auto>");
        auto pairs = load_pairs_csv(f.sigma_pairs);
        if (f.rho == "auto") {
            cfg.rho_auto = true;
            cfg.sigma = CovarianceModel::paired(std::move(pairs), 0.0);
        } else {
            cfg.sigma = CovarianceModel::paired(std::move(pairs), to_double(f.rho, "--rho value"));
        }
    }
    validate_config(cfg);
    return cfg;
}

json flags_json(const TestFlags& f) {
    return {{"kernel", f.kernel},
            {"bandwidth", f.bandwidth},
            {"eta", f.eta},
            {"jitter", f.jitter < 0.0 ? json("default") : json(f.jitter)},
            {"gamma", f.gamma},
            {"anisotropic", f.anisotropic},
            {"safeguard", !f.no_safeguard},
            {"stat", f.stat},
            {"mode", f.mode},
            {"bn", f.bn},
            {"bn_mode", f.bn_mode},
            {"alpha", f.alpha},
            {"B", f.B},
            {"threads", f.threads},
            {"standardize", f.standardize},
            {"sigma", f.sigma},
            {"sigma_pairs", f.sigma_pairs},
            {"rho", f.rho},
            {"truncate", f.truncate}};
}

namespace {

void add_test_flags(CLI::App* app, TestFlags& f) {
    app->add_option("--kernel", f.kernel, "linear | poly:<p> | gaussian | rq | basis:<q>[:fourier]")
        ->capture_default_str();
    app->add_option("--bandwidth", f.bandwidth, "auto, or omega (comma-separated per covariate)")
        ->capture_default_str();
    app->add_option("--eta", f.eta, "rational-quadratic shape (held fixed)")->capture_default_str();
    app->add_option("--jitter", f.jitter, "diagonal jitter for GPR fits (default: 1e-5 for gaussian/rq, else 0)");
    app->add_option("--gamma", f.gamma, "exponent in the delta^2/n^(1-gamma) scaling")->capture_default_str();
    app->add_flag("--anisotropic", f.anisotropic, "fit one bandwidth per covariate");
    app->add_flag("--no-safeguard", f.no_safeguard, "skip the group-wise bandwidth safeguard");
    app->add_option("--stat", f.stat, "f | mse | lr-h1 | lr-h1prime | lr-pseudo")->capture_default_str();
    app->add_option("--mode", f.mode, "discrete | continuous")->capture_default_str();
    app->add_option("--bn", f.bn, "auto | <integer>")->capture_default_str();
    app->add_option("--bn-mode", f.bn_mode, "fixed | gp")->capture_default_str();
    app->add_option("--alpha", f.alpha, "target level")->capture_default_str();
    app->add_option("--B", f.B, "permutation draws")->capture_default_str();
    app->add_option("--seed", f.seed, "RNG seed (default: drawn and recorded)");
    app->add_option("--threads", f.threads, "worker threads (0: logical cores)")->capture_default_str();
    app->add_option("--standardize", f.standardize, "auto | on | off")->capture_default_str();
    app->add_option("--sigma", f.sigma, "dense n x n noise covariance CSV");
    app->add_option("--sigma-pairs", f.sigma_pairs, "pair map CSV (1-based i,j per line)");
    app->add_option("--rho", f.rho, "pair correlation, or auto");
    app->add_option("--truncate", f.truncate, "winsorize fitted residuals at this tail fraction")
        ->capture_default_str();
}

int cmd_test(const std::string& data, bool no_header, const TestFlags& f, const std::string& out_path,
             std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = resolve_seed(f.seed);
    const TestConfig cfg = build_test_config(f, seed);
    const Dataset ds = load_dataset(data, !no_header);
    if (cfg.sigma && cfg.sigma->kind == CovarianceModel::Kind::Dense && cfg.sigma->sigma.rows() != ds.n())
        throw Error("covariance file has " + std::to_string(cfg.sigma->sigma.rows()) + " rows but the data has " +
                    std::to_string(ds.n()));
    const PipelineResult res = run_pipeline(ds, cfg);
    json config = flags_json(f);
    config["data"] = data;
    config["header"] = !no_header;
    const json j = test_report_json(res, ds, cfg.stat, config, seconds_since(t0));
    write_text(out_path, dump_report(j), out);
    return 0;
}

int cmd_fit(const std::string& data, bool no_header, const TestFlags& f, const std::string& model,
            const std::string& out_path, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    TestFlags ff = f;
    ff.stat = "lr-pseudo";
    const TestConfig cfg = build_test_config(ff, 0);
    const GprModel gm = parse_gpr_model(model);
    const Dataset raw = load_dataset(data, !no_header);
    const bool do_std = cfg.standardize.value_or(config_kernel(cfg).stationary());
    const Dataset ds = do_std ? standardize(raw).first : raw;
    const double s = cfg.jitter.value_or(default_gpr_jitter(cfg.family));

    KernelSpec k = config_kernel(cfg);
    if (k.stationary() && !cfg.bandwidth) {
        KernelFitOptions opt;
        opt.isotropic = cfg.isotropic;
        opt.eta = cfg.eta;
        opt.jitter = s;
        opt.safeguard = cfg.safeguard;
        k.omega = fit_kernel_params(ds, cfg.family, cfg.gamma, opt).spec.omega;
    }
    k.jitter = s;
    const ModelFit fit = fit_model(ds, build_kernel_matrix(k, ds.X), gm, cfg.gamma, Vcm1Solver::Em);
    json config = flags_json(f);
    config.erase("stat");
    config["data"] = data;
    config["header"] = !no_header;
    config["model"] = model;
    const json j = fit_report_json(fit, k, ds, config, seconds_since(t0));
    write_text(out_path, dump_report(j), out);
    return 0;
}

struct SimFlags {
    int scenario = 1;
    std::string case_tag = "a";
    std::string fn = "i";
    long n = 200;
    int reps = 500;
    double sigma2 = -1.0;
    double delta = 1.0;
    bool null_model = false;
    std::string noise = "gaussian";
    double rho = 0.0;
    std::string sigma_mode = "true";
    std::string out;
    std::string summary;
};

int cmd_simulate(const SimFlags& sf, TestFlags f, std::ostream& out) {
    const std::uint64_t seed = resolve_seed(f.seed);
    ScenarioSpec spec;
    spec.scenario = sf.scenario;
    if (sf.case_tag.size() != 1) throw Error("--case takes one of a-e");
    spec.case_tag = sf.case_tag[0];
    spec.fn = parse_function_id(sf.fn);
    spec.n = sf.n;
    spec.sigma2 = sf.sigma2 > 0.0 ? sf.sigma2 : (sf.scenario == 5 ? 1.0 : 0.1);
    spec.delta = sf.delta;
    spec.null_model = sf.null_model;
    spec.noise = parse_noise_family(sf.noise);
    spec.rho = sf.rho;
    spec.check();

    if (sf.reps < 1) throw Error("--reps must be positive");
    StudyConfig sc;
    sc.test = build_test_config(f, seed);
    sc.reps = sf.reps;
    sc.alphas = {sc.test.alpha};
    sc.seed = seed;
    sc.threads = sc.test.threads;
    if (spec.scenario == 6) {
        if (sf.sigma_mode == "true")
            sc.supply_rho = spec.rho;
        else if (sf.sigma_mode == "estimate") {
            sc.test.sigma = CovarianceModel::paired(half_split_pairs(spec.n), 0.0);
            sc.test.rho_auto = true;
        } else if (sf.sigma_mode != "identity")
            throw Error("--sigma-mode takes true, estimate or identity");
    }
    const StudyResult res = run_calibration(spec, sc);

    std::ostringstream csv;
    csv << "replicate,p_value,corrected_p,b_n\n" << std::setprecision(17);
    for (std::size_t r = 0; r < res.p_values.size(); ++r)
        csv << r + 1 << ',' << res.p_values[r] << ',' << res.corrected[r] << ',' << res.b_n[r] << '\n';
    if (sf.out.empty()) throw Error("--out is required");
    write_text(sf.out, csv.str(), out);

    json config = flags_json(f);
    config["scenario"] = sf.scenario;
    config["case"] = sf.case_tag;
    config["fn"] = sf.fn;
    config["n"] = sf.n;
    config["reps"] = sf.reps;
    config["sigma2"] = spec.sigma2;
    config["delta"] = sf.delta;
    config["null"] = sf.null_model;
    config["noise"] = sf.noise;
    config["rho_true"] = sf.rho;
    config["sigma_mode"] = sf.sigma_mode;
    config["out"] = sf.out;
    const json j = study_summary_json(spec, res, config, seed);
    write_text(sf.summary, dump_report(j), out);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kernel-based partial permutation tests for heterogeneous regression functions", "ppt"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string data, out_path, model = "h0";
    bool no_header = false;
    TestFlags tf, ff, simf;
    SimFlags sf;

    CLI::App* test = app.add_subcommand("test", "run the partial permutation test on a CSV dataset");
    test->add_option("--data", data, "CSV with columns x1..xd,y,z")->required();
    test->add_flag("--no-header", no_header, "the CSV has no header row");
    test->add_option("--out", out_path, "report path (default: stdout)");
    add_test_flags(test, tf);

    CLI::App* fit = app.add_subcommand("fit", "fit one GPR model and report its variance components");
    fit->add_option("--data", data, "CSV with columns x1..xd,y,z")->required();
    fit->add_flag("--no-header", no_header, "the CSV has no header row");
    fit->add_option("--out", out_path, "report path (default: stdout)");
    fit->add_option("--model", model, "h0 | h1 | h1prime | pseudo")->capture_default_str();
    add_test_flags(fit, ff);

    CLI::App* sim = app.add_subcommand("simulate", "run a simulation study");
    sim->add_option("--scenario", sf.scenario, "1-6")->capture_default_str();
    sim->add_option("--case", sf.case_tag, "a-e")->capture_default_str();
    sim->add_option("--fn", sf.fn, "i-vi (or 1-6), g0 for the non-smooth function")->capture_default_str();
    sim->add_option("--n", sf.n, "sample size")->capture_default_str();
    sim->add_option("--reps", sf.reps, "replicates")->capture_default_str();
    sim->add_option("--sigma2", sf.sigma2, "noise variance (default 0.1; 1.0 for Scenario 5)");
    sim->add_option("--delta", sf.delta, "heterogeneity scale for Scenarios 3-4")->capture_default_str();
    sim->add_flag("--null", sf.null_model, "Scenario 5: both groups share f_1");
    sim->add_option("--noise", sf.noise, "gaussian | uniform | t5")->capture_default_str();
    sim->add_option("--sigma-mode", sf.sigma_mode, "Scenario 6: true | estimate | identity")->capture_default_str();
    sim->add_option("--out", sf.out, "per-replicate CSV")->required();
    sim->add_option("--summary", sf.summary, "summary JSON path (default: stdout)");
    {
        // the simulate command reuses the test flags except the Sigma inputs
        simf.B = 199;
        add_test_flags(sim, simf);
        sim->remove_option(sim->get_option("--sigma"));
        sim->remove_option(sim->get_option("--sigma-pairs"));
        sim->remove_option(sim->get_option("--rho"));
        sim->add_option("--rho", sf.rho, "Scenario 6 pair correlation")->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*test) return cmd_test(data, no_header, tf, out_path, out);
        if (*fit) return cmd_fit(data, no_header, ff, model, out_path, out);
        if (*sim) return cmd_simulate(sf, simf, out);
    } catch (const std::exception& e) {
        err << "ppt: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace ppt
