#include "ppt/report.hpp"

#include <cmath>

namespace ppt {

namespace {

json vec_json(const VectorXd& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

// NaN and infinities have no JSON form; write null so re-parsing is exact
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json kernel_json(const KernelSpec& k) {
    json j;
    j["describe"] = k.describe();
    switch (k.family) {
        case KernelFamily::Linear: j["family"] = "linear"; break;
        case KernelFamily::Polynomial:
            j["family"] = "poly";
            j["degree"] = k.degree;
            break;
        case KernelFamily::Gaussian:
            j["family"] = "gaussian";
            j["omega"] = vec_json(k.omega);
            break;
        case KernelFamily::RationalQuadratic:
            j["family"] = "rq";
            j["omega"] = vec_json(k.omega);
            j["eta"] = k.eta;
            break;
        case KernelFamily::TruncatedBasis:
            j["family"] = "basis";
            j["q"] = k.q;
            j["basis"] = k.basis == BasisFamily::Monomial ? "monomial" : "fourier";
            break;
    }
    return j;
}

json report_header(const std::string& command, const json& config, std::uint64_t seed, double seconds) {
    json j;
    j["schema"] = kReportSchema;
    j["version"] = kVersion;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["timing"] = {{"wall_seconds", seconds}};
    return j;
}

json test_report_json(const PipelineResult& res, const Dataset& ds, StatKind stat, const json& config,
                      double seconds) {
    const TestReport& r = res.report;
    json j = report_header("test", config, r.seed, seconds);
    j["data"] = {{"n", ds.n()}, {"d", ds.d()}, {"H", ds.H}, {"group_labels", ds.original_labels}};

    json k = kernel_json(r.kernel);
    if (res.bandwidth_fit) {
        const KernelFit& f = *res.bandwidth_fit;
        json groups = json::array();
        for (const auto& g : f.group_omega) groups.push_back(vec_json(g));
        k["bandwidth_fit"] = {{"pooled", vec_json(f.pooled_omega)},
                              {"groups", groups},
                              {"safeguard_applied", f.safeguard_applied},
                              {"loglik", num(f.loglik)}};
    }
    j["kernel"] = k;
    j["standardized"] = res.standardized;
    json wj = {{"applied", res.whitened}};
    if (res.rho) wj["rho"] = *res.rho;
    j["whitening"] = wj;

    j["nuisance"] = {{"xi", num(r.nuisance.xi)},
                     {"delta2", num(r.nuisance.delta2)},
                     {"sigma2", num(r.nuisance.sigma2)},
                     {"sigma0_2", num(r.nuisance.sigma0_2)}};
    if (res.truncation) {
        const TruncationInfo& t = *res.truncation;
        j["truncation"] = {{"tail", t.tail},
                           {"lower", num(t.lower)},
                           {"upper", num(t.upper)},
                           {"clamped", t.clamped},
                           {"quantile_rule", "linear interpolation between order statistics"}};
    } else {
        j["truncation"] = nullptr;
    }

    j["permutation"] = {{"b_n", r.b_n},
                        {"b_n_policy", res.b_n_auto ? "auto" : "fixed-value"},
                        {"sizing_mode", to_string(res.sizing)},
                        {"mode", to_string(r.mode)},
                        {"B", r.B},
                        {"exhaustive", r.exhaustive}};
    j["statistic"] = {{"name", to_string(stat)}, {"T_obs", num(r.T_obs)}};
    j["p_value"] = num(r.raw_p);
    j["corrected_p_value"] = num(r.corrected_p);
    j["correction"] = {{"v", num(r.correction)}, {"alpha0", r.alpha0}, {"alpha", res.alpha}};
    j["warnings"] = r.warnings;
    return j;
}

json fit_report_json(const ModelFit& fit, const KernelSpec& kernel, const Dataset& ds, const json& config,
                     double seconds) {
    json j = report_header("fit", config, 0, seconds);
    j.erase("seed");
    j["data"] = {{"n", ds.n()}, {"d", ds.d()}, {"H", ds.H}, {"group_labels", ds.original_labels}};
    j["kernel"] = kernel_json(kernel);
    j["model"] = to_string(fit.model);
    j["tau2"] = vec_json(fit.fit.tau2);
    j["loglik"] = num(fit.fit.loglik);
    j["iterations"] = fit.fit.iterations;
    j["converged"] = fit.fit.converged;
    if (!fit.groups.empty()) {
        json g = json::array();
        for (const auto& f : fit.groups)
            g.push_back({{"tau2", vec_json(f.tau2)}, {"loglik", num(f.loglik)}, {"converged", f.converged}});
        j["groups"] = g;
    }
    return j;
}

json study_summary_json(const ScenarioSpec& spec, const StudyResult& res, const json& config, std::uint64_t seed) {
    json j = report_header("simulate", config, seed, res.seconds);
    j["scenario"] = {{"id", spec.scenario},
                     {"case", std::string(1, spec.case_tag)},
                     {"fn", spec.fn},
                     {"n", spec.n},
                     {"sigma2", spec.sigma2},
                     {"delta", spec.delta},
                     {"noise", to_string(spec.noise)},
                     {"rho", spec.rho}};
    j["reps"] = res.p_values.size();
    json rej = json::array();
    for (const auto& [a, rate] : res.rejection) rej.push_back({{"alpha", a}, {"rate", rate}});
    j["rejection"] = rej;
    const KsDistance ks = ks_uniform(res.p_values);
    j["ks_uniform"] = {{"d", ks.d}, {"above", ks.above}, {"below", ks.below}};
    j["ecdf"] = res.ecdf;
    return j;
}

std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

}  // namespace ppt
