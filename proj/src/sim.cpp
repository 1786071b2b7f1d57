#include "ppt/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace ppt {

std::string to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::Gaussian: return "gaussian";
        case NoiseFamily::Uniform: return "uniform";
        case NoiseFamily::StudentT5: return "t5";
    }
    return "?";
}

NoiseFamily parse_noise_family(const std::string& s) {
    if (s == "gaussian") return NoiseFamily::Gaussian;
    if (s == "uniform") return NoiseFamily::Uniform;
    if (s == "t5" || s == "student-t5") return NoiseFamily::StudentT5;
    throw Error("unknown noise family '" + s + "'");
}

int parse_function_id(const std::string& s) {
    static const char* roman[] = {"i", "ii", "iii", "iv", "v", "vi"};
    if (s == "g0" || s == "nonsmooth") return 0;
    for (int k = 0; k < 6; ++k)
        if (s == roman[k] || s == std::to_string(k + 1)) return k + 1;
    throw Error("unknown function id '" + s + "'");
}

CaseWeights case_weights(char case_tag) {
    switch (case_tag) {
        case 'a': return {0.5, 0.5, 0.5, 0.5};
        case 'b': return {0.2, 0.8, 0.5, 0.5};
        case 'c': return {0.5, 0.5, 0.8, 0.2};
        case 'd': return {0.2, 0.8, 0.8, 0.2};
        case 'e': return {0.5, 0.5, 1.0, 0.0};
        default: break;
    }
    throw Error(std::string("unknown case '") + case_tag + "'");
}

void ScenarioSpec::check() const {
    if (scenario < 1 || scenario > 6) throw Error("scenario must be 1-6");
    if (n < 4) throw Error("simulated n must be at least 4");
    if (!(sigma2 > 0.0)) throw Error("noise variance must be positive");
    case_weights(case_tag);
    switch (scenario) {
        case 1:
        case 2:
            if (fn < 0 || fn > 6) throw Error("Scenarios 1-2 take functions i-vi or g0");
            break;
        case 3:
        case 4:
            if (case_tag != 'a' && case_tag != 'b')
                throw Error(std::string("case ") + case_tag + " is not defined for Scenario " + std::to_string(scenario));
            if (scenario == 3 && (fn < 1 || fn > 3)) throw Error("Scenario 3 takes functions i-iii");
            if (scenario == 4 && (fn < 4 || fn > 6)) throw Error("Scenario 4 takes functions iv-vi");
            break;
        case 5:
        case 6:
            if (case_tag != 'a') throw Error("Scenarios 5-6 have a fixed design; use case a");
            if (n % 2 != 0) throw Error("Scenarios 5-6 need an even n");
            if (scenario == 5 && (fn < 1 || fn > 2)) throw Error("Scenario 5 takes functions i-ii");
            if (scenario == 6 && fn != 1) throw Error("Scenario 6 has a single function");
            if (!(std::abs(rho) < 1.0)) throw Error("rho must lie in (-1, 1)");
            break;
    }
}

std::string ScenarioSpec::describe() const {
    std::string s = "scenario " + std::to_string(scenario) + " case " + case_tag + " fn " +
                    (fn == 0 ? std::string("g0") : std::to_string(fn)) + " n " + std::to_string(n);
    return s;
}

double nonsmooth_g0(double x) {
    const double t = 3.0 * x;
    const double fl = std::floor(t);
    const double frac = t - fl;
    const double m = std::min(std::abs(frac), std::abs(frac - 1.0));
    long r = static_cast<long>(fl) % 2;
    if (r < 0) r += 2;
    return 2.0 * m * static_cast<double>(r + 1) - 1.0;
}

namespace {

constexpr double kPi = std::numbers::pi;

double bump(double x, double amp, double freq) { return amp * std::sin(freq * kPi * x) * (1.0 - x); }

double scalar_menu(int fn, double x) {
    switch (fn) {
        case 0: return nonsmooth_g0(x);
        case 1: return x;
        case 2: return 2.0 * x * x - 1.0;
        case 3: return 4.0 * x * x * x / 3.0 - x / 3.0;
        case 4: return 4.0 / (1.0 + x * x) - 3.0;
        case 5: return std::sin(4.0 * x);
        case 6: return std::sin(6.0 * x);
    }
    throw Error("bad function id");
}

double planar_menu(int fn, double x1, double x2) {
    const double s = x1 + x2;
    switch (fn) {
        case 0: return nonsmooth_g0(x1) * nonsmooth_g0(x2);
        case 1: return s / 2.0;
        case 2: return x1 * x2;
        case 3: return 2.0 * s * s * s / 15.0 - s / 30.0;
        case 4: return 3.0 / (1.0 + x1 * x1 + x2 * x2) - 2.0;
        case 5: return std::sin(6.0 * x1) + x2;
        case 6: return std::sin(6.0 * x1 + 6.0 * x2);
    }
    throw Error("bad function id");
}

// (f1, f2) pairs of the alternative menus
std::pair<double, double> alternative_pair(int fn, const VectorXd& x) {
    switch (fn) {
        case 1: return {1.0 + x(0), 2.0 + 3.0 * x(0)};
        case 2: return {1.0 / 3.0 + x(0) / 2.0, (x(0) + 1.0) * (x(0) + 1.0) / 4.0};
        case 3: {
            const double x2 = x(0) * x(0);
            return {1.0 / 3.0 + x(0) / 2.0, 0.2 + x(0) / 2.0 - x2 * x2 + x2};
        }
        case 4: return {1.0 + x(0) + x(1), 2.0 + 3.0 * x(0) + x(1)};
        case 5:
            return {1.0 / 3.0 + x(0) / 2.0 + x(1) / 2.0,
                    (x(0) + 1.0) * (x(0) + 1.0) / 4.0 + (x(1) + 1.0) * (x(1) + 1.0) / 4.0 - 1.0 / 3.0};
        case 6: {
            const double base = 1.0 / 3.0 + x(0) / 2.0 + x(1) / 2.0;
            return {base, base + std::sin(kPi * x(0)) * std::sin(kPi * x(1))};
        }
    }
    throw Error("bad function id");
}

double raw_parallel(int k, double x) {
    switch (k) {
        case 1: return bump(x, 2.5, 3.0);
        case 2: return bump(x, 3.5, 3.0);
        case 3: return bump(x, 2.5, 3.4);
    }
    throw Error("parallel_center: k must be 1, 2 or 3");
}

}  // namespace

double parallel_center(int k) {
    static const double m[3] = {
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate([](double x) { return raw_parallel(1, x); }, 0.0,
                                                                     1.0, 15, 1e-14),
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate([](double x) { return raw_parallel(2, x); }, 0.0,
                                                                     1.0, 15, 1e-14),
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate([](double x) { return raw_parallel(3, x); }, 0.0,
                                                                     1.0, 15, 1e-14),
    };
    if (k < 1 || k > 3) throw Error("parallel_center: k must be 1, 2 or 3");
    return m[k - 1];
}

double scenario_mean(const ScenarioSpec& spec, int z, const VectorXd& x) {
    switch (spec.scenario) {
        case 1: return scalar_menu(spec.fn, x(0));
        case 2: return planar_menu(spec.fn, x(0), x(1));
        case 3:
        case 4: {
            const auto [f1, f2] = alternative_pair(spec.fn, x);
            return z == 1 ? f1 : f1 + spec.delta * (f2 - f1);
        }
        case 5: {
            const double f1 = raw_parallel(1, x(0)) - parallel_center(1);
            if (z == 1 || spec.null_model) return f1;
            const int k = spec.fn == 1 ? 2 : 3;
            return raw_parallel(k, x(0)) - parallel_center(k);
        }
        case 6: return bump(x(0), 2.5, 3.0);
    }
    throw Error("scenario must be 1-6");
}

namespace {

double unit_noise(NoiseFamily f, Rng& rng) {
    switch (f) {
        case NoiseFamily::Gaussian: return std::normal_distribution<double>(0.0, 1.0)(rng);
        case NoiseFamily::Uniform: {
            const double r = std::sqrt(3.0);
            return std::uniform_real_distribution<double>(-r, r)(rng);
        }
        case NoiseFamily::StudentT5: return std::student_t_distribution<double>(5.0)(rng);
    }
    return 0.0;
}

}  // namespace

Dataset generate(const ScenarioSpec& spec, Rng& rng) {
    spec.check();
    const Index n = spec.n;
    const Index d = (spec.scenario == 2 || spec.scenario == 4) ? 2 : 1;
    const double sd = std::sqrt(spec.sigma2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MatrixXd X(n, d);
    std::vector<long long> Z(n);

    if (spec.scenario <= 4) {
        const CaseWeights w = case_weights(spec.case_tag);
        // redraw the rare all-one-group assignment so both groups exist
        for (;;) {
            int ones = 0;
            for (Index i = 0; i < n; ++i) {
                Z[i] = unit(rng) < w.p1 ? 1 : 2;
                ones += Z[i] == 1;
            }
            if (ones > 0 && ones < n) break;
        }
        for (Index i = 0; i < n; ++i) {
            for (Index k = 0; k < d; ++k) {
                if (spec.scenario >= 3) {
                    X(i, k) = 2.0 * unit(rng) - 1.0;
                } else {
                    const double a = Z[i] == 1 ? w.a1 : w.a2;
                    const bool left = unit(rng) < a;
                    const double u = unit(rng);
                    X(i, k) = left ? u - 1.0 : u;
                }
            }
        }
    } else {
        const Index half = n / 2;
        for (Index i = 0; i < half; ++i) {
            X(i, 0) = X(half + i, 0) = unit(rng);
            Z[i] = 1;
            Z[half + i] = 2;
        }
    }

    VectorXd Y(n);
    for (Index i = 0; i < n; ++i) Y(i) = scenario_mean(spec, static_cast<int>(Z[i]), X.row(i).transpose());

    if (spec.scenario == 6) {
        const Index half = n / 2;
        const double c = std::sqrt(1.0 - spec.rho * spec.rho);
        for (Index i = 0; i < half; ++i) {
            const double e1 = unit_noise(spec.noise, rng);
            const double e2 = unit_noise(spec.noise, rng);
            Y(i) += sd * e1;
            Y(half + i) += sd * (spec.rho * e1 + c * e2);
        }
    } else {
        for (Index i = 0; i < n; ++i) Y(i) += sd * unit_noise(spec.noise, rng);
    }
    return make_dataset(std::move(X), std::move(Y), Z);
}

double sample_quantile(std::vector<double> v, double p) {
    if (v.empty()) throw Error("sample_quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw Error("sample_quantile: p must lie in [0, 1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

VectorXd truncate_residuals(const VectorXd& Y, const VectorXd& f_hat, double tail, TruncationInfo* info) {
    if (!(tail >= 0.0 && tail < 0.5)) throw Error("truncation tail must lie in [0, 0.5)");
    if (Y.size() != f_hat.size()) throw Error("truncate_residuals: length mismatch");
    const VectorXd r = Y - f_hat;
    TruncationInfo ti;
    ti.tail = tail;
    VectorXd out = Y;
    if (tail > 0.0) {
        const std::vector<double> rv(r.data(), r.data() + r.size());
        ti.lower = sample_quantile(rv, tail);
        ti.upper = sample_quantile(rv, 1.0 - tail);
        for (Index i = 0; i < r.size(); ++i) {
            if (r(i) < ti.lower) {
                out(i) = f_hat(i) + ti.lower;
                ++ti.clamped;
            } else if (r(i) > ti.upper) {
                out(i) = f_hat(i) + ti.upper;
                ++ti.clamped;
            }
        }
    } else if (r.size() > 0) {
        ti.lower = r.minCoeff();
        ti.upper = r.maxCoeff();
    }
    if (info) *info = ti;
    return out;
}

double rejection_rate(const std::vector<double>& p, double alpha) {
    if (p.empty()) return 0.0;
    const auto k = std::count_if(p.begin(), p.end(), [alpha](double x) { return x <= alpha; });
    return static_cast<double>(k) / static_cast<double>(p.size());
}

std::vector<double> ecdf_grid(const std::vector<double>& p) {
    std::vector<double> out(101, 0.0);
    for (int k = 0; k <= 100; ++k) out[k] = rejection_rate(p, k / 100.0);
    return out;
}

KsDistance ks_uniform(std::vector<double> p) {
    KsDistance out;
    if (p.empty()) return out;
    std::sort(p.begin(), p.end());
    const double m = static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double u = std::clamp(p[i], 0.0, 1.0);
        out.above = std::max(out.above, static_cast<double>(i + 1) / m - u);
        out.below = std::max(out.below, u - static_cast<double>(i) / m);
    }
    out.d = std::max(out.above, out.below);
    return out;
}

double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf) {
    if (x.empty()) return 0.0;
    std::sort(x.begin(), x.end());
    const double m = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / m - F, F - static_cast<double>(i) / m});
    }
    return d;
}

StudyResult run_calibration(const ScenarioSpec& spec, const StudyConfig& cfg) {
    spec.check();
    if (cfg.reps < 1) throw Error("need at least one replicate");
    const auto t0 = std::chrono::steady_clock::now();
    StudyResult res;
    res.p_values.assign(cfg.reps, 1.0);
    res.corrected.assign(cfg.reps, 1.0);
    res.b_n.assign(cfg.reps, 0);
    if (cfg.f_reference) res.reference_p.assign(cfg.reps, 1.0);

    parallel_for(cfg.reps, cfg.threads, [&](Index r) {
        const auto idx = static_cast<std::uint64_t>(r);
        Rng rng = replicate_rng(cfg.seed, 2 * idx);
        const Dataset ds = generate(spec, rng);
        TestConfig tc = cfg.test;
        tc.seed = mix_seed(cfg.seed, 2 * idx + 1);
        tc.threads = 1;
        if (cfg.supply_rho) tc.sigma = CovarianceModel::paired(half_split_pairs(ds.n()), *cfg.supply_rho);
        const PipelineResult pr = run_pipeline(ds, tc);
        res.p_values[r] = pr.report.raw_p;
        res.corrected[r] = pr.report.corrected_p;
        res.b_n[r] = pr.report.b_n;
        if (cfg.f_reference) res.reference_p[r] = f_test_pvalue(f_statistic(ds, *cfg.f_reference), ds.n());
    });

    const auto& used = cfg.use_corrected ? res.corrected : res.p_values;
    for (double a : cfg.alphas) res.rejection.emplace_back(a, rejection_rate(used, a));
    res.ecdf = ecdf_grid(used);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

std::vector<StudyResult> run_power(const std::vector<ScenarioSpec>& grid, const StudyConfig& cfg) {
    std::vector<StudyResult> out;
    out.reserve(grid.size());
    for (const auto& spec : grid) out.push_back(run_calibration(spec, cfg));
    return out;
}

}  // namespace ppt
