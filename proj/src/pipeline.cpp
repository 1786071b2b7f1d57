#include "ppt/pipeline.hpp"

#include <cmath>

#include "ppt/sim.hpp"

namespace ppt {

KernelSpec config_kernel(const TestConfig& cfg) {
    KernelSpec k;
    switch (cfg.family) {
        case KernelFamily::Linear: k = KernelSpec::linear(); break;
        case KernelFamily::Polynomial: k = KernelSpec::polynomial(cfg.degree); break;
        case KernelFamily::Gaussian: k = KernelSpec::gaussian(cfg.bandwidth.value_or(VectorXd::Ones(1))); break;
        case KernelFamily::RationalQuadratic:
            k = KernelSpec::rational_quadratic(1.0, cfg.eta);
            if (cfg.bandwidth) k.omega = *cfg.bandwidth;
            break;
        case KernelFamily::TruncatedBasis: k = KernelSpec::truncated(cfg.q, cfg.basis); break;
    }
    return k;
}

void validate_config(const TestConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
    if (cfg.B < 1) throw Error("B must be at least 1");
    if (!(cfg.truncate >= 0.0 && cfg.truncate < 0.5)) throw Error("truncation tail must lie in [0, 0.5)");
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw Error("gamma must lie in [0, 1)");
    if (cfg.jitter && !(*cfg.jitter >= 0.0)) throw Error("jitter must be nonnegative");
    if (cfg.b_n && *cfg.b_n < 0) throw Error("permutation size must be nonnegative");
    if (cfg.bandwidth) {
        if (cfg.family != KernelFamily::Gaussian && cfg.family != KernelFamily::RationalQuadratic)
            throw Error("a bandwidth only applies to gaussian and rq kernels");
        if (!(cfg.bandwidth->array() > 0.0).all()) throw Error("bandwidths must be positive");
    }
    const KernelSpec k = config_kernel(cfg);
    k.check();
    if (cfg.stat == StatKind::F && !feature_dimension(k, 1))
        throw Error("the F statistic needs a finite-dimensional kernel (linear, poly or basis)");
    if (cfg.stat == StatKind::Custom && !cfg.custom) throw Error("custom statistic requested without a callable");
    if (cfg.rho_auto && (!cfg.sigma || cfg.sigma->kind != CovarianceModel::Kind::Paired))
        throw Error("--rho auto needs a paired covariance structure");
}

namespace {

Dataset maybe_standardize(const Dataset& ds, bool on) { return on ? standardize(ds).first : ds; }

KernelSpec resolve_kernel(const TestConfig& cfg, const Dataset& work, double jitter, const MatrixXd* whitening,
                          std::optional<KernelFit>* fit_out) {
    KernelSpec k = config_kernel(cfg);
    if (k.stationary() && !cfg.bandwidth) {
        KernelFitOptions opt;
        opt.isotropic = cfg.isotropic;
        opt.eta = cfg.eta;
        opt.jitter = jitter;
        opt.safeguard = cfg.safeguard;
        opt.whitening = whitening;
        KernelFit fit = fit_kernel_params(work, cfg.family, cfg.gamma, opt);
        k.omega = fit.spec.omega;
        if (fit_out) *fit_out = std::move(fit);
    }
    k.jitter = 0.0;
    return k;
}

}  // namespace

PipelineResult run_pipeline(const Dataset& ds, const TestConfig& cfg) {
    validate_config(cfg);
    validate(ds);
    const Index n = ds.n();
    const bool do_std = cfg.standardize.value_or(config_kernel(cfg).stationary());
    const double s = cfg.jitter.value_or(default_gpr_jitter(cfg.family));
    const MatrixXd I = MatrixXd::Identity(n, n);

    PipelineResult res;
    res.alpha = cfg.alpha;
    res.sizing = cfg.sizing;
    res.b_n_auto = !cfg.b_n;
    res.standardized = do_std;
    std::vector<std::string> warnings;

    // whitening; a paired structure with unknown rho gets it from an
    // unwhitened preliminary H0 fit
    std::optional<Whitening> w;
    if (cfg.sigma) {
        CovarianceModel model = *cfg.sigma;
        if (cfg.rho_auto) {
            const Dataset pre = maybe_standardize(ds, do_std);
            const KernelSpec k0 = resolve_kernel(cfg, pre, s, nullptr, nullptr);
            const Nuisance nz0 = estimate_nuisance(pre.Y, build_kernel_matrix(k0, pre.X) + s * I, cfg.gamma);
            model.rho = estimate_structured_rho(pre, model.pairs, nz0.f_hat);
        }
        if (model.kind == CovarianceModel::Kind::Paired) res.rho = model.rho;
        Whitening ww = make_whitening(expand_covariance(model, n));
        if (!ww.identity) w = std::move(ww);
    }
    res.whitened = w.has_value();
    const MatrixXd* M = w ? &w->M : nullptr;

    Dataset work = ds;
    if (w) work.Y = w->apply(ds.Y);
    work = maybe_standardize(work, do_std);

    const KernelSpec kernel = resolve_kernel(cfg, work, s, M, &res.bandwidth_fit);
    MatrixXd Kn = build_kernel_matrix(kernel, work.X);
    if (w) Kn = w->conjugate(Kn);
    const EigenSystem es = eigendecompose_symmetric(Kn);
    const MatrixXd Kgpr = Kn + s * I;

    const Nuisance nz = estimate_nuisance(work.Y, Kgpr, cfg.gamma);
    if (nz.delta_zero) warnings.push_back("H0 fit put the function variance at 0; the gp-mode size may be anti-conservative");

    VectorXd y = work.Y;
    if (cfg.truncate > 0.0) {
        TruncationInfo ti;
        y = truncate_residuals(work.Y, nz.f_hat, cfg.truncate, &ti);
        res.truncation = ti;
    }

    SizingInputs in;
    in.es = &es;
    in.xi = nz.xi;
    in.f_std = nz.sigma0 > 0.0 ? VectorXd(nz.f_hat / nz.sigma0) : VectorXd::Zero(n);
    const double alpha0 = 1e-4 * cfg.alpha;
    Index b_n = 0;
    double v = 0.0;
    if (!cfg.b_n) {
        const SizingChoice ch = choose_b_n(cfg.sizing, in, cfg.alpha);
        b_n = ch.b_n;
        v = ch.v;
        warnings.insert(warnings.end(), ch.warnings.begin(), ch.warnings.end());
    } else {
        b_n = *cfg.b_n;
        if (b_n > n) throw Error("permutation size " + std::to_string(b_n) + " exceeds n = " + std::to_string(n));
        v = correction_at(cfg.sizing, in, b_n, alpha0);
    }

    Dataset stat_ds = work;
    stat_ds.Y = y;
    StatContext ctx;
    ctx.ds = &stat_ds;
    ctx.kernel = kernel;
    ctx.K = &Kgpr;
    ctx.whitening = M;
    ctx.gamma = cfg.gamma;
    ctx.custom = cfg.custom;

    PermutationPlan plan;
    plan.b_n = b_n;
    plan.mode = cfg.mode;
    plan.B = cfg.B;
    plan.seed = cfg.seed;
    plan.threads = cfg.threads;
    plan.allow_exhaustive = cfg.allow_exhaustive;

    TestReport rep = run_test(y, es, plan, statistic_adapter(cfg.stat, ctx));
    rep.kernel = kernel;
    rep.correction_applied = true;
    rep.correction = v;
    rep.alpha0 = alpha0;
    // with an automatic size the budget rule guarantees v + alpha0 <= 1e-3 alpha,
    // and the reported correction is that budget
    rep.corrected_p = res.b_n_auto ? rep.raw_p + 1e-3 * cfg.alpha : corrected_pvalue(rep.raw_p, v, alpha0);
    if (rep.corrected_p > 1.0) warnings.push_back("corrected p-value exceeds 1");
    rep.nuisance.available = true;
    rep.nuisance.delta2 = nz.delta2;
    rep.nuisance.sigma2 = nz.sigma2;
    rep.nuisance.xi = nz.xi;
    rep.nuisance.sigma0_2 = nz.sigma0 * nz.sigma0;
    rep.warnings.insert(rep.warnings.begin(), warnings.begin(), warnings.end());
    res.report = std::move(rep);
    return res;
}

}  // namespace ppt
