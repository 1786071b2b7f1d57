#include "ppt/sizing.hpp"

#include <cmath>

#include "ppt/gpr.hpp"

namespace ppt {

double losp_fixed(const EigenSystem& es, const VectorXd& f_vec, double sigma, Index b_n) {
    if (!(sigma > 0.0)) throw Error("losp_fixed: sigma must be positive");
    const Index n = es.size();
    if (b_n < 0 || b_n > n) throw Error("losp_fixed: permutation size out of range");
    if (b_n == 0) return 0.0;
    const VectorXd proj = es.Gamma.rightCols(b_n).transpose() * f_vec;
    return proj.squaredNorm() / (sigma * sigma);
}

double correction_v(Index b_n, double omega, double alpha0) {
    if (!(omega >= 0.0)) throw Error("correction_v: omega must be nonnegative");
    if (b_n == 0 || omega == 0.0) return 0.0;
    const double q = chi2_quantile(static_cast<double>(b_n), 1.0 - alpha0);
    return 0.5 * std::expm1(2.0 * std::sqrt(2.0 * omega) * std::sqrt(q + omega));
}

double losp_gp(double xi, const EigenSystem& es, Index b_n) {
    const Index n = es.size();
    if (b_n < 0 || b_n > n) throw Error("losp_gp: permutation size out of range");
    if (b_n == 0) return 0.0;
    return xi * es.c(n - b_n);
}

double correction_v_tilde(Index b_n, double omega_tilde, double alpha0) {
    if (!(omega_tilde >= 0.0)) throw Error("correction_v_tilde: omega must be nonnegative");
    if (b_n == 0 || omega_tilde == 0.0) return 0.0;
    const double q = chi2_quantile(static_cast<double>(b_n), 1.0 - alpha0);
    return 0.5 * std::expm1(0.5 * omega_tilde * q);
}

Nuisance estimate_nuisance(const VectorXd& Y, const MatrixXd& K, double gamma) {
    const Index n = Y.size();
    const double scale = std::pow(static_cast<double>(n), 1.0 - gamma);
    const EigenSystem es = eigendecompose_symmetric(0.5 * (K + K.transpose()) / scale);
    const VcmFit fit = fit_vcm1_profile(es.c, es.Gamma.transpose() * Y);

    Nuisance out;
    out.delta2 = fit.tau2(0);
    out.sigma2 = fit.tau2(1);
    if (out.delta2 <= 0.0 || !(out.sigma2 > 0.0)) {
        out.delta_zero = out.delta2 <= 0.0;
        out.xi = 0.0;
        out.f_hat = VectorXd::Zero(n);
        if (!out.delta_zero) out.f_hat = Y;  // noiseless interpolation limit
    } else {
        out.xi = (out.delta2 / scale) / out.sigma2;
        out.f_hat = vcm1_posterior_mean(es.Gamma, es.c, Y, out.delta2, out.sigma2);
    }
    out.sigma0 = std::sqrt((Y - out.f_hat).squaredNorm() / static_cast<double>(n));
    return out;
}

Nuisance estimate_nuisance(const Dataset& ds, const KernelSpec& kernel, double gamma) {
    return estimate_nuisance(ds.Y, build_kernel_matrix(kernel, ds.X), gamma);
}

std::string to_string(SizingMode m) { return m == SizingMode::Fixed ? "fixed" : "gp"; }

SizingMode parse_sizing_mode(const std::string& s) {
    if (s == "fixed") return SizingMode::Fixed;
    if (s == "gp") return SizingMode::Gp;
    throw Error("unknown permutation-size mode '" + s + "'");
}

namespace {

// Tail energies of the standardized function: tail[b] = sum over the last b
// projections.
VectorXd tail_energy(const SizingInputs& in) {
    const Index n = in.es->size();
    const VectorXd proj = in.es->Gamma.transpose() * in.f_std;
    VectorXd tail(n + 1);
    tail(0) = 0.0;
    for (Index b = 1; b <= n; ++b) tail(b) = tail(b - 1) + proj(n - b) * proj(n - b);
    return tail;
}

double correction_with(SizingMode mode, const SizingInputs& in, const VectorXd& tail, Index b, double alpha0) {
    if (mode == SizingMode::Gp) return correction_v_tilde(b, losp_gp(in.xi, *in.es, b), alpha0);
    return correction_v(b, tail(b), alpha0);
}

void check_inputs(SizingMode mode, const SizingInputs& in, double alpha) {
    if (!in.es) throw Error("choose_b_n: eigensystem missing");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
    if (mode == SizingMode::Fixed && in.f_std.size() != in.es->size())
        throw Error("choose_b_n: function estimate has the wrong length");
    if (mode == SizingMode::Gp && !(in.xi >= 0.0)) throw Error("choose_b_n: variance ratio must be nonnegative");
}

SizingChoice finish(SizingMode mode, const SizingInputs& in, const VectorXd& tail, Index b, double alpha0) {
    SizingChoice out;
    out.b_n = b;
    out.alpha0 = alpha0;
    out.v = correction_with(mode, in, tail, b, alpha0);
    if (b == 0) out.warnings.push_back("no positive permutation size meets the correction budget");
    return out;
}

}  // namespace

double correction_at(SizingMode mode, const SizingInputs& in, Index b, double alpha0) {
    const VectorXd tail = mode == SizingMode::Fixed ? tail_energy(in) : VectorXd();
    return correction_with(mode, in, tail, b, alpha0);
}

SizingChoice choose_b_n(SizingMode mode, const SizingInputs& in, double alpha) {
    check_inputs(mode, in, alpha);
    const Index n = in.es->size();
    const double alpha0 = 1e-4 * alpha;
    const double budget = 1e-3 * alpha;
    const VectorXd tail = mode == SizingMode::Fixed ? tail_energy(in) : VectorXd();
    auto ok = [&](Index b) { return correction_with(mode, in, tail, b, alpha0) + alpha0 <= budget; };

    if (ok(n)) return finish(mode, in, tail, n, alpha0);
    Index lo = 0, hi = n;  // ok(lo) holds, ok(hi) fails
    while (hi - lo > 1) {
        const Index mid = lo + (hi - lo) / 2;
        if (ok(mid))
            lo = mid;
        else
            hi = mid;
    }
    return finish(mode, in, tail, lo, alpha0);
}

SizingChoice choose_b_n_scan(SizingMode mode, const SizingInputs& in, double alpha) {
    check_inputs(mode, in, alpha);
    const Index n = in.es->size();
    const double alpha0 = 1e-4 * alpha;
    const double budget = 1e-3 * alpha;
    const VectorXd tail = mode == SizingMode::Fixed ? tail_energy(in) : VectorXd();
    Index best = 0;
    for (Index b = 0; b <= n; ++b)
        if (correction_with(mode, in, tail, b, alpha0) + alpha0 <= budget) best = b;
    return finish(mode, in, tail, best, alpha0);
}

double corrected_pvalue(double raw_p, double v, double alpha0) { return raw_p + v + alpha0; }

}  // namespace ppt
