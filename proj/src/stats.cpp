#include "ppt/stats.hpp"

#include <cmath>
#include <memory>

#include "ppt/gpr.hpp"
#include "ppt/numerics.hpp"

namespace ppt {

namespace {

// Orthonormal basis of span(A) from a column-pivoted QR with a relative
// 1e-10 rank threshold.
MatrixXd range_basis(const MatrixXd& A, Index* rank) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    const Index r = qr.rank();
    *rank = r;
    MatrixXd Q = qr.householderQ() * MatrixXd::Identity(A.rows(), r);
    return Q;
}

}  // namespace

ProjectionPair::ProjectionPair(const MatrixXd& pooled_design, const MatrixXd& full_design) {
    if (pooled_design.rows() != full_design.rows()) throw Error("design row counts differ");
    Q0_ = range_basis(pooled_design, &p0_);
    Q1_ = range_basis(full_design, &p1_);
}

ProjectionPair feature_projections(const Dataset& ds, const KernelSpec& fm, const MatrixXd* whitening) {
    const MatrixXd phi = feature_matrix(fm, ds.X);
    const Index n = ds.n(), q = phi.cols();
    MatrixXd full = MatrixXd::Zero(n, q * ds.H);
    for (Index i = 0; i < n; ++i) full.block(i, q * (ds.Z(i) - 1), 1, q) = phi.row(i);
    if (whitening) return ProjectionPair((*whitening) * phi, (*whitening) * full);
    return ProjectionPair(phi, full);
}

FStat f_statistic(const ProjectionPair& pp, const VectorXd& y) {
    FStat out;
    out.p0 = pp.p0();
    out.p1 = pp.p1();
    const Index n = pp.n();
    if (out.p1 == out.p0) throw Error("null and full designs coincide");
    if (out.p1 >= n) throw Error("saturated full model");
    const double rss0 = pp.residual0(y).squaredNorm();
    const double rss1 = pp.residual1(y).squaredNorm();
    if (!(rss1 > 1e-28 * std::max(1.0, y.squaredNorm()))) throw Error("saturated full model");
    const double num = std::max(rss0 - rss1, 0.0) / static_cast<double>(out.p1 - out.p0);
    out.F = num / (rss1 / static_cast<double>(n - out.p1));
    return out;
}

FStat f_statistic(const Dataset& ds, const KernelSpec& fm) { return f_statistic(feature_projections(ds, fm), ds.Y); }

double f_test_pvalue(const FStat& f, Index n) {
    return 1.0 - f_cdf(static_cast<double>(f.p1 - f.p0), static_cast<double>(n - f.p1), f.F);
}

double mse_statistic(const Dataset& ds, const VectorXd& pooled_fit, const std::vector<VectorXd>& group_fits) {
    const GroupIndex gi = group_index(ds);
    if (static_cast<int>(group_fits.size()) != gi.H()) throw Error("mse_statistic: one fit per group required");
    const double n = static_cast<double>(ds.n());
    const double mse = (ds.Y - pooled_fit).squaredNorm() / n;
    if (!(mse > 0.0)) throw Error("mse_statistic: zero pooled MSE (perfect interpolation)");
    double t = n * std::log(mse);
    for (int h = 0; h < gi.H(); ++h) {
        const auto& rows = gi.rows[h];
        const double nh = static_cast<double>(rows.size());
        const double mh = (subset(ds.Y, rows) - group_fits[h]).squaredNorm() / nh;
        if (!(mh > 0.0)) throw Error("mse_statistic: zero MSE in group " + std::to_string(h + 1));
        t -= nh * std::log(mh);
    }
    return t;
}

StatKind parse_stat_kind(const std::string& s) {
    if (s == "f" || s == "f-stat") return StatKind::F;
    if (s == "mse") return StatKind::Mse;
    if (s == "lr-h1") return StatKind::LrH1;
    if (s == "lr-h1prime") return StatKind::LrH1Prime;
    if (s == "lr-pseudo") return StatKind::LrPseudo;
    if (s == "custom") return StatKind::Custom;
    throw Error("unknown statistic '" + s + "'");
}

std::string to_string(StatKind k) {
    switch (k) {
        case StatKind::F: return "f";
        case StatKind::Mse: return "mse";
        case StatKind::LrH1: return "lr-h1";
        case StatKind::LrH1Prime: return "lr-h1prime";
        case StatKind::LrPseudo: return "lr-pseudo";
        case StatKind::Custom: return "custom";
    }
    return "?";
}

namespace {

// Eigen forms of the pooled and per-group scaled kernel blocks, shared by
// the GPR-based statistics.
struct SpectralBlocks {
    EigenSystem pooled;
    std::vector<EigenSystem> groups;
    GroupIndex gi;
};

std::shared_ptr<const SpectralBlocks> spectral_blocks(const Dataset& ds, const MatrixXd& K, double gamma) {
    auto sb = std::make_shared<SpectralBlocks>();
    const double scale = std::pow(static_cast<double>(ds.n()), 1.0 - gamma);
    sb->pooled = eigendecompose_symmetric(K / scale);
    sb->gi = group_index(ds);
    for (const auto& rows : sb->gi.rows) sb->groups.push_back(eigendecompose_symmetric(subset_block(K, rows) / scale));
    return sb;
}

}  // namespace

Statistic statistic_adapter(StatKind kind, const StatContext& ctx) {
    if (!ctx.ds) throw Error("statistic_adapter: dataset missing");
    const Dataset& ds = *ctx.ds;
    switch (kind) {
        case StatKind::F: {
            auto pp = std::make_shared<const ProjectionPair>(feature_projections(ds, ctx.kernel, ctx.whitening));
            return [pp](const VectorXd& y) { return f_statistic(*pp, y).F; };
        }
        case StatKind::Custom: {
            if (!ctx.custom) throw Error("custom statistic requested without a callable");
            auto X = std::make_shared<const MatrixXd>(ds.X);
            auto Z = std::make_shared<const VectorXi>(ds.Z);
            auto fn = ctx.custom;
            return [X, Z, fn](const VectorXd& y) { return fn(*X, y, *Z); };
        }
        default: break;
    }

    if (!ctx.K) throw Error("statistic_adapter: kernel matrix missing");
    if (kind == StatKind::LrH1 || kind == StatKind::LrH1Prime) {
        const GprModel alt = kind == StatKind::LrH1 ? GprModel::H1 : GprModel::H1Prime;
        auto sb = spectral_blocks(ds, *ctx.K, ctx.gamma);
        auto comps = std::make_shared<const VcmSpec>(model_components(ds, *ctx.K, alt, ctx.gamma));
        return [sb, comps](const VectorXd& y) {
            const double l0 = fit_vcm1_profile(sb->pooled.c, sb->pooled.Gamma.transpose() * y).loglik;
            return fit_vcm2_newton(*comps, y).loglik - l0;
        };
    }

    auto sb = spectral_blocks(ds, *ctx.K, ctx.gamma);
    if (kind == StatKind::LrPseudo) {
        return [sb](const VectorXd& y) {
            const double l0 = fit_vcm1_profile(sb->pooled.c, sb->pooled.Gamma.transpose() * y).loglik;
            double l1 = 0.0;
            for (std::size_t h = 0; h < sb->groups.size(); ++h) {
                const auto& es = sb->groups[h];
                l1 += fit_vcm1_profile(es.c, es.Gamma.transpose() * subset(y, sb->gi.rows[h])).loglik;
            }
            return l1 - l0;
        };
    }

    // MSE statistic from posterior means of pooled and per-group fits.
    auto dsp = std::make_shared<const Dataset>(ds);
    return [sb, dsp](const VectorXd& y) {
        const VcmFit f0 = fit_vcm1_profile(sb->pooled.c, sb->pooled.Gamma.transpose() * y);
        const VectorXd pooled = vcm1_posterior_mean(sb->pooled.Gamma, sb->pooled.c, y, f0.tau2(0), f0.tau2(1));
        std::vector<VectorXd> groups;
        for (std::size_t h = 0; h < sb->groups.size(); ++h) {
            const auto& es = sb->groups[h];
            const VectorXd yh = subset(y, sb->gi.rows[h]);
            const VcmFit fh = fit_vcm1_profile(es.c, es.Gamma.transpose() * yh);
            groups.push_back(vcm1_posterior_mean(es.Gamma, es.c, yh, fh.tau2(0), fh.tau2(1)));
        }
        Dataset view = *dsp;
        view.Y = y;
        return mse_statistic(view, pooled, groups);
    };
}

}  // namespace ppt
