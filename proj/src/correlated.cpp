#include "ppt/correlated.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ppt/numerics.hpp"

namespace ppt {

CovarianceModel CovarianceModel::dense(MatrixXd s) {
    CovarianceModel m;
    m.kind = Kind::Dense;
    m.sigma = std::move(s);
    return m;
}

CovarianceModel CovarianceModel::paired(std::vector<std::pair<Index, Index>> pairs, double rho) {
    CovarianceModel m;
    m.kind = Kind::Paired;
    m.pairs = std::move(pairs);
    m.rho = rho;
    return m;
}

namespace {

void check_spd(const MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0.0) || es.eigenvalues().minCoeff() <= 1e-12 * lmax) throw Error("covariance matrix is not SPD");
}

}  // namespace

MatrixXd expand_covariance(const CovarianceModel& model, Index n) {
    if (model.kind == CovarianceModel::Kind::Dense) {
        const MatrixXd& S = model.sigma;
        if (S.rows() != n || S.cols() != n)
            throw Error("covariance matrix must be " + std::to_string(n) + "x" + std::to_string(n));
        if (!S.allFinite()) throw Error("covariance matrix has non-finite entries");
        const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
        if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw Error("covariance matrix is not symmetric");
        const double mean_diag = S.diagonal().mean();
        if (!(mean_diag > 0.0)) throw Error("covariance matrix is not SPD");
        MatrixXd out = 0.5 * (S + S.transpose()) / mean_diag;
        check_spd(out);
        return out;
    }

    if (!(std::abs(model.rho) < 1.0)) throw Error("correlation must lie in (-1, 1)");
    std::vector<int> used(n, 0);
    MatrixXd out = MatrixXd::Identity(n, n);
    for (const auto& [i, j] : model.pairs) {
        if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw Error("invalid pair in covariance structure");
        if (used[i]++ || used[j]++) throw Error("pair map is not a perfect matching (row used twice)");
        out(i, j) = out(j, i) = model.rho;
    }
    for (Index i = 0; i < n; ++i)
        if (!used[i]) throw Error("pair map is not a perfect matching (row " + std::to_string(i + 1) + " unpaired)");
    return out;
}

MatrixXd Whitening::conjugate(const MatrixXd& K) const {
    if (identity) return K;
    const MatrixXd C = M * K * M;
    return 0.5 * (C + C.transpose());
}

Whitening make_whitening(const MatrixXd& sigma) {
    Whitening w;
    const Index n = sigma.rows();
    if (sigma.cols() != n) throw Error("covariance matrix is not square");
    if (sigma == MatrixXd::Identity(n, n)) {
        w.identity = true;
        w.M = w.M_inv = MatrixXd::Identity(n, n);
        return w;
    }
    w.M = inverse_sqrt_spd(sigma);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sigma + sigma.transpose()));
    const MatrixXd& V = es.eigenvectors();
    MatrixXd R = V * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * V.transpose();
    w.M_inv = 0.5 * (R + R.transpose());
    return w;
}

std::pair<VectorXd, Whitening> whiten(const Dataset& ds, const MatrixXd& sigma) {
    if (sigma.rows() != ds.n()) throw Error("covariance size does not match the data");
    Whitening w = make_whitening(sigma);
    VectorXd yc = w.apply(ds.Y);
    return {std::move(yc), std::move(w)};
}

double estimate_structured_rho(const Dataset& ds, const std::vector<std::pair<Index, Index>>& pairs,
                               const VectorXd& f_hat) {
    if (pairs.size() < 3) throw Error("need at least 3 pairs to estimate the correlation");
    if (f_hat.size() != ds.n()) throw Error("fitted values have the wrong length");
    const VectorXd r = ds.Y - f_hat;
    const Index m = static_cast<Index>(pairs.size());
    VectorXd a(m), b(m);
    for (Index k = 0; k < m; ++k) {
        a(k) = r(pairs[k].first);
        b(k) = r(pairs[k].second);
    }
    const VectorXd ac = a.array() - a.mean();
    const VectorXd bc = b.array() - b.mean();
    const double den = std::sqrt(ac.squaredNorm() * bc.squaredNorm());
    double rho = 0.0;
    if (den > 0.0) {
        rho = ac.dot(bc) / den;
    } else {
        // constant residuals on one side: fall back to the raw cross moment
        const double raw = std::sqrt(a.squaredNorm() * b.squaredNorm());
        if (!(raw > 0.0)) throw Error("paired residuals are all zero");
        rho = a.dot(b) / raw;
    }
    return std::clamp(rho, -0.99, 0.99);
}

std::vector<std::pair<Index, Index>> half_split_pairs(Index n) {
    if (n % 2 != 0) throw Error("paired layout needs an even number of rows");
    std::vector<std::pair<Index, Index>> out;
    for (Index i = 0; i < n / 2; ++i) out.emplace_back(i, n / 2 + i);
    return out;
}

TestReport run_test_correlated(const Dataset& ds, const KernelSpec& kernel, const CovarianceModel& model,
                               const PermutationPlan& plan, StatKind stat, double gamma) {
    const MatrixXd sigma = expand_covariance(model, ds.n());
    auto [yc, w] = whiten(ds, sigma);
    Dataset wds = ds;
    wds.Y = yc;

    KernelSpec perm_kernel = kernel;
    perm_kernel.jitter = 0.0;
    const MatrixXd Kc = w.conjugate(build_kernel_matrix(perm_kernel, ds.X));
    const EigenSystem es = eigendecompose_symmetric(Kc);

    const double s = kernel.jitter > 0.0 ? kernel.jitter : default_gpr_jitter(kernel.family);
    const MatrixXd Kgpr = Kc + s * MatrixXd::Identity(ds.n(), ds.n());

    StatContext ctx;
    ctx.ds = &wds;
    ctx.kernel = kernel;
    ctx.K = &Kgpr;
    ctx.whitening = w.identity ? nullptr : &w.M;
    ctx.gamma = gamma;
    TestReport rep = run_test(yc, es, plan, statistic_adapter(stat, ctx));
    rep.kernel = kernel;
    return rep;
}

namespace {

std::vector<double> parse_row(const std::string& line, long row) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(field, &used);
        } catch (const std::exception&) {
            throw Error("row " + std::to_string(row) + ": non-numeric value '" + field + "'");
        }
        const auto rest = field.find_first_not_of(" \t\r", used);
        if (rest != std::string::npos)
            throw Error("row " + std::to_string(row) + ": non-numeric value '" + field + "'");
        out.push_back(v);
    }
    return out;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

MatrixXd load_sigma_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open covariance file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    long row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (blank(line)) continue;
        rows.push_back(parse_row(line, row));
    }
    if (rows.empty()) throw Error("covariance file '" + path + "' is empty");
    const Index n = static_cast<Index>(rows.size());
    MatrixXd S(n, n);
    for (Index i = 0; i < n; ++i) {
        if (static_cast<Index>(rows[i].size()) != n)
            throw Error("covariance row " + std::to_string(i + 1) + ": expected " + std::to_string(n) + " fields");
        for (Index j = 0; j < n; ++j) S(i, j) = rows[i][j];
    }
    return S;
}

std::vector<std::pair<Index, Index>> load_pairs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open pair file '" + path + "'");
    std::vector<std::pair<Index, Index>> out;
    std::string line;
    long row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (blank(line)) continue;
        if (row == 1 && line.find_first_of("ij") != std::string::npos) continue;
        const auto v = parse_row(line, row);
        if (v.size() != 2) throw Error("row " + std::to_string(row) + ": expected 2 fields");
        if (v[0] < 1 || v[1] < 1 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
            throw Error("row " + std::to_string(row) + ": pair indices must be positive integers");
        out.emplace_back(static_cast<Index>(v[0]) - 1, static_cast<Index>(v[1]) - 1);
    }
    return out;
}

}  // namespace ppt
