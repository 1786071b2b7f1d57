#include "ppt/permute.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace ppt {

std::string to_string(PermMode m) { return m == PermMode::Discrete ? "discrete" : "continuous"; }

PermMode parse_perm_mode(const std::string& s) {
    if (s == "discrete") return PermMode::Discrete;
    if (s == "continuous") return PermMode::Continuous;
    throw Error("unknown permutation mode '" + s + "'");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer over a counter offset
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Rng replicate_rng(std::uint64_t seed, std::uint64_t index) { return Rng(mix_seed(seed, index)); }

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(Index count, int threads, const std::function<void(Index)>& fn) {
    const int T = std::min<Index>(resolve_threads(threads), std::max<Index>(count, 1));
    if (T <= 1) {
        for (Index i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<Index> next{0};
    std::mutex err_mu;
    Index err_index = count;
    std::exception_ptr err;
    auto worker = [&] {
        for (;;) {
            const Index i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                // keep the lowest failing index so errors are reproducible
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

VectorXd project_responses(const EigenSystem& es, const VectorXd& Y) {
    if (es.Gamma.rows() != Y.size()) throw Error("project_responses: dimension mismatch");
    return es.Gamma.transpose() * Y;
}

VectorXd sample_discrete(const VectorXd& W, Index b_n, Rng& rng) {
    const Index n = W.size();
    if (b_n < 0 || b_n > n) throw Error("permutation size out of range");
    VectorXd out = W;
    const Index start = n - b_n;
    for (Index k = b_n - 1; k > 0; --k) {
        std::uniform_int_distribution<Index> pick(0, k);
        const Index j = pick(rng);
        std::swap(out(start + k), out(start + j));
    }
    return out;
}

VectorXd sample_continuous(const VectorXd& W, Index b_n, Rng& rng) {
    const Index n = W.size();
    if (b_n < 0 || b_n > n) throw Error("permutation size out of range");
    VectorXd out = W;
    if (b_n == 0) return out;
    const Index start = n - b_n;
    const double r = W.tail(b_n).norm();
    if (r == 0.0) return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd z(b_n);
    double zn = 0.0;
    do {
        for (Index k = 0; k < b_n; ++k) z(k) = normal(rng);
        zn = z.norm();
    } while (zn == 0.0);
    out.segment(start, b_n) = z * (r / zn);
    return out;
}

namespace {

double checked(double t, const std::string& what) {
    if (!std::isfinite(t)) throw Error("statistic returned a non-finite value at " + what);
    return t;
}

long factorial_small(Index b) {
    long f = 1;
    for (Index k = 2; k <= b; ++k) f *= static_cast<long>(k);
    return f;
}

}  // namespace

TestReport run_test(const VectorXd& Y, const EigenSystem& es, const PermutationPlan& plan, const Statistic& stat) {
    const Index n = Y.size();
    if (es.Gamma.rows() != n) throw Error("run_test: eigensystem does not match the response length");
    if (plan.b_n < 0 || plan.b_n > n) throw Error("run_test: permutation size out of range");
    if (plan.B < 1) throw Error("run_test: need at least one permutation draw");

    TestReport rep;
    rep.b_n = plan.b_n;
    rep.mode = plan.mode;
    rep.seed = plan.seed;
    rep.T_obs = checked(stat(Y), "the observed data");

    if (plan.b_n == 0) {
        rep.raw_p = 1.0;
        rep.corrected_p = 1.0;
        rep.B = 0;
        rep.warnings.push_back("permutation size is 0; p-value set to 1");
        return rep;
    }

    const VectorXd W = project_responses(es, Y);
    const Index start = n - plan.b_n;
    const MatrixXd tailGamma = es.Gamma.rightCols(plan.b_n);
    const VectorXd Wtail = W.tail(plan.b_n);
    auto response = [&](const VectorXd& Wp) -> VectorXd {
        return Y + tailGamma * (Wp.tail(plan.b_n) - Wtail);
    };
    const double tie_tol = 1e-10 * std::max(1.0, std::abs(rep.T_obs));

    const bool exhaustive = plan.allow_exhaustive && plan.mode == PermMode::Discrete && plan.b_n <= 5;
    if (exhaustive) {
        rep.exhaustive = true;
        std::vector<Index> perm(plan.b_n);
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<std::vector<Index>> all;
        do {
            all.push_back(perm);
        } while (std::next_permutation(perm.begin(), perm.end()));
        rep.T_perm.assign(all.size(), 0.0);
        parallel_for(static_cast<Index>(all.size()), plan.threads, [&](Index k) {
            VectorXd Wp = W;
            for (Index j = 0; j < plan.b_n; ++j) Wp(start + j) = W(start + all[k][j]);
            rep.T_perm[k] = checked(stat(response(Wp)), "permutation " + std::to_string(k + 1));
        });
        long count = 0;
        for (double t : rep.T_perm)
            if (t >= rep.T_obs - tie_tol) ++count;
        rep.B = static_cast<int>(factorial_small(plan.b_n));
        rep.raw_p = static_cast<double>(count) / static_cast<double>(rep.B);
        rep.corrected_p = rep.raw_p;
        return rep;
    }

    rep.B = plan.B;
    rep.T_perm.assign(plan.B, 0.0);
    parallel_for(plan.B, plan.threads, [&](Index b) {
        Rng rng = replicate_rng(plan.seed, static_cast<std::uint64_t>(b));
        const VectorXd Wp = plan.mode == PermMode::Discrete ? sample_discrete(W, plan.b_n, rng)
                                                            : sample_continuous(W, plan.b_n, rng);
        rep.T_perm[b] = checked(stat(response(Wp)), "replicate " + std::to_string(b + 1));
    });
    long count = 0;
    for (double t : rep.T_perm)
        if (t >= rep.T_obs - tie_tol) ++count;
    rep.raw_p = static_cast<double>(1 + count) / static_cast<double>(plan.B + 1);
    rep.corrected_p = rep.raw_p;
    return rep;
}

TestReport run_test(const Dataset& ds, const EigenSystem& es, const PermutationPlan& plan, const Statistic& stat) {
    return run_test(ds.Y, es, plan, stat);
}

}  // namespace ppt
