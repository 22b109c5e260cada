#pragma once

// Online portfolio selection driven by a projected consensus ensemble.
//
// Timing: step n sees window n (return rows n .. n+W-1), evaluates the
// negative Sharpe ratio L_n on the current particles, holds the best one
// and is paid the relatives of row n+W. The ensemble then moves one
// projected step under L_n. The last window has no realisation, so a run
// over K windows records K decisions and K-1 wealth updates.
//
// L_n is the negative Sharpe ratio of net returns: the window mean of the
// price relatives minus one over the window covariance (the shift leaves
// the covariance unchanged).

#include "adcbo/adam_cbo.hpp"
#include "adcbo/ensemble.hpp"
#include "adcbo/errors.hpp"
#include "adcbo/market_data.hpp"
#include "adcbo/objectives.hpp"
#include "adcbo/parallel.hpp"
#include "adcbo/rng.hpp"
#include "adcbo/simplex.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace adcbo {

enum class OpsAlgorithm { cbo, ad_cbo, adam_cbo };

[[nodiscard]] inline std::string to_string(OpsAlgorithm a) {
    switch (a) {
        case OpsAlgorithm::cbo: return "cbo";
        case OpsAlgorithm::ad_cbo: return "ad-cbo";
        case OpsAlgorithm::adam_cbo: return "adam-cbo";
    }
    return "unknown";
}

[[nodiscard]] inline OpsAlgorithm parse_algorithm(const std::string& s) {
    if (s == "cbo") return OpsAlgorithm::cbo;
    if (s == "ad-cbo" || s == "ad_cbo") return OpsAlgorithm::ad_cbo;
    if (s == "adam-cbo" || s == "adam_cbo") return OpsAlgorithm::adam_cbo;
    throw InputError("unknown algorithm '" + s + "'");
}

/// Default inverse temperature for the portfolio runs.
inline constexpr double kOpsDefaultBeta = 10.0;

struct OpsRun {
    OpsAlgorithm algorithm = OpsAlgorithm::ad_cbo;
    CboParams params;
    std::size_t window_len = 0;
    std::size_t first_return_row = 0;  // realised row of step 0

    std::vector<Matrix> weights;               // per step, N x d, every row in S
    std::vector<std::size_t> best_index;       // per step
    std::vector<double> best_objective;        // per step, NaN when degenerate
    std::vector<double> mean_objective;        // per step, NaN when degenerate
    std::vector<bool> degenerate;              // per step

    std::vector<double> best_return;  // r . x_best, per realised step
    std::vector<double> mean_return;  // r . xbar, per realised step
    std::vector<double> wealth;       // S_0 = 1, then one entry per realised step
    std::vector<double> wealth_mean;  // same for the ensemble-mean portfolio

    [[nodiscard]] std::size_t steps() const { return weights.size(); }
    [[nodiscard]] std::size_t realized_steps() const { return best_return.size(); }

    [[nodiscard]] Vector mean_weights(std::size_t n) const {
        return Ensemble{weights.at(n), n}.mean();
    }
    [[nodiscard]] Vector best_weights(std::size_t n) const {
        return weights.at(n).row(static_cast<Eigen::Index>(best_index.at(n))).transpose();
    }
};

/// Runs one OPS replication over every window of `stats`. `cbo` forces
/// lambda1 = 0; `adam_cbo` takes lambda0, h and beta from `params` and the
/// decay rates from `adam`. A window whose Sharpe ratio is undefined for
/// some particle is flagged and the ensemble is carried forward unchanged.
[[nodiscard]] inline OpsRun run_ops(const ReturnSeries& r, const RollingStats& stats, CboParams params,
                                    OpsAlgorithm algorithm, RngHandle& rng, AdamConfig adam = {}) {
    const std::size_t d = r.assets();
    if (params.dim != d) throw InputError("run_ops: params.dim must equal the number of assets");
    if (stats.n_windows < 1) throw InputError("run_ops: no windows");
    if (stats.window_len + stats.n_windows - 1 != r.length())
        throw InputError("run_ops: rolling statistics do not match the return series");
    if (algorithm == OpsAlgorithm::cbo) params.lambda1 = 0.0;
    params.validate();
    adam.lambda0 = params.lambda0;
    adam.h = params.h;
    adam.beta = params.beta;
    if (algorithm == OpsAlgorithm::adam_cbo) adam.validate();

    OpsRun run;
    run.algorithm = algorithm;
    run.params = params;
    run.window_len = stats.window_len;
    run.first_return_row = stats.window_len;

    const auto n_part = static_cast<Eigen::Index>(params.n_particles);
    Matrix x(n_part, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < n_part; ++i)
        x.row(i) = uniform_simplex_point(d, rng).transpose();
    AdamState adam_state = AdamState::zeros(params.n_particles, d);
    const Projection projection = [](std::span<double> p) { project_simplex_inplace(p); };

    run.wealth.push_back(1.0);
    run.wealth_mean.push_back(1.0);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::size_t last_best = 0;

    for (std::size_t n = 0; n < stats.n_windows; ++n) {
        const RollingSharpeObjective objective{(stats.mu[n].array() - 1.0).matrix(), stats.cov[n]};
        std::optional<Vector> values;
        try {
            values = evaluate(x, objective);
        } catch (const StepError&) {
            values.reset();
        }

        std::size_t best = last_best;
        if (values) {
            best = 0;
            for (Eigen::Index i = 1; i < values->size(); ++i)
                if ((*values)[i] < (*values)[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
            run.best_objective.push_back((*values)[static_cast<Eigen::Index>(best)]);
            run.mean_objective.push_back(values->mean());
        } else {
            run.best_objective.push_back(nan);
            run.mean_objective.push_back(nan);
        }
        last_best = best;
        run.weights.push_back(x);
        run.best_index.push_back(best);
        run.degenerate.push_back(!values.has_value());

        const std::size_t row = n + stats.window_len;
        if (row < r.length()) {
            const Vector rel = r.relatives.row(static_cast<Eigen::Index>(row)).transpose();
            const double rb = rel.dot(run.best_weights(n));
            const double rm = rel.dot(run.mean_weights(n));
            run.best_return.push_back(rb);
            run.mean_return.push_back(rm);
            run.wealth.push_back(run.wealth.back() * rb);
            run.wealth_mean.push_back(run.wealth_mean.back() * rm);
        }

        if (n + 1 == stats.n_windows || !values) continue;
        const Vector consensus = weighted_consensus_point(
            x, std::span<const double>(values->data(), static_cast<std::size_t>(values->size())), params.beta);
        if (algorithm == OpsAlgorithm::adam_cbo) {
            x = adam_update(x, consensus, adam_state, adam);
        } else {
            const Matrix noise = draw_noise(params, params.n_particles, d, rng);
            x = apply_update(x, consensus, params, noise);
        }
        if (!x.allFinite()) throw StepError(0, "run_ops: non-finite weights after update");
        project_rows(x, projection);
    }
    return run;
}

/// Full-precision per-step dump: step, degenerate flag, best index, best and
/// mean objective, realised best and mean return, wealth, then the best and
/// mean weight vectors.
inline void write_ops_csv(std::ostream& os, const OpsRun& run, std::optional<std::size_t> run_id = {}) {
    const std::size_t d = run.params.dim;
    if (!run_id) {
        os << "step,degenerate,best_index,best_objective,mean_objective,best_return,mean_return,wealth,wealth_mean";
        for (std::size_t l = 0; l < d; ++l) os << ",w_best_" << l;
        for (std::size_t l = 0; l < d; ++l) os << ",w_mean_" << l;
        os << '\n';
    }
    const auto old = os.precision(17);
    for (std::size_t n = 0; n < run.steps(); ++n) {
        if (run_id) os << *run_id << ',';
        os << n << ',' << (run.degenerate[n] ? 1 : 0) << ',' << run.best_index[n] << ','
           << run.best_objective[n] << ',' << run.mean_objective[n] << ',';
        if (n < run.realized_steps())
            os << run.best_return[n] << ',' << run.mean_return[n] << ',' << run.wealth[n + 1] << ','
               << run.wealth_mean[n + 1];
        else
            os << ",,,";
        const Vector wb = run.best_weights(n);
        const Vector wm = run.mean_weights(n);
        for (Eigen::Index l = 0; l < wb.size(); ++l) os << ',' << wb[l];
        for (Eigen::Index l = 0; l < wm.size(); ++l) os << ',' << wm[l];
        os << '\n';
    }
    os.precision(old);
}

/// Header for a multi-run CSV written with write_ops_csv(os, run, id).
inline void write_ops_csv_header(std::ostream& os, std::size_t d) {
    os << "run,step,degenerate,best_index,best_objective,mean_objective,best_return,mean_return,wealth,wealth_mean";
    for (std::size_t l = 0; l < d; ++l) os << ",w_best_" << l;
    for (std::size_t l = 0; l < d; ++l) os << ",w_mean_" << l;
    os << '\n';
}

// ---------------------------------------------------------------------------
// Batches and statistics

struct OpsReplication {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::optional<OpsRun> run;
    std::string error;  // empty on success
};

/// `runs` replications with seeds derive_seed(master_seed, i). Failures are
/// captured per replication.
[[nodiscard]] inline std::vector<OpsReplication> run_ops_batch(const ReturnSeries& r, const RollingStats& stats,
                                                               const CboParams& params, OpsAlgorithm algorithm,
                                                               std::size_t runs, std::uint64_t master_seed,
                                                               std::size_t threads = 0, AdamConfig adam = {}) {
    std::vector<OpsReplication> out(runs);
    parallel_for(runs, threads, [&](std::size_t i) {
        auto& rep = out[i];
        rep.index = i;
        rep.seed = derive_seed(master_seed, i);
        try {
            RngHandle rng(rep.seed);
            rep.run = run_ops(r, stats, params, algorithm, rng, adam);
        } catch (const std::exception& ex) {
            rep.error = ex.what();
        }
    });
    return out;
}

struct SampleStats {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // denominator count - 1; 0 when count < 2
};

[[nodiscard]] inline SampleStats sample_stats(std::span<const double> v) {
    SampleStats s;
    s.count = v.size();
    if (v.empty()) return s;
    // shifted by v[0] so identical samples give exactly zero spread
    const double k = v[0];
    double sum = 0.0;
    for (double x : v) sum += x - k;
    const double shift = sum / static_cast<double>(v.size());
    s.mean = k + shift;
    if (v.size() < 2) return s;
    double ss = 0.0;
    for (double x : v) ss += (x - k - shift) * (x - k - shift);
    s.variance = ss / static_cast<double>(v.size() - 1);
    return s;
}

struct OpsSummary {
    std::size_t runs = 0;
    bool single_run = false;       // variances are reported as 0
    SampleStats best_objective;    // over runs of the time-averaged L(x_best)
    SampleStats mean_objective;    // over runs of the time-averaged mean_i L(x^i)
    SampleStats realized_return;   // over runs of the time-averaged r . xbar
    double volatility = 0.0;       // sqrt(realized_return.variance)
    SampleStats terminal_wealth;   // best-particle wealth S_M
    std::size_t degenerate_steps = 0;
};

[[nodiscard]] inline double nan_mean(const std::vector<double>& v) {
    double sum = 0.0;
    std::size_t k = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            sum += x;
            ++k;
        }
    return k ? sum / static_cast<double>(k) : std::numeric_limits<double>::quiet_NaN();
}

/// Time averages per run (degenerate steps skipped), then mean and variance
/// across runs.
[[nodiscard]] inline OpsSummary run_statistics(const std::vector<OpsRun>& runs) {
    if (runs.empty()) throw InputError("run_statistics: no runs");
    std::vector<double> lb, lm, rx, w;
    OpsSummary s;
    for (const auto& run : runs) {
        lb.push_back(nan_mean(run.best_objective));
        lm.push_back(nan_mean(run.mean_objective));
        rx.push_back(nan_mean(run.mean_return));
        w.push_back(run.wealth.back());
        for (bool g : run.degenerate) s.degenerate_steps += g ? 1 : 0;
    }
    s.runs = runs.size();
    s.single_run = runs.size() == 1;
    s.best_objective = sample_stats(lb);
    s.mean_objective = sample_stats(lm);
    s.realized_return = sample_stats(rx);
    s.volatility = std::sqrt(s.realized_return.variance);
    s.terminal_wealth = sample_stats(w);
    return s;
}

// ---------------------------------------------------------------------------
// Wealth curves

/// Pearson correlation; empty when either series has zero variance.
[[nodiscard]] inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("pearson: length mismatch");
    if (a.size() < 2) return std::nullopt;
    const auto ma = as_vector(a).mean();
    const auto mb = as_vector(b).mean();
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Per realised step, the mean over runs of r_n . x_n^best.
[[nodiscard]] inline std::vector<double> average_return_curve(const std::vector<OpsRun>& runs) {
    if (runs.empty()) throw InputError("average_return_curve: no runs");
    const std::size_t m = runs.front().realized_steps();
    std::vector<double> curve(m, 0.0);
    for (const auto& run : runs) {
        if (run.realized_steps() != m) throw InputError("average_return_curve: runs differ in length");
        for (std::size_t n = 0; n < m; ++n) curve[n] += run.best_return[n];
    }
    for (double& c : curve) c /= static_cast<double>(runs.size());
    return curve;
}

/// r_n . x for the realised rows of a run starting at `first_row`.
[[nodiscard]] inline std::vector<double> constant_portfolio_curve(const ReturnSeries& r, const Vector& x,
                                                                  std::size_t first_row, std::size_t count) {
    if (first_row + count > r.length()) throw InputError("constant_portfolio_curve: rows out of range");
    std::vector<double> out(count);
    for (std::size_t n = 0; n < count; ++n)
        out[n] = r.relatives.row(static_cast<Eigen::Index>(first_row + n)).dot(x.transpose());
    return out;
}

struct WealthCorrelation {
    std::vector<double> algorithm_curve;
    std::optional<double> correlation;  // empty: undefined (constant curve)
};

[[nodiscard]] inline WealthCorrelation wealth_curves_and_correlation(const std::vector<OpsRun>& runs,
                                                                     std::span<const double> benchmark) {
    WealthCorrelation out;
    out.algorithm_curve = average_return_curve(runs);
    if (out.algorithm_curve.size() != benchmark.size())
        throw InputError("wealth_curves_and_correlation: benchmark length mismatch");
    out.correlation = pearson(out.algorithm_curve, benchmark);
    return out;
}

}  // namespace adcbo
