#pragma once

// Seeded batch execution over parameter grids, aggregation and plot-data
// emission.

#include "adcbo/adam_cbo.hpp"
#include "adcbo/ensemble.hpp"
#include "adcbo/errors.hpp"
#include "adcbo/objectives.hpp"
#include "adcbo/ops.hpp"
#include "adcbo/parallel.hpp"
#include "adcbo/regret.hpp"
#include "adcbo/rng.hpp"
#include "adcbo/theory.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace adcbo {

enum class ExperimentKind { static_bench, portfolio, theory };

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::static_bench;
    std::vector<double> sigma_grid{0, 1, 2, 3, 4, 5};
    std::vector<double> lambda1_grid{1, 2, 3, 4, 5};
    bool adam = true;
    CboParams base;  // d = 15, N = 50, beta = 100, h = 0.1, lambda0 = 1
    double init_lo = 2.0;
    double init_hi = 4.0;
    double beta1 = 0.9;
    double beta2 = 0.99;
    std::size_t runs = 50;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::size_t threads = 0;  // 0: hardware concurrency

    static ExperimentConfig portfolio_defaults() {
        ExperimentConfig c;
        c.experiment = ExperimentKind::portfolio;
        c.sigma_grid = {0, 1, 2, 3};
        c.lambda1_grid = {1, 2, 3};
        c.base.n_particles = 20;
        c.base.beta = kOpsDefaultBeta;
        return c;
    }

    void validate() const {
        base.validate();
        if (runs < 1) throw InputError("runs must be >= 1");
        if (!(init_lo < init_hi)) throw InputError("init_lo must be < init_hi");
        for (double s : sigma_grid)
            if (!(s >= 0.0)) throw InputError("sigma grid entries must be >= 0");
        for (double l : lambda1_grid)
            if (!(l >= 0.0)) throw InputError("lambda1 grid entries must be >= 0");
    }
};

struct GridCell {
    OpsAlgorithm algorithm = OpsAlgorithm::cbo;
    double sigma = 0.0;
    double lambda1 = 0.0;

    [[nodiscard]] std::string label() const {
        std::ostringstream os;
        os << to_string(algorithm);
        if (algorithm == OpsAlgorithm::cbo) os << " sigma=" << sigma;
        if (algorithm == OpsAlgorithm::ad_cbo) os << " lambda1=" << lambda1;
        return os.str();
    }
};

/// CBO over the sigma grid (lambda1 = 0), then the average-drift variant
/// over the lambda1 grid (sigma = 0), then Adam if requested.
[[nodiscard]] inline std::vector<GridCell> make_grid(const ExperimentConfig& c) {
    std::vector<GridCell> cells;
    for (double s : c.sigma_grid) cells.push_back({OpsAlgorithm::cbo, s, 0.0});
    for (double l : c.lambda1_grid) cells.push_back({OpsAlgorithm::ad_cbo, 0.0, l});
    if (c.adam) cells.push_back({OpsAlgorithm::adam_cbo, 0.0, 0.0});
    return cells;
}

struct RunRecord {
    std::size_t cell = 0;
    std::size_t replication = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double final_objective = 0.0;
    double iterations = 0.0;
    bool converged = false;
};

struct Stats {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // denominator count - 1
};

struct CellSummary {
    GridCell cell;
    std::size_t runs = 0;
    std::size_t failures = 0;
    std::size_t unconverged = 0;
    Stats objective;
    Stats iterations;
    std::vector<std::string> errors;
};

struct BatchSummary {
    std::vector<CellSummary> cells;
    std::vector<RunRecord> records;  // sorted by (cell, replication)

    [[nodiscard]] bool all_ok() const {
        return std::all_of(records.begin(), records.end(), [](const RunRecord& r) { return r.ok; });
    }
};

namespace detail {

inline Stats stats_of(const std::vector<double>& v) {
    const auto s = sample_stats(v);
    return {s.count, s.mean, s.variance};
}

}  // namespace detail

/// Groups records by cell after sorting on (cell, replication), so any
/// permutation of the input gives the same summary. Failed runs are counted
/// but excluded from the statistics.
[[nodiscard]] inline BatchSummary aggregate(std::vector<RunRecord> records, const std::vector<GridCell>& cells) {
    if (records.empty()) throw InputError("aggregate: no records");
    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        return a.cell != b.cell ? a.cell < b.cell : a.replication < b.replication;
    });
    BatchSummary out;
    std::size_t n_cells = cells.size();
    for (const auto& r : records) n_cells = std::max(n_cells, r.cell + 1);
    for (std::size_t c = 0; c < n_cells; ++c) {
        CellSummary cs;
        if (c < cells.size()) cs.cell = cells[c];
        std::vector<double> obj, it;
        for (const auto& r : records) {
            if (r.cell != c) continue;
            ++cs.runs;
            if (!r.ok) {
                ++cs.failures;
                cs.errors.push_back(r.error);
                continue;
            }
            if (!r.converged) ++cs.unconverged;
            obj.push_back(r.final_objective);
            it.push_back(r.iterations);
        }
        if (cs.runs == 0) continue;
        cs.objective = detail::stats_of(obj);
        cs.iterations = detail::stats_of(it);
        out.cells.push_back(std::move(cs));
    }
    out.records = std::move(records);
    return out;
}

/// Convenience overload for plain samples (single cell).
[[nodiscard]] inline Stats aggregate_values(const std::vector<double>& values) {
    if (values.empty()) throw InputError("aggregate: no records");
    return detail::stats_of(values);
}

/// Rastrigin study. Replication i of every cell starts from the same
/// U[init_lo, init_hi]^d ensemble (seed derive_seed(seed, i)); noisy cells
/// continue drawing from that stream.
[[nodiscard]] inline BatchSummary run_static_bench(const ExperimentConfig& c) {
    c.validate();
    const auto cells = make_grid(c);
    const std::size_t total = cells.size() * c.runs;
    std::vector<RunRecord> records(total);
    const Rastrigin objective{c.base.dim};
    parallel_for(total, c.threads, [&](std::size_t task) {
        RunRecord& rec = records[task];
        rec.cell = task / c.runs;
        rec.replication = task % c.runs;
        rec.seed = derive_seed(c.seed, rec.replication);
        try {
            RngHandle rng(rec.seed);
            const Ensemble init = uniform_box_ensemble(c.base.n_particles, c.base.dim, c.init_lo, c.init_hi, rng);
            const GridCell& cell = cells[rec.cell];
            ConsensusResult res;
            if (cell.algorithm == OpsAlgorithm::adam_cbo) {
                AdamConfig cfg;
                cfg.lambda0 = c.base.lambda0;
                cfg.h = c.base.h;
                cfg.beta = c.base.beta;
                cfg.beta1 = c.beta1;
                cfg.beta2 = c.beta2;
                res = run_adam_static(init, cfg, c.base.eps_tol, c.base.max_iters, objective);
            } else {
                CboParams p = c.base;
                p.sigma = cell.sigma;
                p.lambda1 = cell.lambda1;
                res = run_until_consensus(init, p, objective, rng);
            }
            rec.final_objective = res.objective_at_consensus;
            rec.iterations = static_cast<double>(res.iterations);
            rec.converged = res.converged;
            rec.ok = std::isfinite(rec.final_objective);
            if (!rec.ok) rec.error = "non-finite final objective";
        } catch (const std::exception& ex) {
            rec.ok = false;
            rec.error = ex.what();
        }
    });
    return aggregate(std::move(records), cells);
}

// ---------------------------------------------------------------------------
// Serialisation

/// Rounds to 6 significant digits for the JSON summaries.
[[nodiscard]] inline double round6(double v) {
    if (!std::isfinite(v) || v == 0.0) return v;
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return std::stod(os.str());
}

namespace detail {

inline nlohmann::json stats_json(const Stats& s) {
    return {{"count", s.count}, {"mean", round6(s.mean)}, {"variance", round6(s.variance)}};
}

inline nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(round6(v)) : nlohmann::json(nullptr);
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const BatchSummary& s) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : s.cells) {
        cells.push_back({{"label", c.cell.label()},
                         {"algorithm", to_string(c.cell.algorithm)},
                         {"sigma", round6(c.cell.sigma)},
                         {"lambda1", round6(c.cell.lambda1)},
                         {"runs", c.runs},
                         {"failures", c.failures},
                         {"unconverged", c.unconverged},
                         {"final_objective", detail::stats_json(c.objective)},
                         {"iterations", detail::stats_json(c.iterations)},
                         {"errors", c.errors}});
    }
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : s.records) {
        records.push_back({{"cell", r.cell},
                           {"replication", r.replication},
                           {"seed", r.seed},
                           {"ok", r.ok},
                           {"error", r.error},
                           {"final_objective", detail::number_or_null(r.final_objective)},
                           {"iterations", r.iterations},
                           {"converged", r.converged}});
    }
    return {{"cells", cells}, {"records", records}, {"all_ok", s.all_ok()}};
}

[[nodiscard]] inline nlohmann::json to_json(const SampleStats& s) {
    return {{"count", s.count}, {"mean", detail::number_or_null(s.mean)},
            {"variance", detail::number_or_null(s.variance)}};
}

[[nodiscard]] inline nlohmann::json to_json(const OpsSummary& s) {
    return {{"runs", s.runs},
            {"single_run", s.single_run},
            {"best_objective", to_json(s.best_objective)},
            {"mean_objective", to_json(s.mean_objective)},
            {"realized_return", to_json(s.realized_return)},
            {"volatility", detail::number_or_null(s.volatility)},
            {"terminal_wealth", to_json(s.terminal_wealth)},
            {"degenerate_steps", s.degenerate_steps}};
}

[[nodiscard]] inline nlohmann::json to_json(const RegretReport& r, bool with_components = false) {
    std::vector<double> xs(r.hindsight_portfolio.weights.data(),
                           r.hindsight_portfolio.weights.data() + r.hindsight_portfolio.weights.size());
    for (double& v : xs) v = round6(v);
    nlohmann::json j = {
        {"horizon", r.horizon},
        {"regret", detail::number_or_null(r.regret)},
        {"regret_best_particle", detail::number_or_null(r.regret_best)},
        {"chain_bound", detail::number_or_null(r.chain_bound)},
        {"chain_bound_best_particle", detail::number_or_null(r.chain_bound_best)},
        {"growth_gap", detail::number_or_null(r.growth_gap)},
        {"hindsight_portfolio", xs},
        {"hindsight_value", detail::number_or_null(r.hindsight_value)},
        {"mean_i11", detail::number_or_null(r.mean_i11)},
        {"mean_i12", detail::number_or_null(r.mean_i12)},
        {"mean_i13", detail::number_or_null(r.mean_i13)},
        {"bound_empirical_estimates",
         {{"market_dispersion", detail::number_or_null(r.bound_estimates.market_dispersion)},
          {"market_range", detail::number_or_null(r.bound_estimates.market_range)},
          {"leader_gap", detail::number_or_null(r.bound_estimates.leader_gap)},
          {"consensus_gap", detail::number_or_null(r.bound_estimates.consensus_gap)},
          {"total", detail::number_or_null(r.bound_estimates.total)}}}};
    if (with_components) {
        nlohmann::json comps = nlohmann::json::array();
        for (const auto& c : r.components)
            comps.push_back({{"step", c.step}, {"i11", round6(c.i11)}, {"i12", round6(c.i12)}, {"i13", round6(c.i13)}});
        j["components"] = comps;
        j["k_indices"] = r.k_indices;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Plot data

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = detail::open_output(path);
    out << text;
    detail::finish(out, path);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

/// sigma, Lambda(sigma) for sigma = k step, k = 1 .. round(hi / step).
inline void write_lambda_curve_csv(const std::filesystem::path& path, double lambda0, double h,
                                   double step = 0.1, double hi = 8.0) {
    auto out = detail::open_output(path);
    out << "sigma,lambda\n" << std::setprecision(17);
    const auto count = static_cast<long>(std::llround(hi / step));
    for (long k = 1; k <= count; ++k) {
        const double s = static_cast<double>(k) * step;
        out << s << ',' << lambda_rate(s, lambda0, h) << '\n';
    }
    detail::finish(out, path);
}

/// One row per grid cell: mean and standard deviation of the final
/// objective, plus mean - sd and mean + sd.
inline void write_confidence_csv(const std::filesystem::path& path, const BatchSummary& s) {
    auto out = detail::open_output(path);
    out << "cell,algorithm,sigma,lambda1,runs,failures,mean,sd,lower,upper,iterations_mean,iterations_variance\n"
        << std::setprecision(17);
    for (std::size_t i = 0; i < s.cells.size(); ++i) {
        const auto& c = s.cells[i];
        const double sd = std::sqrt(c.objective.variance);
        out << i << ',' << to_string(c.cell.algorithm) << ',' << c.cell.sigma << ',' << c.cell.lambda1 << ','
            << c.runs << ',' << c.failures << ',' << c.objective.mean << ',' << sd << ','
            << c.objective.mean - sd << ',' << c.objective.mean + sd << ',' << c.iterations.mean << ','
            << c.iterations.variance << '\n';
    }
    detail::finish(out, path);
}

inline void write_records_csv(const std::filesystem::path& path, const BatchSummary& s) {
    auto out = detail::open_output(path);
    out << "cell,replication,seed,ok,converged,iterations,final_objective,error\n" << std::setprecision(17);
    for (const auto& r : s.records) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << r.cell << ',' << r.replication << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
            << (r.converged ? 1 : 0) << ',' << r.iterations << ',' << r.final_objective << ',' << err << '\n';
    }
    detail::finish(out, path);
}

/// Step-indexed table with one column per named curve; curves must have
/// equal length.
inline void write_curves_csv(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::vector<double>>>& curves) {
    if (curves.empty()) throw InputError("write_curves_csv: no curves");
    const std::size_t len = curves.front().second.size();
    for (const auto& [name, c] : curves)
        if (c.size() != len) throw InputError("write_curves_csv: curve '" + name + "' has a different length");
    auto out = detail::open_output(path);
    out << "step";
    for (const auto& [name, c] : curves) out << ',' << name;
    out << '\n' << std::setprecision(17);
    for (std::size_t n = 0; n < len; ++n) {
        out << n;
        for (const auto& [name, c] : curves) out << ',' << c[n];
        out << '\n';
    }
    detail::finish(out, path);
}

/// Cumulative product of per-step returns, starting at 1.
[[nodiscard]] inline std::vector<double> cumulative_wealth(const std::vector<double>& step_returns) {
    std::vector<double> w(step_returns.size() + 1, 1.0);
    for (std::size_t n = 0; n < step_returns.size(); ++n) w[n + 1] = w[n] * step_returns[n];
    return w;
}

}  // namespace adcbo
