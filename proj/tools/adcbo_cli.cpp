// adcbo command-line driver: static-bench, portfolio, theory, regret.

#include "adcbo/adcbo.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace adcbo;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::size_t runs = 50;
    std::string out = "out";
    std::size_t threads = 0;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "key = value file; keys are the long option names")
        ->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "master seed")->capture_default_str();
    app->add_option("--runs", c.runs, "replications")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--out,--out_dir", c.out, "output directory")->capture_default_str();
    app->add_option("--threads", c.threads, "worker threads (0 = all cores)")->capture_default_str();
}

void add_dynamics(CLI::App* app, CboParams& p) {
    app->add_option("--lambda0", p.lambda0, "drift rate")->capture_default_str();
    app->add_option("--lambda1", p.lambda1, "average-drift rate")->capture_default_str();
    app->add_option("--sigma", p.sigma, "noise strength")->capture_default_str();
    app->add_option("--h,--step", p.h, "step size")->capture_default_str();
    app->add_option("--beta", p.beta, "inverse temperature")->capture_default_str();
    app->add_option("-N,--n-particles,--n_particles", p.n_particles, "ensemble size")->capture_default_str();
}

// "d=6,T=752,seed=7,drift=0.0003,vol=0.015,rho=0.3"; omitted keys keep defaults.
SyntheticSpec parse_synthetic(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        const auto item = text.substr(start, end - start);
        if (!item.empty()) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw InputError("synthetic spec: expected key=value, got '" + item + "'");
            kv[item.substr(0, eq)] = item.substr(eq + 1);
        }
        start = end + 1;
    }
    std::size_t d = 6, T = 752;
    std::uint64_t seed = 0;
    double drift = 0.0003, vol = 0.015, rho = 0.3;
    for (const auto& [k, v] : kv) {
        try {
            if (k == "d") d = std::stoul(v);
            else if (k == "T") T = std::stoul(v);
            else if (k == "seed") seed = std::stoull(v);
            else if (k == "drift") drift = std::stod(v);
            else if (k == "vol") vol = std::stod(v);
            else if (k == "rho") rho = std::stod(v);
            else throw InputError("synthetic spec: unknown key '" + k + "'");
        } catch (const std::logic_error&) {
            throw InputError("synthetic spec: bad value for '" + k + "'");
        }
    }
    return SyntheticSpec::uniform(d, T, seed, drift, vol, rho);
}

struct MarketOptions {
    std::string prices;
    std::string synthetic;
    std::size_t window = 60;
    std::string algo = "ad-cbo";
    CboParams params;
    double beta1 = 0.9;
    double beta2 = 0.99;
};

void add_market(CLI::App* app, MarketOptions& m) {
    auto* prices = app->add_option("--prices", m.prices, "price CSV: date,TICKER1,...");
    auto* synth = app->add_option("--synthetic", m.synthetic, "synthetic spec, e.g. d=6,T=752,seed=7,vol=0.015");
    prices->excludes(synth);
    app->add_option("--window", m.window, "rolling window length")->capture_default_str();
    app->add_option("--algo", m.algo, "cbo | ad-cbo | adam-cbo")
        ->capture_default_str()
        ->check(CLI::IsMember({"cbo", "ad-cbo", "adam-cbo"}));
    add_dynamics(app, m.params);
    app->add_option("--beta1", m.beta1, "Adam first-moment decay")->capture_default_str();
    app->add_option("--beta2", m.beta2, "Adam second-moment decay")->capture_default_str();
}

struct Market {
    ReturnSeries r;
    RollingStats stats;
    std::vector<std::string> tickers;
};

Market load_market(const MarketOptions& m) {
    PriceSeries p;
    if (!m.prices.empty())
        p = ingest_prices_file(m.prices);
    else
        p = synthesize_prices(parse_synthetic(m.synthetic.empty() ? "seed=7" : m.synthetic));
    Market out;
    out.tickers = p.tickers;
    out.r = returns(p);
    out.stats = rolling_stats(out.r, m.window);
    return out;
}

CboParams market_params(const MarketOptions& m, std::size_t d) {
    CboParams p = m.params;
    p.dim = d;
    return p;
}

AdamConfig adam_of(const MarketOptions& m) {
    AdamConfig a;
    a.beta1 = m.beta1;
    a.beta2 = m.beta2;
    return a;
}

struct Batch {
    std::vector<OpsRun> runs;
    std::vector<std::string> errors;
};

Batch run_batch(const Market& mk, const MarketOptions& m, const Common& c) {
    const auto reps = run_ops_batch(mk.r, mk.stats, market_params(m, mk.r.assets()), parse_algorithm(m.algo), c.runs,
                                    c.seed, c.threads, adam_of(m));
    Batch b;
    for (const auto& rep : reps) {
        if (rep.run)
            b.runs.push_back(*rep.run);
        else
            b.errors.push_back("replication " + std::to_string(rep.index) + ": " + rep.error);
    }
    return b;
}

nlohmann::json market_json(const Market& mk, const MarketOptions& m, const Common& c) {
    const auto p = market_params(m, mk.r.assets());
    return {{"tickers", mk.tickers},
            {"return_rows", mk.r.length()},
            {"window", mk.stats.window_len},
            {"windows", mk.stats.n_windows},
            {"algorithm", m.algo},
            {"lambda0", p.lambda0},
            {"lambda1", p.lambda1},
            {"sigma", p.sigma},
            {"h", p.h},
            {"beta", p.beta},
            {"n_particles", p.n_particles},
            {"runs", c.runs},
            {"seed", c.seed}};
}

int cmd_static_bench(const ExperimentConfig& cfg) {
    const auto s = run_static_bench(cfg);
    const fs::path out = cfg.out_dir;
    write_json(out / "summary.json", to_json(s));
    write_records_csv(out / "records.csv", s);
    write_confidence_csv(out / "confidence.csv", s);
    for (const auto& c : s.cells)
        std::printf("%-20s L %.4f (var %.4g)  iterations %.1f (var %.4g)  failures %zu\n", c.cell.label().c_str(),
                    c.objective.mean, c.objective.variance, c.iterations.mean, c.iterations.variance, c.failures);
    return s.all_ok() ? 0 : 1;
}

int cmd_portfolio(const MarketOptions& m, const Common& c) {
    const auto mk = load_market(m);
    const auto batch = run_batch(mk, m, c);
    const fs::path out = c.out;
    nlohmann::json j = {{"market", market_json(mk, m, c)}, {"failures", batch.errors}};
    if (!batch.runs.empty()) {
        const auto& first = batch.runs.front();
        const std::size_t realized = first.realized_steps();
        const auto xs = hindsight_crp(mk.r.relatives.bottomRows(static_cast<Eigen::Index>(realized)));
        const auto bench = constant_portfolio_curve(mk.r, xs.portfolio.weights, first.first_return_row, realized);
        const auto wc = wealth_curves_and_correlation(batch.runs, bench);
        j["summary"] = to_json(run_statistics(batch.runs));
        std::vector<double> w(xs.portfolio.weights.data(), xs.portfolio.weights.data() + xs.portfolio.weights.size());
        j["hindsight"] = {{"portfolio", w}, {"value", xs.value}};
        j["correlation_with_hindsight"] =
            wc.correlation ? nlohmann::json(round6(*wc.correlation)) : nlohmann::json(nullptr);
        // wealth after each realised step, without the leading 1
        auto wa = cumulative_wealth(wc.algorithm_curve);
        auto wb = cumulative_wealth(bench);
        wa.erase(wa.begin());
        wb.erase(wb.begin());
        write_curves_csv(out / "curves.csv", {{"algorithm_return", wc.algorithm_curve},
                                              {"hindsight_return", bench},
                                              {"algorithm_wealth", wa},
                                              {"hindsight_wealth", wb}});
        auto stream = detail::open_output(out / "runs.csv");
        write_ops_csv_header(stream, mk.r.assets());
        for (std::size_t i = 0; i < batch.runs.size(); ++i) write_ops_csv(stream, batch.runs[i], i);
        detail::finish(stream, out / "runs.csv");
        const auto& s = j["summary"];
        std::printf("%s: L_best %s (var %s), L_mean %s, volatility %s, correlation %s\n", m.algo.c_str(),
                    s["best_objective"]["mean"].dump().c_str(), s["best_objective"]["variance"].dump().c_str(),
                    s["mean_objective"]["mean"].dump().c_str(), s["volatility"].dump().c_str(),
                    j["correlation_with_hindsight"].dump().c_str());
    }
    write_json(out / "summary.json", j);
    for (const auto& e : batch.errors) std::fprintf(stderr, "%s\n", e.c_str());
    return batch.errors.empty() ? 0 : 1;
}

int cmd_regret(const MarketOptions& m, const Common& c) {
    const auto mk = load_market(m);
    const auto batch = run_batch(mk, m, c);
    const fs::path out = c.out;
    nlohmann::json j = {{"market", market_json(mk, m, c)}, {"failures", batch.errors}};
    std::size_t bad = batch.errors.size();
    if (!batch.runs.empty()) {
        const std::size_t realized = batch.runs.front().realized_steps();
        const auto xs = hindsight_crp(mk.r.relatives.bottomRows(static_cast<Eigen::Index>(realized)));
        std::vector<double> values, bounds;
        nlohmann::json reports = nlohmann::json::array();
        for (std::size_t i = 0; i < batch.runs.size(); ++i) {
            try {
                const auto rep = regret(batch.runs[i], mk.r, xs.portfolio);
                values.push_back(rep.regret);
                bounds.push_back(rep.chain_bound);
                reports.push_back(to_json(rep, i == 0));
                if (i == 0) {
                    std::vector<double> step, i11, i12, i13;
                    for (const auto& comp : rep.components) {
                        step.push_back(static_cast<double>(comp.step));
                        i11.push_back(comp.i11);
                        i12.push_back(comp.i12);
                        i13.push_back(comp.i13);
                    }
                    if (!i11.empty()) write_curves_csv(out / "components.csv", {{"run_step", step}, {"i11", i11}, {"i12", i12}, {"i13", i13}});
                }
            } catch (const std::exception& e) {
                ++bad;
                j["failures"].push_back("replication " + std::to_string(i) + ": " + e.what());
            }
        }
        j["reports"] = reports;
        if (!values.empty()) {
            j["regret"] = to_json(sample_stats(values));
            j["chain_bound"] = to_json(sample_stats(bounds));
            std::printf("%s: regret %s (var %s), chain bound %s over %zu runs\n", m.algo.c_str(),
                        j["regret"]["mean"].dump().c_str(), j["regret"]["variance"].dump().c_str(),
                        j["chain_bound"]["mean"].dump().c_str(), values.size());
        }
    }
    write_json(out / "regret.json", j);
    return bad == 0 ? 0 : 1;
}

struct TheoryOptions {
    CboParams params;
    std::vector<double> s;
    std::vector<double> beta_grid{10.0, 100.0, 1000.0};
    double epsilon = 0.5;
    std::size_t samples = 100'000;
    double sigma_max = 8.0;
    double sigma_step = 0.1;
};

int cmd_theory(TheoryOptions t, const Common& c) {
    if (t.s.empty()) t.s.assign(t.params.dim, 1.0);
    if (t.s.size() != t.params.dim) throw InputError("--s needs one entry per dimension");
    t.params.validate();
    const auto rep = stability_report(t.params, t.s);
    RngHandle rng(c.seed);
    const auto e = error_diagnostic_E(t.beta_grid, Rastrigin{t.params.dim}, t.s, t.epsilon, t.samples, rng);
    const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(round6(*v)) : nlohmann::json(nullptr); };
    nlohmann::json ej = nlohmann::json::array();
    for (const auto& d : e) ej.push_back({{"beta", d.beta}, {"E", round6(d.value)}});
    const nlohmann::json j = {{"lambda0", t.params.lambda0},
                              {"h", t.params.h},
                              {"sigma", t.params.sigma},
                              {"n_particles", t.params.n_particles},
                              {"alpha", round6(rep.alpha)},
                              {"y_star", opt(rep.y_star)},
                              {"cond_exp_holds", rep.cond_exp_holds},
                              {"cond_para_holds", rep.cond_para_holds},
                              {"lambda_rate", round6(rep.lambda_rate)},
                              {"sigma_star", opt(rep.sigma_star)},
                              {"c_tilde", round6(rep.c_tilde)},
                              {"c_bound", opt(rep.c_bound)},
                              {"decay_exponent", round6(rep.decay_exponent)},
                              {"error_diagnostic", ej},
                              {"epsilon", t.epsilon}};
    const fs::path out = c.out;
    write_json(out / "theory.json", j);
    write_lambda_curve_csv(out / "lambda_curve.csv", t.params.lambda0, t.params.h, t.sigma_step, t.sigma_max);
    std::printf("alpha %.6f  Lambda %.6f  sigma* %s  cond_exp %s  cond_para %s\n", rep.alpha, rep.lambda_rate,
                j["sigma_star"].dump().c_str(), rep.cond_exp_holds ? "yes" : "no", rep.cond_para_holds ? "yes" : "no");
    return 0;
}

// CLI11 only reads config files for the top-level app, so subcommand files
// are applied here: every key fills its option unless the command line
// already set it.
void apply_config(CLI::App* app, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    for (const auto& item : CLI::ConfigINI().from_config(in)) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        CLI::Option* op = app->get_option_no_throw("--" + item.name);
        if (op == nullptr || item.name == "config") throw InputError("config: unknown key '" + item.fullname() + "'");
        if (op->count() > 0) continue;
        for (const auto& v : item.inputs) op->add_result(v);
        op->run_callback();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consensus-based optimisation experiments"};
    // -h is taken by the step size
    app.set_help_flag("--help", "print this help and exit");
    app.require_subcommand(1);

    ExperimentConfig bench;
    Common bench_common;
    auto* sb = app.add_subcommand("static-bench", "Rastrigin grid over sigma, lambda1 and Adam");
    add_common(sb, bench_common);
    add_dynamics(sb, bench.base);
    sb->add_option("--sigma-grid,--sigma_grid", bench.sigma_grid, "CBO noise levels")->capture_default_str();
    sb->add_option("--lambda1-grid,--lambda1_grid", bench.lambda1_grid, "average-drift levels")->capture_default_str();
    sb->add_option("--adam", bench.adam, "include Adam-CBO")->capture_default_str();
    sb->add_option("-d,--dim", bench.base.dim, "dimension")->capture_default_str();
    sb->add_option("--eps-tol,--eps_tol", bench.base.eps_tol, "consensus tolerance")->capture_default_str();
    sb->add_option("--max-iters,--max_iters", bench.base.max_iters, "iteration cap")->capture_default_str();
    sb->add_option("--init-lo,--init_lo", bench.init_lo, "initial box lower edge")->capture_default_str();
    sb->add_option("--init-hi,--init_hi", bench.init_hi, "initial box upper edge")->capture_default_str();
    sb->add_option("--beta1", bench.beta1, "Adam first-moment decay")->capture_default_str();
    sb->add_option("--beta2", bench.beta2, "Adam second-moment decay")->capture_default_str();

    MarketOptions port;
    port.params.n_particles = 20;
    port.params.beta = kOpsDefaultBeta;
    port.params.lambda1 = 1.0;
    Common port_common;
    auto* pf = app.add_subcommand("portfolio", "online portfolio selection batch");
    add_common(pf, port_common);
    add_market(pf, port);

    MarketOptions reg = port;
    Common reg_common;
    auto* rg = app.add_subcommand("regret", "empirical regret against the hindsight constant portfolio");
    add_common(rg, reg_common);
    add_market(rg, reg);

    TheoryOptions theory;
    theory.params.sigma = 1.0;
    Common theory_common;
    auto* th = app.add_subcommand("theory", "stability quantities, Lambda curve and E(beta)");
    add_common(th, theory_common);
    add_dynamics(th, theory.params);
    th->add_option("-d,--dim", theory.params.dim, "dimension")->capture_default_str();
    th->add_option("--s", theory.s, "initial standard deviations (default all 1)");
    th->add_option("--beta-grid,--beta_grid", theory.beta_grid, "beta values for E(beta)")->capture_default_str();
    th->add_option("--epsilon", theory.epsilon, "epsilon in E(beta)")->capture_default_str();
    th->add_option("--samples", theory.samples, "Monte-Carlo samples")->capture_default_str();
    th->add_option("--sigma-max,--sigma_max", theory.sigma_max, "Lambda curve range")->capture_default_str();
    th->add_option("--sigma-step,--sigma_step", theory.sigma_step, "Lambda curve spacing")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        apply_config(sb, bench_common.config);
        apply_config(pf, port_common.config);
        apply_config(rg, reg_common.config);
        apply_config(th, theory_common.config);
        if (sb->parsed()) {
            bench.runs = bench_common.runs;
            bench.seed = bench_common.seed;
            bench.out_dir = bench_common.out;
            bench.threads = bench_common.threads;
            return cmd_static_bench(bench);
        }
        if (pf->parsed()) return cmd_portfolio(port, port_common);
        if (rg->parsed()) return cmd_regret(reg, reg_common);
        if (th->parsed()) return cmd_theory(theory, theory_common);
    } catch (const IngestionError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
