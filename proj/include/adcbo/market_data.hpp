#pragma once

// Price ingestion, synthetic geometric random walks, price relatives and
// rolling window statistics for the portfolio pipeline.

#include "adcbo/errors.hpp"
#include "adcbo/rng.hpp"
#include "adcbo/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace adcbo {

struct PriceSeries {
    std::vector<std::string> tickers;
    std::vector<std::string> dates;  // ISO 8601, strictly increasing
    Matrix prices;                   // T x d, all > 0

    [[nodiscard]] std::size_t length() const { return static_cast<std::size_t>(prices.rows()); }
    [[nodiscard]] std::size_t assets() const { return static_cast<std::size_t>(prices.cols()); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

inline bool valid_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y = 0;
    unsigned m = 0, d = 0;
    auto parse = [&](std::size_t off, std::size_t len, auto& out) {
        const auto r = std::from_chars(s.data() + off, s.data() + off + len, out);
        return r.ec == std::errc{} && r.ptr == s.data() + off + len;
    };
    if (!parse(0, 4, y) || !parse(5, 2, m) || !parse(8, 2, d)) return false;
    return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

inline std::string iso_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

}  // namespace detail

/// Reads `date,T1,...,Td` CSV. Rows are sorted by date on output. Blank
/// lines are skipped.
[[nodiscard]] inline PriceSeries ingest_prices(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IngestionError(1, 0, "empty input");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2) throw IngestionError(1, 0, "header needs a date column and at least one ticker");
    if (header[0] != "date") throw IngestionError(1, 0, "first header cell must be 'date'");

    PriceSeries out;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].empty()) throw IngestionError(1, c, "empty ticker name");
        out.tickers.emplace_back(header[c]);
    }
    const std::size_t d = out.tickers.size();

    struct Row {
        std::string date;
        std::vector<double> values;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() > d + 1) throw IngestionError(line_no, d + 1, "too many cells");
        Row row{std::string(cells[0]), std::vector<double>(d), line_no};
        if (!detail::valid_iso_date(cells[0])) throw IngestionError(line_no, 0, "invalid ISO date");
        for (std::size_t c = 1; c <= d; ++c) {
            if (c >= cells.size() || cells[c].empty()) throw IngestionError(line_no, c, "missing cell");
            double v = 0.0;
            const auto cell = cells[c];
            const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (r.ec != std::errc{} || r.ptr != cell.data() + cell.size())
                throw IngestionError(line_no, c, "not a number");
            if (!std::isfinite(v) || !(v > 0.0)) throw IngestionError(line_no, c, "nonpositive price");
            row.values[c - 1] = v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IngestionError(line_no, 0, "no data rows");

    // ISO dates sort lexicographically.
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].date == rows[i - 1].date)
            throw IngestionError(std::max(rows[i].line, rows[i - 1].line), 0, "duplicate date " + rows[i].date);

    out.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.dates.push_back(rows[i].date);
        for (std::size_t c = 0; c < d; ++c)
            out.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i].values[c];
    }
    return out;
}

[[nodiscard]] inline PriceSeries ingest_prices_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return ingest_prices(in);
}

inline void write_prices_csv(std::ostream& os, const PriceSeries& p) {
    os << "date";
    for (const auto& t : p.tickers) os << ',' << t;
    os << '\n';
    const auto old = os.precision(17);
    for (std::size_t i = 0; i < p.length(); ++i) {
        os << p.dates[i];
        for (std::size_t c = 0; c < p.assets(); ++c)
            os << ',' << p.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        os << '\n';
    }
    os.precision(old);
}

// ---------------------------------------------------------------------------
// Synthetic prices

struct SyntheticSpec {
    std::size_t d = 6;
    std::size_t T = 752;
    std::uint64_t seed = 0;
    Vector drift;           // per-period log drift
    Vector vol;             // per-period log volatility
    Eigen::MatrixXd corr;   // d x d correlation
    double start_price = 100.0;

    /// Same drift, vol and pairwise correlation rho for every asset.
    static SyntheticSpec uniform(std::size_t d, std::size_t T, std::uint64_t seed, double drift, double vol,
                                 double rho) {
        SyntheticSpec s;
        s.d = d;
        s.T = T;
        s.seed = seed;
        s.drift = Vector::Constant(static_cast<Eigen::Index>(d), drift);
        s.vol = Vector::Constant(static_cast<Eigen::Index>(d), vol);
        s.corr = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), rho);
        s.corr.diagonal().setOnes();
        return s;
    }
};

/// Geometric random walk: log p_{t+1} - log p_t = drift + vol (.) (F z_t),
/// z_t ~ N(0, I), F F' = corr. Dates are consecutive weekdays from 2017-01-02.
[[nodiscard]] inline PriceSeries synthesize_prices(const SyntheticSpec& spec) {
    const auto d = static_cast<Eigen::Index>(spec.d);
    if (spec.d < 1 || spec.T < 1) throw InputError("synthesize_prices: need d >= 1 and T >= 1");
    if (spec.drift.size() != d || spec.vol.size() != d || spec.corr.rows() != d || spec.corr.cols() != d)
        throw InputError("synthesize_prices: drift, vol and corr must match d");
    if (!spec.drift.allFinite() || !spec.vol.allFinite() || !spec.corr.allFinite())
        throw InputError("synthesize_prices: non-finite specification");
    if ((spec.vol.array() < 0.0).any()) throw InputError("synthesize_prices: negative volatility");
    if (!(spec.start_price > 0.0)) throw InputError("synthesize_prices: start price must be > 0");
    if ((spec.corr - spec.corr.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InputError("synthesize_prices: corr is not symmetric");
    if ((spec.corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
        throw InputError("synthesize_prices: corr must have unit diagonal");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spec.corr);
    if (eig.info() != Eigen::Success) throw NumericalError("synthesize_prices: eigendecomposition failed");
    if (eig.eigenvalues().minCoeff() < -1e-10) throw InputError("synthesize_prices: corr is not PSD");
    const Eigen::MatrixXd factor =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    RngHandle rng(spec.seed);
    PriceSeries out;
    for (std::size_t c = 0; c < spec.d; ++c) out.tickers.push_back("S" + std::to_string(c + 1));
    out.prices.resize(static_cast<Eigen::Index>(spec.T), d);
    Vector log_price = Vector::Constant(d, std::log(spec.start_price));
    Vector z(d);
    out.prices.row(0) = log_price.array().exp().transpose();
    for (Eigen::Index t = 1; t < out.prices.rows(); ++t) {
        for (Eigen::Index l = 0; l < d; ++l) z[l] = rng.normal();
        log_price += spec.drift + spec.vol.cwiseProduct(factor * z);
        out.prices.row(t) = log_price.array().exp().transpose();
    }

    using namespace std::chrono;
    sys_days day = year{2017} / January / 2;
    for (std::size_t t = 0; t < spec.T; ++t) {
        out.dates.push_back(detail::iso_date(day));
        do {
            day += days{1};
        } while (weekday{day} == Saturday || weekday{day} == Sunday);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Returns and rolling statistics

struct ReturnSeries {
    Matrix relatives;                // (T-1) x d, r_n^i = p_{n+1}^i / p_n^i
    std::vector<std::string> dates;  // date of the later price

    [[nodiscard]] std::size_t length() const { return static_cast<std::size_t>(relatives.rows()); }
    [[nodiscard]] std::size_t assets() const { return static_cast<std::size_t>(relatives.cols()); }
};

[[nodiscard]] inline ReturnSeries returns(const PriceSeries& prices) {
    if (prices.length() < 2) throw InputError("returns: need at least two dates");
    if (!(prices.prices.array() > 0.0).all()) throw InputError("returns: prices must be positive");
    ReturnSeries r;
    const auto t = prices.prices.rows();
    r.relatives = prices.prices.bottomRows(t - 1).cwiseQuotient(prices.prices.topRows(t - 1));
    r.dates.assign(prices.dates.begin() + 1, prices.dates.end());
    return r;
}

struct RollingStats {
    std::vector<Vector> mu;
    std::vector<Eigen::MatrixXd> cov;
    std::size_t window_len = 0;
    std::size_t n_windows = 0;
};

/// Window n covers return rows n, ..., n + window_len - 1. Covariances use
/// the window_len - 1 denominator and are symmetrised exactly.
[[nodiscard]] inline RollingStats rolling_stats(const ReturnSeries& r, std::size_t window_len) {
    if (window_len < 2) throw InputError("rolling_stats: window_len must be >= 2");
    if (window_len > r.length()) throw InputError("rolling_stats: fewer return rows than the window");
    RollingStats s;
    s.window_len = window_len;
    s.n_windows = r.length() - window_len + 1;
    s.mu.reserve(s.n_windows);
    s.cov.reserve(s.n_windows);
    const auto w = static_cast<Eigen::Index>(window_len);
    for (std::size_t n = 0; n < s.n_windows; ++n) {
        const auto block = r.relatives.middleRows(static_cast<Eigen::Index>(n), w);
        Vector mu = block.colwise().mean().transpose();
        const Eigen::MatrixXd centered = block.rowwise() - mu.transpose();
        Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(window_len - 1);
        cov = 0.5 * (cov + cov.transpose()).eval();
        s.mu.push_back(std::move(mu));
        s.cov.push_back(std::move(cov));
    }
    return s;
}

}  // namespace adcbo
