#include <catch2/catch_amalgamated.hpp>

#include "adcbo/market_data.hpp"

#include <cmath>
#include <sstream>

using namespace adcbo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PriceSeries parse(const std::string& text) {
    std::istringstream in(text);
    return ingest_prices(in);
}

template <class F>
void expect_ingestion_error(F&& f, std::size_t row, std::size_t column) {
    try {
        f();
        FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
        CHECK(e.row() == row);
        CHECK(e.column() == column);
    }
}

}  // namespace

TEST_CASE("ingest: two rows, one ticker", "[market]") {
    const auto p = parse("date,AAA\n2019-01-02,100\n2019-01-03,110\n");
    CHECK(p.length() == 2);
    CHECK(p.assets() == 1);
    CHECK(p.tickers[0] == "AAA");
    CHECK(p.prices(1, 0) == 110.0);
}

TEST_CASE("ingest: unsorted rows come back sorted", "[market]") {
    const auto sorted = parse("date,A,B\n2019-01-02,1,2\n2019-01-03,3,4\n2019-01-04,5,6\n");
    const auto shuffled = parse("date,A,B\n2019-01-04,5,6\n2019-01-02,1,2\n\n2019-01-03,3,4\n");
    CHECK(shuffled.dates == sorted.dates);
    CHECK(shuffled.prices == sorted.prices);
}

TEST_CASE("ingest: whitespace and CRLF", "[market]") {
    const auto p = parse("date, A ,B\r\n2019-01-02, 1.5 ,2\r\n");
    CHECK(p.tickers[0] == "A");
    CHECK(p.prices(0, 0) == 1.5);
}

TEST_CASE("ingest: errors name the offending cell", "[market]") {
    expect_ingestion_error([] { (void)parse("date,A,B\n2019-01-02,1,0\n"); }, 2, 2);
    expect_ingestion_error([] { (void)parse("date,A,B\n2019-01-02,1,-3\n"); }, 2, 2);
    expect_ingestion_error([] { (void)parse("date,A,B\n2019-01-02,1\n"); }, 2, 2);
    expect_ingestion_error([] { (void)parse("date,A,B\n2019-01-02,,1\n"); }, 2, 1);
    expect_ingestion_error([] { (void)parse("date,A\n2019-01-02,abc\n"); }, 2, 1);
    expect_ingestion_error([] { (void)parse("date,A\n2019-01-02,1x\n"); }, 2, 1);
    expect_ingestion_error([] { (void)parse("date,A\n2019-02-30,1\n"); }, 2, 0);
    expect_ingestion_error([] { (void)parse("date,A\n2019-01-02,1,2\n"); }, 2, 2);
    expect_ingestion_error([] { (void)parse("date,A\n2019-01-02,1\n2019-01-03,1\n2019-01-02,4\n"); }, 4, 0);
    expect_ingestion_error([] { (void)parse("day,A\n2019-01-02,1\n"); }, 1, 0);
    expect_ingestion_error([] { (void)parse(""); }, 1, 0);
    expect_ingestion_error([] { (void)parse("date,A\n"); }, 1, 0);
}

TEST_CASE("ingest: missing file", "[market]") {
    CHECK_THROWS_AS(ingest_prices_file("/nonexistent/prices.csv"), IoError);
}

TEST_CASE("ingest: write then read round trip", "[market]") {
    const auto p = synthesize_prices(SyntheticSpec::uniform(3, 40, 5, 0.001, 0.02, 0.2));
    std::ostringstream os;
    write_prices_csv(os, p);
    const auto q = parse(os.str());
    CHECK(q.tickers == p.tickers);
    CHECK(q.dates == p.dates);
    CHECK(q.prices == p.prices);
}

TEST_CASE("synthetic: zero volatility gives exponential paths", "[market]") {
    auto spec = SyntheticSpec::uniform(2, 50, 1, 0.01, 0.0, 0.0);
    spec.drift[1] = -0.02;
    const auto p = synthesize_prices(spec);
    for (Eigen::Index t = 0; t < 50; ++t) {
        CHECK_THAT(p.prices(t, 0), WithinRel(100.0 * std::exp(0.01 * t), 1e-12));
        CHECK_THAT(p.prices(t, 1), WithinRel(100.0 * std::exp(-0.02 * t), 1e-12));
    }
}

TEST_CASE("synthetic: determinism and weekday dates", "[market]") {
    const auto spec = SyntheticSpec::uniform(4, 30, 77, 0.0, 0.01, 0.5);
    const auto a = synthesize_prices(spec);
    const auto b = synthesize_prices(spec);
    CHECK(a.prices == b.prices);
    CHECK(a.dates == b.dates);
    CHECK(a.dates[0] == "2017-01-02");
    CHECK(a.dates[4] == "2017-01-06");
    CHECK(a.dates[5] == "2017-01-09");
    auto other = spec;
    other.seed = 78;
    CHECK(synthesize_prices(other).prices != a.prices);
}

TEST_CASE("synthetic: sample log-return covariance", "[market]") {
    SyntheticSpec spec;
    spec.d = 3;
    spec.T = 100'001;
    spec.seed = 12;
    spec.drift = Vector::Zero(3);
    spec.vol = Vector(3);
    spec.vol << 0.01, 0.02, 0.03;
    spec.corr = Eigen::MatrixXd(3, 3);
    spec.corr << 1.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 1.0;
    const auto p = synthesize_prices(spec);
    const Matrix logs = p.prices.array().log().matrix();
    const Matrix dl = logs.bottomRows(100'000) - logs.topRows(100'000);
    const Matrix centered = dl.rowwise() - dl.colwise().mean();
    const Eigen::MatrixXd sample = centered.transpose() * centered / (dl.rows() - 1.0);
    const Eigen::MatrixXd target = spec.vol.asDiagonal() * spec.corr * spec.vol.asDiagonal();
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) CHECK_THAT(sample(i, j), WithinRel(target(i, j), 0.05));
}

TEST_CASE("synthetic: invalid correlation", "[market]") {
    auto spec = SyntheticSpec::uniform(3, 10, 1, 0.0, 0.01, 0.0);
    spec.corr(0, 1) = spec.corr(1, 0) = 0.9;
    spec.corr(0, 2) = spec.corr(2, 0) = 0.9;
    spec.corr(1, 2) = spec.corr(2, 1) = -0.9;
    CHECK_THROWS_AS(synthesize_prices(spec), InputError);
    spec.corr = Eigen::MatrixXd::Identity(3, 3);
    spec.corr(0, 1) = 0.1;
    CHECK_THROWS_AS(synthesize_prices(spec), InputError);
    spec.corr = 2.0 * Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(synthesize_prices(spec), InputError);
}

TEST_CASE("returns: price ratios", "[market]") {
    const auto flat = parse("date,A,B\n2019-01-02,5,7\n2019-01-03,5,7\n2019-01-04,5,7\n");
    CHECK((returns(flat).relatives.array() == 1.0).all());
    const auto up = parse("date,A\n2019-01-02,100\n2019-01-03,110\n");
    const auto r = returns(up);
    CHECK_THAT(r.relatives(0, 0), WithinAbs(1.1, 1e-15));
    CHECK(r.dates[0] == "2019-01-03");
    CHECK_THROWS_AS(returns(parse("date,A\n2019-01-02,100\n")), InputError);
}

TEST_CASE("returns: recovers exp of the log increments", "[market]") {
    RngHandle rng(4);
    PriceSeries p;
    p.tickers = {"A", "B"};
    p.prices.resize(200, 2);
    Matrix x(199, 2);
    double c0 = 0.0, c1 = 0.0;
    p.prices(0, 0) = p.prices(0, 1) = 1.0;
    for (Eigen::Index t = 0; t < 199; ++t) {
        x(t, 0) = rng.normal(0.0, 0.05);
        x(t, 1) = rng.normal(0.0, 0.05);
        c0 += x(t, 0);
        c1 += x(t, 1);
        p.prices(t + 1, 0) = std::exp(c0);
        p.prices(t + 1, 1) = std::exp(c1);
    }
    for (int t = 0; t < 200; ++t) p.dates.push_back(std::to_string(t));
    const auto r = returns(p);
    for (Eigen::Index t = 0; t < 199; ++t)
        for (Eigen::Index l = 0; l < 2; ++l) CHECK_THAT(r.relatives(t, l), WithinRel(std::exp(x(t, l)), 1e-12));
}

TEST_CASE("rolling stats: hand values", "[market]") {
    ReturnSeries r;
    r.relatives = Matrix(2, 1);
    r.relatives << 1.0, 3.0;
    r.dates = {"a", "b"};
    const auto s = rolling_stats(r, 2);
    REQUIRE(s.n_windows == 1);
    CHECK(s.mu[0][0] == 2.0);
    CHECK(s.cov[0](0, 0) == 2.0);
    CHECK_THROWS_AS(rolling_stats(r, 3), InputError);
    CHECK_THROWS_AS(rolling_stats(r, 1), InputError);
}

TEST_CASE("rolling stats: constant returns", "[market]") {
    ReturnSeries r;
    r.relatives = Matrix(10, 3);
    r.relatives.rowwise() = Eigen::RowVector3d(1.01, 0.99, 1.0);
    const auto s = rolling_stats(r, 4);
    CHECK(s.n_windows == 7);
    for (std::size_t n = 0; n < s.n_windows; ++n) {
        CHECK_THAT(s.mu[n][0], WithinAbs(1.01, 1e-15));
        CHECK_THAT(s.mu[n][1], WithinAbs(0.99, 1e-15));
        CHECK(s.cov[n].cwiseAbs().maxCoeff() < 1e-30);
    }
}

TEST_CASE("rolling stats: window count and covariance oracle", "[market]") {
    const auto p = synthesize_prices(SyntheticSpec::uniform(6, 752, 7, 0.0003, 0.015, 0.3));
    const auto r = returns(p);
    REQUIRE(r.length() == 751);
    const auto s = rolling_stats(r, 60);
    CHECK(s.n_windows == 692);
    // window 100, element (1, 4), computed with explicit sums
    double m1 = 0.0, m4 = 0.0;
    for (int t = 100; t < 160; ++t) {
        m1 += r.relatives(t, 1) / 60.0;
        m4 += r.relatives(t, 4) / 60.0;
    }
    double c = 0.0;
    for (int t = 100; t < 160; ++t) c += (r.relatives(t, 1) - m1) * (r.relatives(t, 4) - m4);
    c /= 59.0;
    CHECK_THAT(s.mu[100][1], WithinRel(m1, 1e-14));
    CHECK_THAT(s.cov[100](1, 4), WithinRel(c, 1e-10));
    CHECK(s.cov[100](1, 4) == s.cov[100](4, 1));
}
