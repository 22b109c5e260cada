#include <catch2/catch_amalgamated.hpp>

#include "adcbo/adam_cbo.hpp"
#include "adcbo/simplex.hpp"

#include <cmath>

using namespace adcbo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("adam: coincident particles do not move", "[adam]") {
    const Ensemble e{Matrix::Constant(6, 3, 1.25), 0};
    AdamState s = AdamState::zeros(6, 3);
    const AdamConfig cfg;
    Ensemble cur = e;
    for (int k = 0; k < 10; ++k) std::tie(cur, s) = adam_cbo_step(cur, std::move(s), cfg, Rastrigin{3});
    CHECK(cur.positions == e.positions);
    CHECK(s.m.isZero(0.0));
    CHECK(s.v.isZero(0.0));
    CHECK(s.step_count == 10);
}

TEST_CASE("adam: single hand-evaluated update", "[adam]") {
    const Matrix x = Matrix::Constant(1, 1, 1.0);
    AdamState s = AdamState::zeros(1, 1);
    const AdamConfig cfg;  // lambda0 1, h 0.1, beta1 0.9, beta2 0.99
    const Matrix next = adam_update(x, Vector::Zero(1), s, cfg);
    CHECK_THAT(s.m(0, 0), WithinAbs(0.1, 1e-15));
    CHECK_THAT(s.v(0, 0), WithinAbs(0.01, 1e-15));
    CHECK_THAT(next(0, 0), WithinAbs(1.0 - 0.1 / (1.0 + 1e-6), 1e-14));
    CHECK_THAT(next(0, 0), WithinAbs(0.9000001, 1e-9));
}

TEST_CASE("adam: two steps with a constant drift", "[adam]") {
    // Same positions and consensus twice, so g = 1 both times.
    const Matrix x = Matrix::Constant(1, 1, 1.0);
    AdamState s = AdamState::zeros(1, 1);
    const AdamConfig cfg;
    (void)adam_update(x, Vector::Zero(1), s, cfg);
    const Matrix second = adam_update(x, Vector::Zero(1), s, cfg);
    const double m = 0.9 * 0.1 + 0.1;
    const double v = 0.99 * 0.01 + 0.01;
    CHECK_THAT(s.m(0, 0), WithinRel(m, 1e-14));
    CHECK_THAT(s.v(0, 0), WithinRel(v, 1e-14));
    const double step = 0.1 * (m / 0.1) / (std::sqrt(v / 0.01) + 1e-6);
    CHECK_THAT(1.0 - second(0, 0), WithinRel(step, 1e-13));
    // m_hat / sqrt(v_hat) keeps the sign of g and stays O(1)
    CHECK(step > 0.1);
    CHECK(step < 0.14);
}

TEST_CASE("adam: power bias correction recovers the usual Adam step", "[adam]") {
    const Matrix x = Matrix::Constant(1, 2, 3.0);
    AdamState s = AdamState::zeros(1, 2);
    AdamConfig cfg;
    cfg.bias = BiasCorrection::power;
    const Matrix next = adam_update(x, Vector::Zero(2), s, cfg);
    // First Adam step has m_hat = g, v_hat = g^2.
    CHECK_THAT(3.0 - next(0, 0), WithinRel(0.1 * 3.0 / (3.0 + 1e-6), 1e-14));
}

TEST_CASE("adam: second moments stay nonnegative and finite", "[adam]") {
    RngHandle rng(3);
    Ensemble e = uniform_box_ensemble(10, 4, -3.0, 3.0, rng);
    AdamState s = AdamState::zeros(10, 4);
    AdamConfig cfg;
    for (int k = 0; k < 200; ++k) {
        std::tie(e, s) = adam_cbo_step(e, std::move(s), cfg, Rastrigin{4});
        CHECK((s.v.array() >= 0.0).all());
        CHECK(s.m.allFinite());
        CHECK(e.all_finite());
    }
}

TEST_CASE("adam: state dimension mismatch", "[adam]") {
    AdamState s = AdamState::zeros(2, 2);
    CHECK_THROWS_AS(adam_update(Matrix::Zero(3, 2), Vector::Zero(2), s, AdamConfig{}), InputError);
    AdamConfig bad;
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("adam: non-finite drift raises a step error", "[adam]") {
    Matrix x = Matrix::Zero(2, 1);
    x(1, 0) = INFINITY;
    AdamState s = AdamState::zeros(2, 1);
    try {
        (void)adam_update(x, Vector::Zero(1), s, AdamConfig{});
        FAIL("expected StepError");
    } catch (const StepError& e) {
        CHECK(e.particle() == 1);
    }
}

TEST_CASE("adam static: pre-consensed ensemble", "[adam]") {
    Ensemble e{Matrix::Constant(4, 2, 0.5), 0};
    e.positions(0, 0) += 5e-7;
    const auto res = run_adam_static(e, AdamConfig{}, 1e-6, 1000, Rastrigin{2});
    CHECK(res.iterations == 0);
    CHECK(res.converged);
}

TEST_CASE("adam static: Euclidean stopping rule is used", "[adam]") {
    // Per-coordinate diameters are below 1e-6 but the Euclidean distance is not.
    Ensemble e{Matrix::Zero(2, 4), 0};
    e.positions.row(1).setConstant(9e-7);
    CHECK(coordinate_consensus(e.positions, 1e-6));
    CHECK_FALSE(euclidean_consensus(e.positions, 1e-6));
    const auto res = run_adam_static(e, AdamConfig{}, 1e-6, 5000, Rastrigin{4});
    CHECK(res.iterations > 0);
    CHECK(res.converged);
    CHECK(max_pairwise_distance(res.final_positions) <= 1e-6);
}

TEST_CASE("adam static: converges on Rastrigin", "[adam]") {
    RngHandle rng(10);
    const Ensemble e = uniform_box_ensemble(50, 15, 2.0, 4.0, rng);
    const auto res = run_adam_static(e, AdamConfig{}, 1e-6, 100000, Rastrigin{15});
    CHECK(res.converged);
    CHECK(std::isfinite(res.objective_at_consensus));
}

TEST_CASE("adam dynamic: horizon 0 returns the initial ensemble", "[adam]") {
    RngHandle rng(1);
    const Ensemble e = uniform_box_ensemble(5, 3, 0.0, 1.0, rng);
    const auto dyn = [](std::size_t, std::span<const double> x) { return rastrigin(x); };
    const auto traj = run_adam_dynamic(e, AdamConfig{}, 0, dyn, {});
    REQUIRE(traj.size() == 1);
    CHECK(traj[0].positions == e.positions);
}

TEST_CASE("adam dynamic: projected steps stay on the simplex", "[adam]") {
    RngHandle rng(6);
    Ensemble e{Matrix(8, 4), 0};
    for (Eigen::Index i = 0; i < 8; ++i) e.positions.row(i) = uniform_simplex_point(4, rng).transpose();
    const auto dyn = [](std::size_t n, std::span<const double> x) {
        return x[0] * x[0] + static_cast<double>(n % 3) * x[1];
    };
    const Projection proj = [](std::span<double> p) { project_simplex_inplace(p); };
    const auto traj = run_adam_dynamic(e, AdamConfig{}, 30, dyn, proj);
    REQUIRE(traj.size() == 31);
    for (const auto& t : traj)
        for (Eigen::Index i = 0; i < 8; ++i) CHECK(on_simplex(t.particle(static_cast<std::size_t>(i))));
}

TEST_CASE("adam: default decay rates", "[adam]") {
    const AdamConfig cfg;
    CHECK(cfg.beta1 == 0.9);
    CHECK(cfg.beta2 == 0.99);
    CHECK(cfg.bias == BiasCorrection::constant);
}
