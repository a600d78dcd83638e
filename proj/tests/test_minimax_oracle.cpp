#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "isloss/minimax_oracle.hpp"
#include "test_support.hpp"

using namespace isloss;

namespace {

LossVector vec(std::initializer_list<double> v) {
    LossVector out(static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), out.data());
    return out;
}

bool on_simplex(const Eigen::VectorXd& w) {
    return (w.array() >= 0).all() && std::abs(w.sum() - 1.0) < 1e-12;
}

}  // namespace

TEST_CASE("budget") {
    CHECK_THROWS_AS(KlBudget(-0.1), DomainError);
    CHECK_THROWS_AS(KlBudget(std::nan("")), DomainError);
    CHECK(KlBudget(5.0).effective(3) == doctest::Approx(std::log(3.0)));
    CHECK(KlBudget(5.0).exceeds_support(3));
    CHECK_FALSE(KlBudget(0.2).exceeds_support(3));
}

TEST_CASE("grid oracle") {
    const LossVector l = vec({1, 2, 3});
    SUBCASE("zero budget forces uniform") {
        const OracleSolution s = solve_inner_max_grid(l, KlBudget(0.0), 400);
        for (Eigen::Index i = 0; i < 3; ++i) CHECK(s.weights(i) == doctest::Approx(1.0 / 3).epsilon(1e-15));
        CHECK(s.objective == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(s.method == OracleMethod::grid);
    }
    SUBCASE("budget at log N gives the point mass on the argmax") {
        const OracleSolution s = solve_inner_max_grid(vec({0.5, 4, 1, 2}), KlBudget(std::log(4.0)), 100);
        CHECK(s.weights(1) == 1.0);
        CHECK(s.objective == 4.0);
        CHECK(s.regime == Regime::point_mass);
    }
    SUBCASE("[1,2,3], c=0.2 agrees with bisection within 1e-3") {
        const OracleSolution g = solve_inner_max_grid(l, KlBudget(0.2), 400);
        const OracleSolution b = solve_inner_max_closed_form(l, KlBudget(0.2));
        CHECK(std::abs(g.objective - b.objective) < 1e-3);
        CHECK(g.kl <= 0.2 + 1e-8);
        CHECK(on_simplex(g.weights));
    }
    SUBCASE("ties resolve to the lexicographically smallest weights") {
        const OracleSolution s = solve_inner_max_grid(vec({3, 3}), KlBudget(std::log(2.0)), 100);
        CHECK(s.weights(0) == 0.0);
        CHECK(s.weights(1) == 1.0);
    }
    SUBCASE("deterministic") {
        const OracleSolution a = solve_inner_max_grid(vec({0.3, 1.7, 0.9, 1.1}), KlBudget(0.3), 120);
        const OracleSolution b = solve_inner_max_grid(vec({0.3, 1.7, 0.9, 1.1}), KlBudget(0.3), 120);
        CHECK((a.weights.array() == b.weights.array()).all());
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(solve_inner_max_grid(vec({1, 2, 3, 4, 5}), KlBudget(0.1), 100), UnsupportedSize);
        CHECK_THROWS_AS(solve_inner_max_grid(l, KlBudget(0.1), 99), std::invalid_argument);
        CHECK_THROWS_AS(solve_inner_max_grid(LossVector(0), KlBudget(0.1), 100), DomainError);
    }
}

TEST_CASE("projected ascent") {
    SUBCASE("zero budget stays uniform") {
        const OracleSolution s = solve_inner_max_ascent(vec({1, 5, 2}), KlBudget(0.0), 0.01, 500);
        for (Eigen::Index i = 0; i < 3; ++i) CHECK(s.weights(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));
        CHECK(s.method == OracleMethod::projected_ascent);
    }
    SUBCASE("[1..5], c=0.5 matches the closed form within 1e-4") {
        const LossVector l = vec({1, 2, 3, 4, 5});
        const OracleSolution a = solve_inner_max_ascent(l, KlBudget(0.5), 0.01, 20000);
        const OracleSolution b = solve_inner_max_closed_form(l, KlBudget(0.5));
        CHECK(std::abs(a.objective - b.objective) < 1e-4);
        CHECK(a.kl <= 0.5 + 1e-8);
        CHECK(on_simplex(a.weights));
    }
    SUBCASE("constant losses: objective equals the constant") {
        const OracleSolution s = solve_inner_max_ascent(vec({2.5, 2.5, 2.5, 2.5}), KlBudget(0.4), 0.05, 200);
        CHECK(s.objective == doctest::Approx(2.5).epsilon(1e-14));
        CHECK(s.kl <= 0.4 + 1e-8);
    }
    SUBCASE("budget beyond log N reaches the point mass") {
        const OracleSolution s = solve_inner_max_ascent(vec({1, 3, 2}), KlBudget(10.0), 0.1, 2000);
        CHECK(s.objective == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(s.regime == Regime::point_mass);
    }
    SUBCASE("deterministic") {
        const LossVector l = vec({0.2, 0.9, 0.4, 1.3, 0.1, 0.7});
        const OracleSolution a = solve_inner_max_ascent(l, KlBudget(0.3), 0.02, 3000);
        const OracleSolution b = solve_inner_max_ascent(l, KlBudget(0.3), 0.02, 3000);
        CHECK((a.weights.array() == b.weights.array()).all());
    }
    SUBCASE("argument errors") {
        CHECK_THROWS_AS(solve_inner_max_ascent(vec({1, 2}), KlBudget(0.1), 0.0, 10), std::invalid_argument);
        CHECK_THROWS_AS(solve_inner_max_ascent(vec({1, 2}), KlBudget(0.1), 0.1, 0), std::invalid_argument);
    }
}

TEST_CASE("temperature for budget") {
    SUBCASE("[1,2,3], c=0.2 is self-consistent") {
        const LossVector l = vec({1, 2, 3});
        const TemperatureSolution t = temperature_for_budget(l, KlBudget(0.2));
        CHECK(t.regime == Regime::interior);
        CHECK(std::abs(empirical_kl(is_weights(l, t.temperature)) - 0.2) < 1e-10);
        CHECK(std::abs(t.kl - 0.2) < 1e-10);
    }
    SUBCASE("tiny budget is flagged uniform at the upper cap") {
        const TemperatureSolution t = temperature_for_budget(vec({1, 2, 3}), KlBudget(1e-20));
        CHECK(t.regime == Regime::uniform);
        CHECK(t.temperature.value() == kMaxTemperature);
    }
    SUBCASE("budget near log N is flagged point mass at the lower cap") {
        const TemperatureSolution t = temperature_for_budget(vec({1, 2, 3}), KlBudget(std::log(3.0)));
        CHECK(t.regime == Regime::point_mass);
        CHECK(t.temperature.value() == kMinTemperature);
        const TemperatureSolution over = temperature_for_budget(vec({1, 2, 3}), KlBudget(7.0));
        CHECK(over.regime == Regime::point_mass);
    }
    SUBCASE("constant losses cannot reach a positive budget") {
        CHECK_THROWS_AS(temperature_for_budget(vec({4, 4, 4}), KlBudget(0.1)), DegenerateInput);
    }
    SUBCASE("random instances across scales") {
        oracle::Rng rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const auto n = oracle::uniform_int(rng, 2, 40);
            const LossVector l = oracle::random_vector(rng, n, 0.0, oracle::uniform(rng, 0.1, 20.0));
            const double c = oracle::uniform(rng, 0.02, 0.9) * std::log(static_cast<double>(n));
            const TemperatureSolution t = temperature_for_budget(l, KlBudget(c));
            if (t.regime != Regime::interior) continue;
            CHECK(std::abs(t.kl - c) < 1e-10);
        }
    }
}

TEST_CASE("closed form") {
    CHECK(solve_inner_max_closed_form(vec({1, 2, 3}), KlBudget(0.0)).objective == doctest::Approx(2.0));
    CHECK(solve_inner_max_closed_form(vec({5, 5}), KlBudget(0.3)).objective == doctest::Approx(5.0));
    const OracleSolution s = solve_inner_max_closed_form(vec({1, 2, 3}), KlBudget(0.2));
    CHECK(s.method == OracleMethod::bisection);
    CHECK(on_simplex(s.weights));
    CHECK(std::abs(s.kl - 0.2) < 1e-10);
}

TEST_CASE("property: closed form certifies against the grid") {
    oracle::Rng rng(2024);
    const int resolution = 200;
    for (int trial = 0; trial < 60; ++trial) {
        const auto n = oracle::uniform_int(rng, 2, 4);
        const LossVector l = oracle::random_vector(rng, n, 0.0, 3.0);
        const double c = oracle::uniform(rng, 0.05, 0.95) * std::log(static_cast<double>(n));
        const TemperatureSolution t = temperature_for_budget(l, KlBudget(c));
        REQUIRE(t.regime == Regime::interior);
        const WeightVector w = is_weights(l, t.temperature);
        const OracleSolution grid = solve_inner_max_grid(l, KlBudget(c), resolution);
        CAPTURE(trial);
        CHECK(l.dot(w) >= grid.objective - 2.0 / resolution * oracle::spread(l));
        CHECK(std::abs(empirical_kl(w) - c) < 1e-8);
    }
}

TEST_CASE("property: oracles agree on small problems") {
    // Grid error is first order in the spacing, so finer grids for smaller N.
    const int resolution_for[] = {0, 0, 20000, 3000, 600};
    oracle::Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = oracle::uniform_int(rng, 2, 4);
        const LossVector l = oracle::random_vector(rng, n, 0.0, 2.0);
        const double c = oracle::uniform(rng, 0.05, 0.9) * std::log(static_cast<double>(n));
        const OracleSolution g = solve_inner_max_grid(l, KlBudget(c), resolution_for[n]);
        const OracleSolution a = solve_inner_max_ascent(l, KlBudget(c), 0.01, 5000);
        const OracleSolution b = solve_inner_max_closed_form(l, KlBudget(c));
        CAPTURE(trial);
        CHECK(std::abs(g.objective - b.objective) < 1e-3);
        CHECK(std::abs(a.objective - b.objective) < 1e-3);
        CHECK(std::abs(g.objective - a.objective) < 1e-3);
    }
}

TEST_CASE("property: Lagrangian value identity") {
    oracle::Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = oracle::uniform_int(rng, 1, 30);
        const LossVector l = oracle::random_vector(rng, n, -3.0, 3.0);
        const double t = oracle::uniform(rng, 0.1, 4.0);
        const WeightVector w = is_weights(l, Temperature(t));
        double entropy_term = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (w(i) > 0) entropy_term += w(i) * std::log(w(i));
        const double log_n = std::log(static_cast<double>(n));
        const double lhs = l.dot(w) - t * entropy_term - t * log_n;
        const double rhs = is_loss(l, Temperature(t)) - t * log_n;
        CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("simplex projection") {
    const Eigen::VectorXd p = project_to_simplex(vec({0.5, 0.5, 0.5}));
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(p(i) == doctest::Approx(1.0 / 3));
    const Eigen::VectorXd q = project_to_simplex(vec({2, 0, -1}));
    CHECK(q(0) == 1.0);
    CHECK(q(1) == 0.0);
    CHECK(q(2) == 0.0);
    oracle::Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::VectorXd v = oracle::random_vector(rng, 6, -2, 2);
        const Eigen::VectorXd x = project_to_simplex(v);
        CHECK(on_simplex(x));
        // optimality: (v - x) . (y - x) <= 0 for vertices y
        for (Eigen::Index j = 0; j < 6; ++j) {
            Eigen::VectorXd y = Eigen::VectorXd::Zero(6);
            y(j) = 1;
            CHECK((v - x).dot(y - x) <= 1e-12);
        }
    }
}

TEST_CASE("names") {
    CHECK(to_string(OracleMethod::projected_ascent) == "projected-ascent");
    CHECK(to_string(Regime::point_mass) == "point-mass");
}
