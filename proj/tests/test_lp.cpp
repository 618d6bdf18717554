#include <doctest.h>

#include "sharedctl/errors.hpp"
#include "sharedctl/lp.hpp"
#include "support/tableau_oracle.hpp"

#include <random>
#include <sstream>

using namespace sharedctl;

TEST_CASE("single bounded variable") {
    LinearProgram lp;
    lp.set_sense(Sense::Maximize);
    auto x = lp.add_variable(0, kInf, 1.0, "x");
    lp.add_row({{x, 1.0}}, Relation::LessEqual, 3.0);
    auto out = solve(lp);
    CHECK(out.status == LpStatus::Optimal);
    CHECK(out.values[x] == doctest::Approx(3.0));
    CHECK(out.objective == doctest::Approx(3.0));
    CHECK(out.dual_bound == doctest::Approx(3.0));
}

TEST_CASE("contradictory rows are infeasible") {
    LinearProgram lp;
    auto x = lp.add_variable();
    auto y = lp.add_variable();
    lp.add_row({{x, 1}, {y, 1}}, Relation::Equal, 1.0);
    lp.add_row({{x, 1}}, Relation::GreaterEqual, 2.0);
    CHECK(solve(lp).status == LpStatus::Infeasible);
    CHECK(check_feasible(lp).status == LpStatus::Infeasible);
}

TEST_CASE("empty constraint set is feasible at zero") {
    LinearProgram lp;
    lp.add_variable();
    lp.add_variable(0, 5);
    auto out = check_feasible(lp);
    CHECK(out.status == LpStatus::Feasible);
    CHECK(out.values == std::vector<double>{0.0, 0.0});
}

TEST_CASE("unbounded ray is reported") {
    LinearProgram lp;
    lp.set_sense(Sense::Maximize);
    auto x = lp.add_variable(0, kInf, 1.0);
    auto y = lp.add_variable(0, kInf, 0.0);
    lp.add_row({{x, 1}, {y, -1}}, Relation::LessEqual, 1.0);
    CHECK(solve(lp).status == LpStatus::Unbounded);
}

TEST_CASE("free variables and equality rows") {
    LinearProgram lp;
    auto x = lp.add_variable(-kInf, kInf, 1.0);
    auto y = lp.add_variable(-kInf, kInf, 2.0);
    lp.add_row({{x, 1}, {y, 1}}, Relation::Equal, 4.0);
    lp.add_row({{x, 1}, {y, -1}}, Relation::Equal, 2.0);
    auto out = solve(lp);
    REQUIRE(out.status == LpStatus::Optimal);
    CHECK(out.values[x] == doctest::Approx(3.0));
    CHECK(out.values[y] == doctest::Approx(1.0));
}

TEST_CASE("fixed and empty columns are presolved away") {
    LinearProgram lp;
    lp.set_sense(Sense::Maximize);
    auto x = lp.add_variable(0, 10, 1.0);
    auto fixed = lp.add_variable(2, 2, 0.0);
    auto lonely = lp.add_variable(-1, 4, 3.0);
    lp.add_row({{x, 1}, {fixed, 1}}, Relation::LessEqual, 5.0);
    auto out = solve(lp);
    REQUIRE(out.status == LpStatus::Optimal);
    CHECK(out.values[x] == doctest::Approx(3.0));
    CHECK(out.values[fixed] == 2.0);
    CHECK(out.values[lonely] == 4.0);
    CHECK(out.objective == doctest::Approx(15.0));
}

TEST_CASE("malformed programs are rejected") {
    LinearProgram lp;
    lp.add_variable();
    lp.add_row({{3, 1.0}}, Relation::LessEqual, 1.0);
    CHECK_THROWS_AS(solve(lp), DomainError);
    LinearProgram nan_rhs;
    auto v = nan_rhs.add_variable();
    nan_rhs.add_row({{v, 1.0}}, Relation::LessEqual, std::nan(""));
    CHECK_THROWS_AS(solve(nan_rhs), DomainError);
}

TEST_CASE("Beale's cycling example terminates") {
    // Classic LP that cycles under the textbook largest-coefficient rule.
    LinearProgram lp;
    auto x4 = lp.add_variable(0, kInf, -0.75);
    auto x5 = lp.add_variable(0, kInf, 150);
    auto x6 = lp.add_variable(0, kInf, -0.02);
    auto x7 = lp.add_variable(0, kInf, 6);
    lp.add_row({{x4, 0.25}, {x5, -60}, {x6, -0.04}, {x7, 9}}, Relation::LessEqual, 0);
    lp.add_row({{x4, 0.5}, {x5, -90}, {x6, -0.02}, {x7, 3}}, Relation::LessEqual, 0);
    lp.add_row({{x6, 1}}, Relation::LessEqual, 1);
    auto out = solve(lp);
    REQUIRE(out.status == LpStatus::Optimal);
    CHECK(out.objective == doctest::Approx(-0.05));
}

namespace {

LinearProgram random_feasible_lp(std::mt19937_64& rng, int max_dim = 8) {
    std::uniform_int_distribution<int> dim(1, max_dim);
    std::uniform_real_distribution<double> coef(-5, 5), unit(0, 1);
    LinearProgram lp;
    const int n = dim(rng), m = dim(rng);
    std::vector<double> x0(n);
    for (int j = 0; j < n; ++j) {
        const double lo = unit(rng) < 0.3 ? -coef(rng) * 0.5 - 1 : 0.0;
        const double hi = lo + 0.5 + 5 * unit(rng);
        lp.add_variable(lo, hi, coef(rng));
        x0[j] = lo + (hi - lo) * unit(rng);
    }
    for (int i = 0; i < m; ++i) {
        std::vector<Term> terms;
        double act = 0;
        for (int j = 0; j < n; ++j) {
            if (unit(rng) < 0.35) continue;
            const double a = unit(rng) < 0.2 ? std::round(coef(rng)) : coef(rng);
            terms.push_back({static_cast<std::size_t>(j), a});
            act += a * x0[j];
        }
        const double pick = unit(rng);
        if (pick < 0.2) lp.add_row(terms, Relation::Equal, act);
        else if (pick < 0.6) lp.add_row(terms, Relation::LessEqual, act + (unit(rng) < 0.3 ? 0.0 : unit(rng)));
        else lp.add_row(terms, Relation::GreaterEqual, act - (unit(rng) < 0.3 ? 0.0 : unit(rng)));
    }
    lp.set_sense(unit(rng) < 0.5 ? Sense::Minimize : Sense::Maximize);
    return lp;
}

} // namespace

TEST_CASE("random bounded feasible programs agree with the dense tableau oracle") {
    std::mt19937_64 rng(20240611);
    for (int k = 0; k < 100; ++k) {
        CAPTURE(k);
        const auto lp = random_feasible_lp(rng);
        const auto out = solve(lp);
        const auto ref = oracle::solve_dense(lp);
        REQUIRE(ref.status == LpStatus::Optimal);
        REQUIRE(out.status == LpStatus::Optimal);
        CHECK(max_violation(lp, out.values) <= 1e-7);
        CHECK(out.objective == doctest::Approx(ref.objective).epsilon(1e-6));
        CHECK(std::abs(out.objective - out.dual_bound) <= 1e-6 * (1 + std::abs(out.objective)));
        for (std::size_t j = 0; j < lp.num_variables(); ++j) {
            CHECK(out.values[j] >= lp.variable(j).lower - 1e-9);
            CHECK(out.values[j] <= lp.variable(j).upper + 1e-9);
        }
        CHECK(check_feasible(lp).status == LpStatus::Feasible);
    }
}

TEST_CASE("larger programs exercise refactorization and the eta file") {
    std::mt19937_64 rng(31337);
    LpOptions opt;
    opt.refactor_interval = 7;
    for (int k = 0; k < 10; ++k) {
        CAPTURE(k);
        const auto lp = random_feasible_lp(rng, 60);
        const auto out = solve(lp, opt);
        const auto ref = oracle::solve_dense(lp);
        REQUIRE(out.status == LpStatus::Optimal);
        CHECK(max_violation(lp, out.values) <= 1e-7);
        CHECK(out.objective == doctest::Approx(ref.objective).epsilon(1e-6));
    }
}

TEST_CASE("warm start from the optimal basis reproduces the optimum") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) {
        const auto lp = random_feasible_lp(rng);
        const auto cold = solve(lp);
        REQUIRE(cold.status == LpStatus::Optimal);
        LpOptions opt;
        opt.warm_start = &cold.basis;
        const auto warm = solve(lp, opt);
        REQUIRE(warm.status == LpStatus::Optimal);
        CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-9));
        CHECK(warm.iterations <= 1);
    }
}

TEST_CASE("identical input gives identical output") {
    std::mt19937_64 rng(99);
    const auto lp = random_feasible_lp(rng);
    const auto a = solve(lp), b = solve(lp);
    CHECK(a.values == b.values);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("write_lp emits the section headers") {
    LinearProgram lp;
    auto x = lp.add_variable(0, 1, 2.0, "x");
    auto y = lp.add_variable(-kInf, kInf, 0.0, "y");
    lp.add_row({{x, 1}, {y, -1}}, Relation::GreaterEqual, 0.5, "r");
    std::ostringstream os;
    write_lp(lp, os);
    const auto text = os.str();
    CHECK(text.find("Minimize") != std::string::npos);
    CHECK(text.find(" r: 1 x - 1 y >= 0.5") != std::string::npos);
    CHECK(text.find("y free") != std::string::npos);
    CHECK(text.find("End") != std::string::npos);
}
