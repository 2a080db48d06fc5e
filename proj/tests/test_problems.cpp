#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "bilbo/grid.hpp"
#include "bilbo/oracle.hpp"
#include "bilbo/problems.hpp"

using namespace bilbo;

namespace {

double eval(const BilevelProblem& p, FunctionId fn, std::vector<double> x, std::vector<double> z)
{
    return p.evaluate_raw(fn, x, z);
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("function layout and ids")
{
    const FunctionLayout layout(3, 2);
    CHECK(layout.size() == 7);
    CHECK(layout.index(FunctionId::upper_objective()) == 0);
    CHECK(layout.index(FunctionId::lower_objective()) == 1);
    CHECK(layout.index(FunctionId::upper_constraint(2)) == 4);
    CHECK(layout.index(FunctionId::lower_constraint(0)) == 5);
    CHECK_THROWS(layout.index(FunctionId::lower_constraint(2)));
    for (std::size_t i = 0; i < layout.size(); ++i) {
        CHECK(layout.index(layout.id(i)) == i);
        CHECK(parse_function_id(to_string(layout.id(i))) == layout.id(i));
    }
    CHECK_FALSE(parse_function_id("cx1").has_value());
    CHECK_FALSE(parse_function_id("cu").has_value());
}

TEST_CASE("branin goldstein shape")
{
    const BilevelProblem p = make_branin_goldstein();
    CHECK(p.dim_x() == 1);
    CHECK(p.dim_z() == 1);
    CHECK(p.layout().n_upper_constraints() == 0);
    CHECK(p.layout().n_lower_constraints() == 0);
    CHECK(make_problem("BraninHoo+GoldsteinPrice").name() == "branin_goldstein");
}

TEST_CASE("branin goldstein reference values")
{
    // maximisation form: negated rescaled benchmarks, evaluated in extended precision
    const BilevelProblem p = make_branin_goldstein();
    CHECK(eval(p, FunctionId::upper_objective(), {0.5}, {0.25})
          == doctest::Approx(0.994293812319230427).epsilon(1e-13));
    CHECK(eval(p, FunctionId::lower_objective(), {0.5}, {0.25})
          == doctest::Approx(3.12912555061058521).epsilon(1e-13));
}

TEST_CASE("branin second implementation")
{
    // textbook Branin with a=1, b=5.1/(4 pi^2), c=5/pi, r=6, s=10, t=1/(8 pi) on [-5,10]x[0,15]
    using std::numbers::pi;
    auto branin = [](double x1, double x2) {
        const double b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, t = 1.0 / (8.0 * pi);
        return std::pow(x2 - b * x1 * x1 + c * x1 - 6.0, 2) + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
    };
    const BilevelProblem p = make_branin_goldstein();
    for (double u : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        for (double v : {0.0, 0.25, 0.6, 1.0}) {
            const double expected = -(branin(15.0 * u - 5.0, 15.0 * v) - 54.81) / 51.95;
            CHECK(eval(p, FunctionId::upper_objective(), {u}, {v}) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("smd shapes")
{
    for (int v : {2, 6, 12}) {
        const BilevelProblem p = make_smd(v);
        CHECK(p.dim_x() == 2);
        CHECK(p.dim_z() == 3);
    }
    CHECK(make_smd(12).layout().n_upper_constraints() == 3);
    CHECK(make_smd(12).layout().n_lower_constraints() == 3);
    CHECK(make_smd(2).layout().n_constraints() == 0);
    CHECK(make_smd(6).layout().n_constraints() == 0);
    CHECK_THROWS(make_smd(3));
    CHECK_THROWS(make_problem("smd7"));
}

TEST_CASE("smd substitutions map endpoints onto the original ranges")
{
    for (int v : {2, 6, 12}) {
        const auto ranges = smd::original_ranges(v);
        const std::vector<double> x0{0.0, 0.0}, z0{0.0, 0.0, 0.0}, x1{1.0, 1.0}, z1{1.0, 1.0, 1.0};
        const auto lo = smd::to_original(v, x0, z0);
        const auto hi = smd::to_original(v, x1, z1);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(lo[i] == doctest::Approx(ranges[i].lo));
            CHECK(hi[i] == doctest::Approx(ranges[i].hi));
        }
    }
    const auto r2 = smd::original_ranges(2);
    CHECK(r2[0].lo == -1.0);
    CHECK(r2[1].lo == -5.0);
    CHECK(r2[4].hi == doctest::Approx(std::numbers::e));
    const auto r12 = smd::original_ranges(12);
    CHECK(r12[0].hi == 10.0);
    CHECK(r12[4].lo == doctest::Approx(-std::numbers::pi / 2.0));
}

TEST_CASE("smd2 log term cancels")
{
    // x_u1 = 0, x_u2 = 0, x_l1 = 0, x_l2 = 1: every component vanishes
    const BilevelProblem p = make_smd(2);
    const std::vector<double> x{1.0 / 3.0, 5.0 / 6.0};
    const std::vector<double> z{1.0 / 3.0, 1.0 / 3.0, 1.0 / std::numbers::e};
    CHECK(std::abs(eval(p, FunctionId::lower_objective(), x, z)) < 1e-12);
    CHECK(std::abs(eval(p, FunctionId::upper_objective(), x, z)) < 1e-12);
}

TEST_CASE("smd2 optimum against the grid oracle")
{
    const BilevelProblem p = make_smd(2);
    const Grid g(p.x_bounds(), p.z_bounds(), 7);
    const GroundTruth gt = solve_ground_truth(p, g, p.tie_tolerance());
    const std::vector<double> x{1.0 / 3.0, 5.0 / 6.0};
    const std::vector<double> z{1.0 / 3.0, 1.0 / 3.0, 1.0 / std::numbers::e};
    CHECK(gt.best_value <= eval(p, FunctionId::upper_objective(), x, z) + 1e-12);
    const auto [bx, bz] = g.coordinates(gt.best);
    CHECK(bx[0] == doctest::Approx(1.0 / 3.0));
    CHECK(bx[1] == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("smd6 hand evaluation at the all-zeros point")
{
    // every original variable is -1: F = -(1 + 1 + 1 - 0), f = -(1/3 + 0 + 0)
    const BilevelProblem p = make_smd(6);
    const std::vector<double> x{0.0, 0.0}, z{0.0, 0.0, 0.0};
    CHECK(eval(p, FunctionId::upper_objective(), x, z) == doctest::Approx(-3.0));
    CHECK(eval(p, FunctionId::lower_objective(), x, z) == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("smd12 spot check")
{
    const BilevelProblem p = make_smd(12);
    const std::vector<double> x{0.2, 0.9}, z{0.1, 0.6, 0.3};
    const double u1 = -5.0 + 15.0 * 0.2, u2 = -1.0 + 2.0 * 0.9;
    const double a = -5.0 + 15.0 * 0.1, b = -5.0 + 15.0 * 0.6;
    const double l2 = -std::numbers::pi / 2.0 + std::numbers::pi * 0.3;
    const double th = std::tanh(l2);
    CHECK(eval(p, FunctionId::upper_constraint(0), x, z) == doctest::Approx(u2 - th - 1.0));
    CHECK(eval(p, FunctionId::lower_constraint(0), x, z) == doctest::Approx(a - b * b * b));
    CHECK(eval(p, FunctionId::lower_constraint(1), x, z) == doctest::Approx(b - a * a * a));
    const double f = -(u1 * u1 + 0.5 * ((a - 2) * (a - 2) + (b - 2) * (b - 2)) + (u2 - th) * (u2 - th));
    CHECK(eval(p, FunctionId::lower_objective(), x, z) == doctest::Approx(f));
}

TEST_CASE("smd12 edited upper constraint is active at the optimum")
{
    const BilevelProblem p = make_smd(12);
    const Grid g(p.x_bounds(), p.z_bounds(), 9);
    const GroundTruth gt = solve_ground_truth(p, g, p.tie_tolerance());
    const auto [x, z] = g.coordinates(gt.best);
    const double c = p.evaluate_raw(FunctionId::upper_constraint(0), {x.data(), 2}, {z.data(), 3});
    CHECK(c >= 0.0);
    CHECK(c <= 2.0 / 8.0);
}

TEST_CASE("evaluation is pure")
{
    const BilevelProblem p = make_smd(12);
    const std::vector<double> x{0.4, 0.3}, z{0.7, 0.2, 0.9};
    for (FunctionId id : p.functions())
        CHECK(eval(p, id, x, z) == eval(p, id, x, z));
}

TEST_CASE("domain and id checks")
{
    const BilevelProblem p = make_branin_goldstein();
    CHECK_THROWS(eval(p, FunctionId::upper_objective(), {1.5}, {0.0}));
    CHECK_THROWS(eval(p, FunctionId::upper_objective(), {0.5, 0.5}, {0.0}));
    CHECK_THROWS(eval(p, FunctionId::upper_constraint(0), {0.5}, {0.5}));
}

TEST_CASE("observation noise")
{
    const BilevelProblem p = make_branin_goldstein();
    const std::vector<double> x{0.3}, z{0.6};
    const double clean = eval(p, FunctionId::lower_objective(), x, z);

    std::mt19937_64 a(42), b(42);
    CHECK(p.observe(FunctionId::lower_objective(), x, z, a) == p.observe(FunctionId::lower_objective(), x, z, b));

    const BilevelProblem silent = p.with_noise_std(0.0);
    std::mt19937_64 rng(1);
    CHECK(silent.observe(FunctionId::lower_objective(), x, z, rng) == clean);

    double sum = 0.0, sum2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double e = p.observe(FunctionId::lower_objective(), x, z, rng) - clean;
        sum += e;
        sum2 += e * e;
    }
    const double sd = std::sqrt((sum2 - sum * sum / n) / (n - 1));
    CHECK(sd >= 0.0095);
    CHECK(sd <= 0.0105);
}

TEST_CASE("output maps rescale noise variance")
{
    const BilevelProblem base = make_branin_goldstein();
    const BilevelProblem p = base.with_output_maps({OutputMap{1.0, 2.0}, OutputMap{-3.0, 0.5}});
    CHECK(p.model_noise_variance(FunctionId::upper_objective()) == doctest::Approx(1e-4 / 4.0));
    CHECK(p.model_noise_variance(FunctionId::lower_objective()) == doctest::Approx(1e-4 / 0.25));
    const std::vector<double> x{0.3}, z{0.6};
    CHECK(p.evaluate(FunctionId::upper_objective(), x, z)
          == doctest::Approx((base.evaluate_raw(FunctionId::upper_objective(), x, z) - 1.0) / 2.0));
    CHECK_THROWS(base.with_output_maps({OutputMap{}}));
    CHECK_THROWS(base.with_output_maps({OutputMap{0.0, 0.0}, OutputMap{}}));
}

}
