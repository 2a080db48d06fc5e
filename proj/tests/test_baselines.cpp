#include <doctest.h>

#include <cmath>
#include <random>

#include "bilbo/baselines.hpp"
#include "bilbo/harness.hpp"

using namespace bilbo;

namespace {

Experiment small_experiment(const std::string& problem, std::size_t m)
{
    Settings s{{"problem", problem}, {"grid_m", std::to_string(m)}};
    return prepare_experiment(make_config(s));
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("trustedrand samples inside the mean-based region")
{
    const Experiment e = small_experiment("branin_goldstein", 30);
    SurrogateModels models(e.problem, e.grid, default_hyperparams(e.problem, 0.2));
    std::mt19937_64 rng(3);
    initialize_uniform(models, 3, rng);
    TrustedRand tr(models, {});
    tr.keep_regions(true);
    CHECK(count(tr.sets().s_plus) == e.grid.size());
    for (int i = 0; i < 10; ++i) {
        const std::size_t before0 = models.dataset(0).size(), before1 = models.dataset(1).size();
        const TrustedRandEntry& entry = tr.step(rng);
        CHECK(models.dataset(0).size() == before0 + 1);
        CHECK(models.dataset(1).size() == before1 + 1);
        if (!entry.fallback) {
            REQUIRE(entry.region.size() == e.grid.size());
            CHECK(entry.region[e.grid.linear(entry.query)]);
        }
    }
    CHECK(models.observations() == 2 * (3 + 10));
    CHECK(tr.history().size() == 10);
    CHECK(tr.estimate().has_value());
}

TEST_CASE("trustedrand region uses posterior means")
{
    const Experiment e = small_experiment("smd12", 4);
    SurrogateModels models(e.problem, e.grid, default_hyperparams(e.problem, 0.4));
    std::mt19937_64 rng(5);
    initialize_uniform(models, 3, rng);
    TrustedRand tr(models, {});
    const ConfidenceField mean_field = confidence_bounds(models.posteriors(), 0.0);
    const TrustedSets expected = build_trusted_sets(mean_field, e.problem.layout(), e.grid, 0.0, LowerSetVariant::PPlus);
    CHECK(tr.sets().s_plus == expected.s_plus);
    CHECK(tr.sets().p_plus == expected.p_plus);
    for (std::size_t i = 0; i < e.grid.size(); ++i) {
        bool feasible = true;
        for (std::size_t c = 2; c < 8; ++c)
            feasible = feasible && models.posterior(c).mean[static_cast<Eigen::Index>(i)] >= 0.0;
        CHECK(tr.sets().s_plus[i] == feasible);
    }
}

TEST_CASE("trustedrand is deterministic")
{
    const Experiment e = small_experiment("branin_goldstein", 20);
    auto run = [&] {
        SurrogateModels models(e.problem, e.grid, default_hyperparams(e.problem, 0.2));
        std::mt19937_64 rng(9);
        initialize_uniform(models, 3, rng);
        TrustedRand tr(models, {});
        std::vector<std::size_t> q;
        for (int i = 0; i < 8; ++i)
            q.push_back(e.grid.linear(tr.step(rng).query));
        return q;
    };
    CHECK(run() == run());
}

TEST_CASE("finite-difference ascent on a concave quadratic")
{
    const Eigen::Vector2d peak(0.37, 0.81);
    auto f = [&](const Eigen::VectorXd& z) { return -(z - peak).squaredNorm(); };
    std::mt19937_64 rng(1);
    const double h = 0.05;
    const LowerSolveResult r = fd_gradient_ascent(f, 2, 60, 2, h, rng);
    CHECK(r.evaluations == 60);
    CHECK((r.z - peak).norm() <= h);
    CHECK(r.value == doctest::Approx(f(r.z)));

    std::mt19937_64 rng2(1);
    const LowerSolveResult one = fd_gradient_ascent(f, 2, 1, 2, h, rng2);
    CHECK(one.evaluations == 1);
    CHECK((one.z.array() >= 0.0).all());
    CHECK((one.z.array() <= 1.0).all());

    CHECK_THROWS(fd_gradient_ascent(f, 2, 0, 1, h, rng));
    CHECK_THROWS(fd_gradient_ascent(f, 2, 5, 1, 0.0, rng));
}

TEST_CASE("finite-difference ascent spends the exact budget")
{
    std::mt19937_64 rng(4);
    auto flat = [](const Eigen::VectorXd&) { return 1.0; };
    for (std::size_t budget : {2u, 3u, 7u, 20u, 33u})
        for (std::size_t restarts : {1u, 2u, 5u})
            CHECK(fd_gradient_ascent(flat, 3, budget, restarts, 0.1, rng).evaluations == budget);
}

TEST_CASE("nested budget bookkeeping")
{
    const Experiment e = small_experiment("branin_goldstein", 100);
    NestedConfig cfg;
    std::mt19937_64 rng(2);
    const auto entries = nested_run(e.problem, e.grid, cfg, rng, 200);
    REQUIRE_FALSE(entries.empty());
    CHECK(entries.size() == 200 / (cfg.lower_budget + 1));
    CHECK(entries.back().queries <= 200);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(entries[i].queries == (i + 1) * (cfg.lower_budget + 1));
        CHECK(entries[i].t == (i < cfg.init_upper_points ? 0 : i - cfg.init_upper_points + 1));
        CHECK(entries[i].estimate.has_value());
    }
}

TEST_CASE("nested rejects constrained problems and is deterministic")
{
    const Experiment smd12 = small_experiment("smd12", 3);
    NestedConfig cfg;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(nested_run(smd12.problem, smd12.grid, cfg, rng, 100), std::invalid_argument);

    const Experiment e = small_experiment("branin_goldstein", 40);
    auto run = [&] {
        std::mt19937_64 r(6);
        std::vector<std::size_t> q;
        for (const auto& entry : nested_run(e.problem, e.grid, cfg, r, 150))
            q.push_back(e.grid.linear(entry.query));
        return q;
    };
    CHECK(run() == run());

    NestedConfig bad = cfg;
    bad.lower_budget = 0;
    CHECK_THROWS(bad.validate());
}

}
