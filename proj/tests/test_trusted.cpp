#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "bilbo/trusted.hpp"

using namespace bilbo;

namespace {

Grid toy_grid(std::size_t m) { return Grid({Bounds{}}, {Bounds{}}, m); }

GPPosterior make_posterior(Eigen::VectorXd mean, Eigen::VectorXd std)
{
    return GPPosterior{std::move(mean), std::move(std)};
}

std::vector<GPPosterior> random_posteriors(std::size_t nfn, std::size_t n, std::mt19937_64& rng, double sd_scale = 0.3)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<GPPosterior> out;
    for (std::size_t f = 0; f < nfn; ++f) {
        Eigen::VectorXd mu(static_cast<Eigen::Index>(n)), sd(static_cast<Eigen::Index>(n));
        for (auto& v : mu)
            v = normal(rng);
        for (auto& v : sd)
            v = sd_scale * unit(rng);
        out.push_back(make_posterior(mu, sd));
    }
    return out;
}

bool subset(const Mask& a, const Mask& b)
{
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i])
            return false;
    return true;
}

}  // namespace

TEST_SUITE("trusted") {

TEST_CASE("beta formula")
{
    CHECK(beta(1, 0.1, 2, 100, 100) == doctest::Approx(25.4075458960018382).epsilon(1e-13));
    for (std::size_t t : {1u, 3u, 17u, 250u})
        CHECK(beta(2 * t, 0.05, 2, 100, 100) - beta(t, 0.05, 2, 100, 100)
              == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));
    CHECK(beta(1, std::nextafter(1.0, 0.0), 1, 1, 2) > 0.0);
    for (std::size_t t = 1; t < 500; ++t)
        CHECK(beta(t + 1, 0.05, 8, 81, 729) > beta(t, 0.05, 8, 81, 729));
    CHECK_THROWS(beta(1, 0.0, 2, 10, 10));
    CHECK_THROWS(beta(1, 1.0, 2, 10, 10));
    CHECK_THROWS(beta(0, 0.1, 2, 10, 10));
    CHECK_THROWS(beta(1, 0.1, 0, 10, 10));
}

TEST_CASE("confidence bounds")
{
    const Eigen::VectorXd mu = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
    const std::vector<GPPosterior> zero{make_posterior(mu, Eigen::VectorXd::Zero(6))};
    const ConfidenceField a = confidence_bounds(zero, 9.0);
    CHECK(a.upper[0] == mu);
    CHECK(a.lower[0] == mu);

    const std::vector<GPPosterior> unit{make_posterior(Eigen::VectorXd::Zero(6), Eigen::VectorXd::Ones(6))};
    const ConfidenceField b = confidence_bounds(unit, 0.0);
    CHECK(b.upper[0] == Eigen::VectorXd::Zero(6));
    const ConfidenceField c = confidence_bounds(unit, 4.0);
    CHECK((c.upper[0].array() == 2.0).all());
    CHECK((c.lower[0].array() == -2.0).all());
    CHECK(c.width(0, 3) == 4.0);
    CHECK_THROWS(confidence_bounds(unit, -1.0));
}

TEST_CASE("confidence field invariants")
{
    std::mt19937_64 rng(3);
    const auto post = random_posteriors(4, 50, rng);
    const ConfidenceField f = confidence_bounds(post, 7.3);
    for (std::size_t h = 0; h < 4; ++h) {
        for (Eigen::Index i = 0; i < 50; ++i) {
            const auto p = static_cast<std::size_t>(i);
            CHECK(f.width(h, p) == doctest::Approx(2.0 * std::sqrt(7.3) * post[h].std[i]));
            CHECK(f.width(h, p) >= 0.0);
            CHECK(std::abs(0.5 * (f.upper[h][i] + f.lower[h][i]) - post[h].mean[i]) < 1e-9);
        }
    }
}

TEST_CASE("feasible sets")
{
    const Grid g = toy_grid(4);
    std::mt19937_64 rng(5);
    auto none = random_posteriors(2, g.size(), rng);
    const FeasibleSets all = feasible_sets(confidence_bounds(none, 1.0), FunctionLayout(0, 0));
    CHECK(count(all.s_plus) == g.size());
    CHECK(count(all.s_plus_lo) == g.size());

    auto post = random_posteriors(3, g.size(), rng);
    post[2] = make_posterior(Eigen::VectorXd::Constant(16, -1.0), Eigen::VectorXd::Constant(16, 0.1));
    CHECK(count(feasible_sets(confidence_bounds(post, 1.0), FunctionLayout(1, 0)).s_plus) == 0);

    // constraint upper bound nonnegative on exactly the first two x slices
    Eigen::VectorXd mu(16);
    for (int i = 0; i < 16; ++i)
        mu[i] = i < 8 ? 0.5 : -0.5;
    post[2] = make_posterior(mu, Eigen::VectorXd::Constant(16, 0.1));
    const FeasibleSets half = feasible_sets(confidence_bounds(post, 1.0), FunctionLayout(1, 0));
    CHECK(count(half.s_plus) == 8);
    CHECK(count(half.s_plus_lo) == 16);
    const FeasibleSets lo = feasible_sets(confidence_bounds(post, 1.0), FunctionLayout(0, 1));
    CHECK(count(lo.s_plus_lo) == 8);
    CHECK(lo.s_plus == lo.s_plus_lo);

    // boundary: u_c exactly 0 counts as feasible
    post[2] = make_posterior(Eigen::VectorXd::Constant(16, -1.0), Eigen::VectorXd::Constant(16, 1.0));
    CHECK(count(feasible_sets(confidence_bounds(post, 1.0), FunctionLayout(1, 0)).s_plus) == 16);
}

TEST_CASE("lower solution estimates")
{
    const Grid g = toy_grid(5);
    const Mask all(g.size(), true);
    std::vector<GPPosterior> post(2, make_posterior(Eigen::VectorXd::Zero(25), Eigen::VectorXd::Zero(25)));
    auto zb = lower_solution_estimates(confidence_bounds(post, 1.0), all, g);
    for (const auto& z : zb)
        CHECK(z == std::optional<std::size_t>(0));

    Mask partial = all;
    partial[g.linear({2, 0})] = false;
    partial[g.linear({2, 1})] = false;
    for (std::size_t z = 0; z < 5; ++z)
        partial[g.linear({4, z})] = false;
    zb = lower_solution_estimates(confidence_bounds(post, 1.0), partial, g);
    CHECK(zb[2] == std::optional<std::size_t>(2));
    CHECK_FALSE(zb[4].has_value());

    Eigen::VectorXd inc(25);
    for (std::size_t i = 0; i < 25; ++i)
        inc[static_cast<Eigen::Index>(i)] = static_cast<double>(g.split(i).z);
    post[1] = make_posterior(inc, Eigen::VectorXd::Zero(25));
    zb = lower_solution_estimates(confidence_bounds(post, 1.0), all, g);
    for (const auto& z : zb)
        CHECK(z == std::optional<std::size_t>(4));
}

TEST_CASE("lower solution estimates match a scan")
{
    const Grid g = toy_grid(5);
    std::mt19937_64 rng(7);
    std::bernoulli_distribution keep(0.7);
    for (int trial = 0; trial < 50; ++trial) {
        const auto post = random_posteriors(2, g.size(), rng);
        const ConfidenceField field = confidence_bounds(post, 2.0);
        Mask m(g.size());
        for (std::size_t i = 0; i < m.size(); ++i)
            m[i] = keep(rng);
        const auto zb = lower_solution_estimates(field, m, g);
        for (std::size_t x = 0; x < 5; ++x) {
            std::optional<std::size_t> best;
            for (std::size_t z = 0; z < 5; ++z) {
                const std::size_t i = x * 5 + z;
                if (m[i] && (!best || field.upper[1][static_cast<Eigen::Index>(i)]
                                          > field.upper[1][static_cast<Eigen::Index>(x * 5 + *best)]))
                    best = z;
            }
            CHECK(zb[x] == best);
        }
    }
}

TEST_CASE("optimal lower set")
{
    const Grid g = toy_grid(5);
    std::mt19937_64 rng(9);
    const Mask all(g.size(), true);

    // exact knowledge keeps exactly the slice argmax set
    auto post = random_posteriors(2, g.size(), rng, 0.0);
    post[1].mean[g.linear({1, 3})] = post[1].mean.segment(5, 5).maxCoeff();
    const ConfidenceField exact = confidence_bounds(post, 4.0);
    const auto zb = lower_solution_estimates(exact, all, g);
    const Mask p = optimal_lower_set(exact, all, zb, g, 0.0, LowerSetVariant::PPlus);
    for (std::size_t x = 0; x < 5; ++x) {
        const double top = post[1].mean.segment(static_cast<Eigen::Index>(x * 5), 5).maxCoeff();
        for (std::size_t z = 0; z < 5; ++z)
            CHECK(p[x * 5 + z] == (post[1].mean[static_cast<Eigen::Index>(x * 5 + z)] == top));
    }

    const auto noisy = confidence_bounds(random_posteriors(2, g.size(), rng), 1.0);
    const auto zb2 = lower_solution_estimates(noisy, all, g);
    CHECK(optimal_lower_set(noisy, all, zb2, g, 1e300, LowerSetVariant::PPlus) == all);
    const Mask bar = optimal_lower_set(noisy, all, zb2, g, 0.0, LowerSetVariant::PBar);
    CHECK(count(bar) == 5);
    for (std::size_t x = 0; x < 5; ++x)
        CHECK(bar[x * 5 + *zb2[x]]);
    CHECK_THROWS(optimal_lower_set(noisy, all, zb2, g, -0.1, LowerSetVariant::PPlus));
}

TEST_CASE("trusted set invariants on random fields")
{
    const Grid g({Bounds{}}, {Bounds{}, Bounds{}}, 4);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> shift(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const FunctionLayout layout(trial % 3, (trial / 3) % 3);
        auto post = random_posteriors(layout.size(), g.size(), rng, 0.5);
        for (std::size_t c = 2; c < layout.size(); ++c)
            post[c].mean.array() += 0.8;
        const ConfidenceField field = confidence_bounds(post, 1.5);
        const TrustedSets s = build_trusted_sets(field, layout, g, 0.0, LowerSetVariant::PPlus);
        CHECK(subset(s.s_plus, s.s_plus_lo));
        if (layout.n_upper_constraints() == 0)
            CHECK(s.s_plus == s.s_plus_lo);
        CHECK(subset(s.p_plus, s.s_plus_lo));
        for (std::size_t x = 0; x < g.num_x(); ++x) {
            if (s.z_bar[x])
                CHECK(s.p_plus[g.linear({x, *s.z_bar[x]})]);
        }

        Mask previous = s.p_plus;
        for (double eps : {0.01, 0.1, 0.5, 2.0}) {
            const Mask wider = build_trusted_sets(field, layout, g, eps, LowerSetVariant::PPlus).p_plus;
            CHECK(subset(previous, wider));
            previous = wider;
        }
        const TrustedSets bar = build_trusted_sets(field, layout, g, 0.0, LowerSetVariant::PBar);
        CHECK(subset(bar.p_plus, s.p_plus));
    }
}

TEST_CASE("mask helpers")
{
    const Mask a{true, false, true, true}, b{true, true, false, true};
    CHECK(count(a) == 3);
    CHECK(intersect(a, b) == Mask{true, false, false, true});
    CHECK_THROWS(intersect(a, Mask{true}));
}

}
