#include "bilbo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bilbo {

TrustedRand::TrustedRand(SurrogateModels& models, TrustedRandConfig config) : models_(&models), config_(config)
{
    if (!(config_.epsilon >= 0.0))
        throw std::invalid_argument("epsilon must be nonnegative");
    refresh();
}

void TrustedRand::refresh()
{
    const ConfidenceField mean_field = confidence_bounds(models_->posteriors(), 0.0);
    sets_ = build_trusted_sets(mean_field, models_->layout(), models_->grid(), config_.epsilon, config_.variant);
}

const TrustedRandEntry& TrustedRand::step(std::mt19937_64& rng)
{
    const Grid& grid = models_->grid();
    Mask region = sets_.query_region();
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < region.size(); ++i) {
        if (region[i])
            members.push_back(i);
    }
    TrustedRandEntry entry;
    entry.t = t_;
    entry.fallback = members.empty();
    std::size_t chosen = 0;
    if (entry.fallback) {
        chosen = std::uniform_int_distribution<std::size_t>(0, grid.size() - 1)(rng);
    } else {
        chosen = members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng)];
        if (keep_regions_)
            entry.region = std::move(region);
    }
    entry.query = grid.split(chosen);
    for (std::size_t fn = 0; fn < models_->num_functions(); ++fn)
        models_->observe(fn, entry.query, rng);
    models_->update_all();
    history_.push_back(std::move(entry));
    ++t_;
    refresh();
    return history_.back();
}

std::optional<PointIndex> TrustedRand::estimate() const
{
    return posterior_mean_estimate(models_->posterior(FunctionLayout::upper_objective_index), sets_,
                                   models_->grid());
}

void NestedConfig::validate() const
{
    if (lower_budget == 0 || lower_restarts == 0 || init_upper_points == 0)
        throw std::invalid_argument("nested budgets must be positive");
    if (!(fd_step > 0.0))
        throw std::invalid_argument("fd_step must be positive");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("delta must lie in (0, 1)");
    if (!(lengthscale > 0.0))
        throw std::invalid_argument("lengthscale must be positive");
}

LowerSolveResult fd_gradient_ascent(const std::function<double(const Eigen::VectorXd&)>& objective, std::size_t dim,
                                    std::size_t budget, std::size_t restarts, double fd_step, std::mt19937_64& rng)
{
    if (budget == 0 || restarts == 0 || dim == 0)
        throw std::invalid_argument("budget, restarts and dimension must be positive");
    if (!(fd_step > 0.0))
        throw std::invalid_argument("fd_step must be positive");

    LowerSolveResult result;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto evaluate = [&](const Eigen::VectorXd& z) {
        const double v = objective(z);
        if (result.evaluations == 0 || v > result.value) {
            result.z = z;
            result.value = v;
        }
        ++result.evaluations;
        return v;
    };

    const std::size_t runs = std::min(restarts, budget);
    for (std::size_t r = 0; r < runs; ++r) {
        const std::size_t share = budget / runs + (r < budget % runs ? 1 : 0);
        std::size_t used = 0;
        Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
        for (auto& v : z)
            v = unit(rng);
        double fz = evaluate(z);
        ++used;
        Eigen::VectorXd direction;
        double step = 0.25;
        bool need_gradient = true;
        while (used < share) {
            if (need_gradient && used + dim < share) {
                Eigen::VectorXd g(static_cast<Eigen::Index>(dim));
                for (Eigen::Index k = 0; k < g.size(); ++k) {
                    Eigen::VectorXd probe = z;
                    const double h = z[k] + fd_step <= 1.0 ? fd_step : -fd_step;
                    probe[k] += h;
                    g[k] = (evaluate(probe) - fz) / h;
                    ++used;
                }
                const double norm = g.norm();
                direction = norm > 0.0 ? Eigen::VectorXd(g / norm) : Eigen::VectorXd();
                need_gradient = false;
                continue;
            }
            Eigen::VectorXd candidate;
            if (direction.size() > 0) {
                candidate = (z + step * direction).cwiseMax(0.0).cwiseMin(1.0);
            } else {
                // no usable gradient: random probe around the iterate
                std::normal_distribution<double> jitter(0.0, step);
                candidate = z;
                for (auto& v : candidate)
                    v = std::clamp(v + jitter(rng), 0.0, 1.0);
            }
            const double fc = evaluate(candidate);
            ++used;
            if (fc > fz) {
                z = candidate;
                fz = fc;
                step = std::min(2.0 * step, 1.0);
                need_gradient = true;
            } else {
                step *= 0.5;
                if (step < 0.25 * fd_step) {
                    step = 0.25;
                    need_gradient = true;
                }
            }
        }
    }
    return result;
}

namespace {

std::optional<PointIndex> nested_estimate(const GPPosterior& post, const std::vector<std::optional<std::size_t>>& z_hat)
{
    std::optional<std::size_t> best;
    for (std::size_t x = 0; x < z_hat.size(); ++x) {
        if (!z_hat[x])
            continue;
        if (!best || post.mean[static_cast<Eigen::Index>(x)] > post.mean[static_cast<Eigen::Index>(*best)])
            best = x;
    }
    if (!best)
        return std::nullopt;
    return PointIndex{*best, *z_hat[*best]};
}

}  // namespace

std::vector<NestedEntry> nested_run(const BilevelProblem& problem, const Grid& grid, const NestedConfig& config,
                                    std::mt19937_64& rng, std::size_t total_budget)
{
    config.validate();
    if (problem.layout().n_constraints() != 0)
        throw std::invalid_argument("nested baseline does not support constrained problems");
    if (grid.dim_x() != problem.dim_x() || grid.dim_z() != problem.dim_z())
        throw std::invalid_argument("grid dimensions do not match the problem");

    const FunctionId F = FunctionId::upper_objective();
    const FunctionId f = FunctionId::lower_objective();
    const Eigen::MatrixXd x_points = grid.unit_x_points();
    const double h = config.fd_step / static_cast<double>(grid.points_per_dim() - 1);
    const std::size_t per_query = config.lower_budget + 1;

    GPHyperparams hp;
    hp.lengthscale = config.lengthscale;
    hp.noise_variance = problem.model_noise_variance(F);
    GPDataset data(grid.dim_x());
    GPPosterior post = posterior(data, hp, x_points);
    std::vector<std::optional<std::size_t>> z_hat(grid.num_x());

    std::vector<NestedEntry> entries;
    std::size_t queries = 0;
    std::size_t t = 0;

    auto query_upper = [&](std::size_t x_idx, std::size_t entry_t) {
        const Eigen::VectorXd x = x_points.col(static_cast<Eigen::Index>(x_idx));
        const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
        auto lower = [&](const Eigen::VectorXd& z) {
            return problem.observe(f, xs, {z.data(), static_cast<std::size_t>(z.size())}, rng);
        };
        const LowerSolveResult solve =
            fd_gradient_ascent(lower, grid.dim_z(), config.lower_budget, config.lower_restarts, h, rng);
        const std::size_t z_idx = grid.z_index_of({solve.z.data(), static_cast<std::size_t>(solve.z.size())});
        const Eigen::VectorXd z = grid.z_coordinates(z_idx);
        const double y = problem.observe(F, xs, {z.data(), static_cast<std::size_t>(z.size())}, rng);
        const OutputMap& map = problem.output_map(F);
        data.add(x, y, y * map.scale + map.shift);
        z_hat[x_idx] = z_idx;
        queries += solve.evaluations + 1;

        NestedEntry e;
        e.t = entry_t;
        e.query = {x_idx, z_idx};
        e.queries = queries;
        e.upper_value = y;
        return e;
    };
    auto refit = [&] {
        if (config.refit_hyperparameters)
            hp = fit_mle(data, hp);
        post = posterior(data, hp, x_points);
    };

    std::uniform_int_distribution<std::size_t> pick(0, grid.num_x() - 1);
    for (std::size_t i = 0; i < config.init_upper_points && queries + per_query <= total_budget; ++i)
        entries.push_back(query_upper(pick(rng), 0));
    refit();
    for (auto& e : entries)
        e.estimate = nested_estimate(post, z_hat);

    while (queries + per_query <= total_budget) {
        ++t;
        const double b = beta(t, config.delta, 1, grid.num_x(), 1);
        const Eigen::VectorXd ucb = post.mean + std::sqrt(b) * post.std;
        Eigen::Index x_idx = 0;
        ucb.maxCoeff(&x_idx);
        entries.push_back(query_upper(static_cast<std::size_t>(x_idx), t));
        refit();
        entries.back().estimate = nested_estimate(post, z_hat);
    }
    return entries;
}

}  // namespace bilbo
