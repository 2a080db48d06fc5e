#include "bilbo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bilbo {

namespace {

Eigen::Index at(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

SurrogateModels::SurrogateModels(const BilevelProblem& problem, const Grid& grid, std::vector<GPHyperparams> initial,
                                 bool refit_hyperparameters, MleOptions mle)
    : problem_(&problem),
      grid_(&grid),
      points_(grid.unit_points()),
      refit_(refit_hyperparameters),
      mle_(mle),
      hyperparams_(std::move(initial))
{
    if (grid.dim_x() != problem.dim_x() || grid.dim_z() != problem.dim_z())
        throw std::invalid_argument("grid dimensions do not match the problem");
    if (hyperparams_.size() != problem.num_functions())
        throw std::invalid_argument("need one hyperparameter set per function");
    for (const auto& hp : hyperparams_)
        hp.validate();
    datasets_.assign(problem.num_functions(), GPDataset(grid.dim()));
    const GPDataset empty(grid.dim());
    for (const auto& hp : hyperparams_)
        posteriors_.push_back(bilbo::posterior(empty, hp, points_));
}

double SurrogateModels::observe(std::size_t fn, PointIndex p, std::mt19937_64& rng)
{
    const auto [x, z] = grid_->coordinates(p);
    const FunctionId id = layout().id(fn);
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    const std::span<const double> zs(z.data(), static_cast<std::size_t>(z.size()));
    const double y = problem_->observe(id, xs, zs, rng);
    const OutputMap& map = problem_->output_map(id);
    datasets_.at(fn).add(points_.col(at(grid_->linear(p))), y, y * map.scale + map.shift);
    return y;
}

void SurrogateModels::update(std::size_t fn)
{
    if (refit_)
        hyperparams_.at(fn) = fit_mle(datasets_[fn], hyperparams_[fn], true, mle_);
    posteriors_.at(fn) = bilbo::posterior(datasets_[fn], hyperparams_[fn], points_);
}

void SurrogateModels::update_all()
{
    for (std::size_t fn = 0; fn < num_functions(); ++fn)
        update(fn);
}

std::size_t SurrogateModels::observations() const
{
    std::size_t n = 0;
    for (const auto& d : datasets_)
        n += d.size();
    return n;
}

std::vector<GPHyperparams> default_hyperparams(const BilevelProblem& problem, double lengthscale)
{
    std::vector<GPHyperparams> out;
    for (const FunctionId id : problem.functions()) {
        GPHyperparams hp;
        hp.lengthscale = lengthscale;
        hp.noise_variance = problem.model_noise_variance(id);
        out.push_back(hp);
    }
    return out;
}

std::vector<PointIndex> initialize_uniform(SurrogateModels& models, std::size_t count, std::mt19937_64& rng)
{
    const Grid& grid = models.grid();
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    std::vector<PointIndex> points;
    for (std::size_t i = 0; i < count; ++i) {
        const PointIndex p = grid.split(pick(rng));
        for (std::size_t fn = 0; fn < models.num_functions(); ++fn)
            models.observe(fn, p, rng);
        points.push_back(p);
    }
    models.update_all();
    return points;
}

QuerySelection select_query(const ConfidenceField& field, const TrustedSets& sets, const Grid& grid)
{
    if (count(sets.s_plus) == 0)
        return Infeasible{"trusted feasible set is empty"};
    const auto& uF = field.upper.at(FunctionLayout::upper_objective_index);
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!sets.s_plus[i] || !sets.p_plus[i])
            continue;
        if (!best || uF[at(i)] > uF[at(*best)])
            best = i;
    }
    if (!best)
        return Infeasible{"trusted feasible and lower-optimal sets do not intersect"};
    return grid.split(*best);
}

std::vector<double> estimated_regrets(const ConfidenceField& field, const TrustedSets& sets, const Grid& grid,
                                      PointIndex p)
{
    const auto& zb = sets.z_bar.at(p.x);
    if (!zb)
        throw std::invalid_argument("z_bar is undefined at this upper point");
    const std::size_t i = grid.linear(p);
    std::vector<double> r(field.upper.size());
    for (std::size_t fn = 0; fn < r.size(); ++fn)
        r[fn] = field.width(fn, i);
    if (*zb != p.z)
        r[FunctionLayout::lower_objective_index] += field.width(FunctionLayout::lower_objective_index,
                                                                grid.linear({p.x, *zb}));
    return r;
}

std::size_t select_function(std::span<const double> r_bar)
{
    if (r_bar.empty())
        throw std::invalid_argument("no estimated regrets");
    std::size_t best = 0;
    for (std::size_t fn = 1; fn < r_bar.size(); ++fn) {
        if (r_bar[fn] > r_bar[best])
            best = fn;
    }
    return best;
}

std::size_t conditional_reassign(const Eigen::VectorXd& sigma_f, const Grid& grid, PointIndex p,
                                 std::optional<std::size_t> z_bar, std::size_t h_t)
{
    if (h_t != FunctionLayout::lower_objective_index)
        return p.z;
    if (!z_bar)
        throw std::invalid_argument("z_bar is undefined at this upper point");
    if (sigma_f[at(grid.linear({p.x, *z_bar}))] >= sigma_f[at(grid.linear(p))])
        return *z_bar;
    return p.z;
}

Bilbo::Bilbo(SurrogateModels& models, BilboConfig config) : models_(&models), config_(config)
{
    if (!(config_.epsilon >= 0.0))
        throw std::invalid_argument("epsilon must be nonnegative");
    if (!(config_.beta_scale > 0.0))
        throw std::invalid_argument("beta_scale must be positive");
    refresh();
}

void Bilbo::refresh()
{
    const Grid& grid = models_->grid();
    const double b =
        config_.beta_scale * beta(t_, config_.delta, models_->num_functions(), grid.num_x(), grid.num_z());
    field_ = confidence_bounds(models_->posteriors(), b);
    sets_ = build_trusted_sets(field_, models_->layout(), grid, config_.epsilon, config_.variant);
}

std::variant<HistoryEntry, Infeasible> Bilbo::step(std::mt19937_64& rng)
{
    const Grid& grid = models_->grid();
    const auto selection = select_query(field_, sets_, grid);
    if (const auto* inf = std::get_if<Infeasible>(&selection))
        return *inf;

    HistoryEntry entry;
    entry.t = t_;
    entry.beta = field_.beta;
    QueryDecision& d = entry.decision;
    d.query = std::get<PointIndex>(selection);
    d.r_bar = estimated_regrets(field_, sets_, grid, d.query);
    d.h_t = select_function(d.r_bar);
    const auto& sigma_f = models_->posterior(FunctionLayout::lower_objective_index).std;
    d.observed = {d.query.x, conditional_reassign(sigma_f, grid, d.query, sets_.z_bar[d.query.x], d.h_t)};
    d.reassigned = d.observed.z != d.query.z;

    double max_sigma = sigma_f[at(grid.linear(d.observed))];
    for (const auto& post : models_->posteriors())
        max_sigma = std::max(max_sigma, post.std[at(grid.linear(d.query))]);
    entry.regret_bound = 4.0 * std::sqrt(entry.beta) * max_sigma;

    entry.value = models_->observe(d.h_t, d.observed, rng);
    models_->update(d.h_t);
    history_.push_back(entry);
    ++t_;
    refresh();
    return entry;
}

std::optional<PointIndex> Bilbo::estimate(EstimatorKind kind) const
{
    if (kind == EstimatorKind::MinMaxEstimatedRegret)
        return min_max_estimate(history_);
    return posterior_mean_estimate(models_->posterior(FunctionLayout::upper_objective_index), sets_,
                                   models_->grid());
}

std::optional<PointIndex> min_max_estimate(std::span<const HistoryEntry> history)
{
    std::optional<PointIndex> best;
    double best_value = 0.0;
    for (const auto& h : history) {
        const double v = *std::max_element(h.decision.r_bar.begin(), h.decision.r_bar.end());
        if (!best || v < best_value) {
            best = h.decision.query;
            best_value = v;
        }
    }
    return best;
}

std::optional<PointIndex> posterior_mean_estimate(const GPPosterior& upper_objective, const TrustedSets& sets,
                                                  const Grid& grid)
{
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!sets.s_plus[i] || !sets.p_plus[i])
            continue;
        if (!best || upper_objective.mean[at(i)] > upper_objective.mean[at(*best)])
            best = i;
    }
    if (!best)
        return std::nullopt;
    return grid.split(*best);
}

}  // namespace bilbo
