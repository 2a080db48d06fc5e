#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "bilbo/gp.hpp"
#include "bilbo/grid.hpp"
#include "bilbo/problems.hpp"
#include "bilbo/trusted.hpp"

namespace bilbo {

/// One GP per blackbox function, each with its own dataset and
/// hyperparameters, plus the cached posterior over every grid point.
class SurrogateModels {
public:
    SurrogateModels(const BilevelProblem& problem, const Grid& grid, std::vector<GPHyperparams> initial,
                    bool refit_hyperparameters = true, MleOptions mle = {});

    const BilevelProblem& problem() const { return *problem_; }
    const Grid& grid() const { return *grid_; }
    const FunctionLayout& layout() const { return problem_->layout(); }
    std::size_t num_functions() const { return datasets_.size(); }

    /// Draws one noisy observation of `fn` at `p` and appends it. The
    /// posterior is stale until update(fn) is called.
    double observe(std::size_t fn, PointIndex p, std::mt19937_64& rng);
    /// Refits hyperparameters (if enabled) and recomputes the grid posterior.
    void update(std::size_t fn);
    void update_all();

    const GPDataset& dataset(std::size_t fn) const { return datasets_.at(fn); }
    const GPHyperparams& hyperparams(std::size_t fn) const { return hyperparams_.at(fn); }
    const GPPosterior& posterior(std::size_t fn) const { return posteriors_.at(fn); }
    std::span<const GPPosterior> posteriors() const { return posteriors_; }
    std::size_t observations() const;

private:
    const BilevelProblem* problem_;
    const Grid* grid_;
    Eigen::MatrixXd points_;
    bool refit_;
    MleOptions mle_;
    std::vector<GPDataset> datasets_;
    std::vector<GPHyperparams> hyperparams_;
    std::vector<GPPosterior> posteriors_;
};

/// Per-function starting hyperparameters: the given lengthscale, unit
/// outputscale and the problem's noise variance in model units.
std::vector<GPHyperparams> default_hyperparams(const BilevelProblem& problem, double lengthscale);

/// Observes every function at `count` uniformly drawn grid points, then
/// updates every model. Returns the drawn points.
std::vector<PointIndex> initialize_uniform(SurrogateModels& models, std::size_t count, std::mt19937_64& rng);

struct Infeasible {
    std::string reason;
};

using QuerySelection = std::variant<PointIndex, Infeasible>;

/// argmax of u_F over S+ and P+, ties to the lowest joint index.
QuerySelection select_query(const ConfidenceField& field, const TrustedSets& sets, const Grid& grid);

/// r-bar per function (layout order) at p. Requires z_bar(p.x).
std::vector<double> estimated_regrets(const ConfidenceField& field, const TrustedSets& sets, const Grid& grid,
                                      PointIndex p);

/// argmax, ties to the earliest function in layout order.
std::size_t select_function(std::span<const double> r_bar);

/// z-bar(x) when f is selected and sigma_f(x, z-bar) >= sigma_f(x, z); z otherwise.
std::size_t conditional_reassign(const Eigen::VectorXd& sigma_f, const Grid& grid, PointIndex p,
                                 std::optional<std::size_t> z_bar, std::size_t h_t);

struct QueryDecision {
    PointIndex query;     ///< argmax point before reassignment
    PointIndex observed;  ///< where h_t was observed
    std::size_t h_t = 0;  ///< layout index
    bool reassigned = false;
    std::vector<double> r_bar;
};

struct HistoryEntry {
    std::size_t t = 0;
    QueryDecision decision;
    double value = 0.0;  ///< noisy observation, model units
    double beta = 0.0;
    /// 4 sqrt(beta) max over functions of sigma at the query, using the
    /// reassigned z for f.
    double regret_bound = 0.0;
};

enum class EstimatorKind { MinMaxEstimatedRegret, PosteriorMeanInTrusted };

struct BilboConfig {
    double delta = 0.05;
    double epsilon = 0.0;
    LowerSetVariant variant = LowerSetVariant::PPlus;
    /// Multiplies beta_t. 1 keeps the high-probability schedule.
    double beta_scale = 1.0;
};

class Bilbo {
public:
    /// `models` must already hold the initial observations.
    Bilbo(SurrogateModels& models, BilboConfig config);

    /// Iteration index of the next step (starts at 1).
    std::size_t iteration() const { return t_; }
    /// Field and sets that the next step will act on.
    const ConfidenceField& field() const { return field_; }
    const TrustedSets& sets() const { return sets_; }
    const std::vector<HistoryEntry>& history() const { return history_; }
    const SurrogateModels& models() const { return *models_; }

    /// One decoupled iteration: exactly one function observation.
    std::variant<HistoryEntry, Infeasible> step(std::mt19937_64& rng);

    std::optional<PointIndex> estimate(EstimatorKind kind) const;

private:
    void refresh();

    SurrogateModels* models_;
    BilboConfig config_;
    std::size_t t_ = 1;
    ConfidenceField field_;
    TrustedSets sets_;
    std::vector<HistoryEntry> history_;
};

/// Historical query with the smallest max-over-functions r-bar; earliest wins ties.
std::optional<PointIndex> min_max_estimate(std::span<const HistoryEntry> history);

/// argmax of mu_F over S+ and P+; empty when the region is empty.
std::optional<PointIndex> posterior_mean_estimate(const GPPosterior& upper_objective, const TrustedSets& sets,
                                                  const Grid& grid);

}  // namespace bilbo
