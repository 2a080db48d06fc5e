#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "bilbo/gp.hpp"
#include "bilbo/grid.hpp"
#include "bilbo/optimizer.hpp"
#include "bilbo/problems.hpp"
#include "bilbo/trusted.hpp"

namespace bilbo {

struct TrustedRandConfig {
    double epsilon = 0.0;
    LowerSetVariant variant = LowerSetVariant::PPlus;
};

struct TrustedRandEntry {
    std::size_t t = 0;
    PointIndex query;
    bool fallback = false;  ///< mean-based region was empty; sampled from the whole grid
    Mask region;            ///< region the query was drawn from (empty when fallback)
};

/// Random sampling from trusted sets built on the posterior mean
/// (beta = 0), observing every function at each query.
class TrustedRand {
public:
    TrustedRand(SurrogateModels& models, TrustedRandConfig config);

    std::size_t iteration() const { return t_; }
    const TrustedSets& sets() const { return sets_; }
    const std::vector<TrustedRandEntry>& history() const { return history_; }

    /// Keeps the sampling region of each step in the history entry.
    void keep_regions(bool keep) { keep_regions_ = keep; }

    const TrustedRandEntry& step(std::mt19937_64& rng);
    std::optional<PointIndex> estimate() const;

private:
    void refresh();

    SurrogateModels* models_;
    TrustedRandConfig config_;
    std::size_t t_ = 1;
    TrustedSets sets_;
    std::vector<TrustedRandEntry> history_;
    bool keep_regions_ = false;
};

struct NestedConfig {
    std::size_t lower_budget = 20;    ///< f evaluations per lower-level solve
    std::size_t lower_restarts = 2;
    double fd_step = 1.0;             ///< finite-difference step in grid spacings
    double delta = 0.05;              ///< for the upper-level UCB beta schedule
    std::size_t init_upper_points = 3;
    double lengthscale = 0.2;
    bool refit_hyperparameters = true;

    void validate() const;
};

struct LowerSolveResult {
    Eigen::VectorXd z;          ///< best observed z in the unit box
    double value = 0.0;         ///< its noisy observation
    std::size_t evaluations = 0;
};

/// Multi-start forward-difference gradient ascent on a noisy function over
/// [0, 1]^d with backtracking; spends exactly `budget` evaluations.
LowerSolveResult fd_gradient_ascent(const std::function<double(const Eigen::VectorXd&)>& objective, std::size_t dim,
                                    std::size_t budget, std::size_t restarts, double fd_step, std::mt19937_64& rng);

struct NestedEntry {
    std::size_t t = 0;  ///< 0 for the initial points
    PointIndex query;   ///< (x_t, snapped z-hat(x_t))
    std::size_t queries = 0;  ///< cumulative observations of F and f after this entry
    double upper_value = 0.0;
    std::optional<PointIndex> estimate;  ///< argmax of mu_F over queried x, after this entry
};

/// UCB over the upper grid on x -> F(x, z-hat(x)) with a full lower-level
/// solve per upper query. Stops before an upper query would exceed
/// `total_budget`. Throws std::invalid_argument on constrained problems.
std::vector<NestedEntry> nested_run(const BilevelProblem& problem, const Grid& grid, const NestedConfig& config,
                                    std::mt19937_64& rng, std::size_t total_budget);

}  // namespace bilbo
