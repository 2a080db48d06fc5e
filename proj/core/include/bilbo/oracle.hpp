#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bilbo/grid.hpp"
#include "bilbo/problems.hpp"
#include "bilbo/trusted.hpp"

namespace bilbo {

/// Exhaustive ground truth of a bilevel problem on a grid, in model units.
/// Computed from noiseless evaluations only; shares nothing with the
/// surrogate-based algorithms.
struct GroundTruth {
    std::string problem;
    std::size_t dim_x = 0;
    std::size_t dim_z = 0;
    std::size_t points_per_dim = 0;
    std::size_t n_upper_constraints = 0;
    std::size_t n_lower_constraints = 0;
    double tie_tolerance = 0.0;

    std::vector<std::vector<double>> values;  ///< [function][linear point]
    Mask feasible;                            ///< every constraint >= 0
    Mask lower_feasible;                      ///< every lower-level constraint >= 0
    std::vector<std::vector<std::size_t>> z_star;  ///< per x, lower-optimal z indices (ties kept)
    std::vector<std::optional<double>> f_star;     ///< per x, f(x, z*(x))
    PointIndex best;
    double best_value = 0.0;
    std::size_t best_multiplicity = 0;  ///< bilevel-feasible points within tie_tolerance of best_value

    FunctionLayout layout() const { return {n_upper_constraints, n_lower_constraints}; }
    std::size_t num_z() const { return values.empty() ? 0 : values.front().size() / z_star.size(); }
    double value(std::size_t fn, PointIndex p) const { return values[fn][p.x * num_z() + p.z]; }
    bool is_lower_optimal(PointIndex p) const;
};

/// Throws std::runtime_error when no upper point has a lower-optimal,
/// upper-feasible solution.
GroundTruth solve_ground_truth(const BilevelProblem& problem, const Grid& grid, double tie_tolerance);

struct RegretComponents {
    double r_F = 0.0;
    double r_f = 0.0;
    std::vector<double> r_c;  ///< upper constraints then lower constraints
    double r_t = 0.0;         ///< max over all components
    bool lower_infeasible = false;  ///< x has no feasible lower-level point; r_f set to 0

    double constraint_sum() const;
    double sum() const { return r_F + r_f + constraint_sum(); }
};

RegretComponents instantaneous_regret(const GroundTruth& truth, PointIndex p);

/// Running cumulative regret R_T = sum of r_t.
class RegretTrace {
public:
    void accumulate(double r_t);
    std::size_t size() const { return r_.size(); }
    double cumulative() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    /// R_T after the first `t` entries (t >= 1).
    double cumulative(std::size_t t) const { return cumulative_.at(t - 1); }
    double average(std::size_t t) const { return cumulative(t) / static_cast<double>(t); }
    const std::vector<double>& instantaneous() const { return r_; }

private:
    std::vector<double> r_;
    std::vector<double> cumulative_;
};

/// Binary sidecar cache of a ground truth. The file starts with the bytes
/// "BILBOGT" and a version byte.
void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);
std::filesystem::path ground_truth_cache_name(const std::string& problem, std::size_t points_per_dim);

}  // namespace bilbo
