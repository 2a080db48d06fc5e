#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bilbo/gp.hpp"
#include "bilbo/grid.hpp"
#include "bilbo/problems.hpp"

namespace bilbo {

/// Dense membership mask over the joint grid, indexed by linear point index.
using Mask = std::vector<bool>;

std::size_t count(const Mask& mask);
Mask intersect(const Mask& a, const Mask& b);

/// Upper/lower confidence bounds mu +- sqrt(beta) sigma for every function,
/// in FunctionLayout order.
struct ConfidenceField {
    std::vector<Eigen::VectorXd> upper;
    std::vector<Eigen::VectorXd> lower;
    double beta = 0.0;

    double width(std::size_t fn, std::size_t point) const { return upper[fn][static_cast<Eigen::Index>(point)] - lower[fn][static_cast<Eigen::Index>(point)]; }
};

enum class LowerSetVariant { PPlus, PBar };

struct TrustedSets {
    Mask s_plus;     ///< u_c >= 0 for every constraint
    Mask s_plus_lo;  ///< u_c >= 0 for every lower-level constraint
    Mask p_plus;     ///< trusted lower-level optimal set (or the z-bar variant)
    std::vector<std::optional<std::size_t>> z_bar;  ///< per x index; empty when S+_lo(x) is empty

    Mask query_region() const { return intersect(s_plus, p_plus); }
};

/// beta_t = 2 log(|F| |X| |Z| t^2 pi^2 / (6 delta)).
double beta(std::size_t t, double delta, std::size_t n_functions, std::size_t n_x_points, std::size_t n_z_points);

ConfidenceField confidence_bounds(std::span<const GPPosterior> posteriors, double beta);

struct FeasibleSets {
    Mask s_plus;
    Mask s_plus_lo;
};

FeasibleSets feasible_sets(const ConfidenceField& field, const FunctionLayout& layout);

/// Per x, the lower-slice argmax of u_f over S+_lo; ties go to the lowest z index.
std::vector<std::optional<std::size_t>> lower_solution_estimates(const ConfidenceField& field, const Mask& s_plus_lo,
                                                                 const Grid& grid);

/// Points of S+_lo with u_f + epsilon >= l_f(x, z_bar(x)), or exactly the
/// points (x, z_bar(x)) for the PBar variant.
Mask optimal_lower_set(const ConfidenceField& field, const Mask& s_plus_lo,
                       std::span<const std::optional<std::size_t>> z_bar, const Grid& grid, double epsilon,
                       LowerSetVariant variant);

TrustedSets build_trusted_sets(const ConfidenceField& field, const FunctionLayout& layout, const Grid& grid,
                               double epsilon, LowerSetVariant variant);

}  // namespace bilbo
