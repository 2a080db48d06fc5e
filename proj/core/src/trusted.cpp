#include "bilbo/trusted.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bilbo {

std::size_t count(const Mask& mask) { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

Mask intersect(const Mask& a, const Mask& b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("mask sizes differ");
    Mask out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = a[i] && b[i];
    return out;
}

double beta(std::size_t t, double delta, std::size_t n_functions, std::size_t n_x_points, std::size_t n_z_points)
{
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("delta must lie in (0, 1)");
    if (t == 0 || n_functions == 0 || n_x_points == 0 || n_z_points == 0)
        throw std::invalid_argument("beta needs positive counts and t >= 1");
    using std::numbers::pi;
    const double td = static_cast<double>(t);
    // log of the product, summed to avoid overflow on large grids
    return 2.0 * (std::log(static_cast<double>(n_functions)) + std::log(static_cast<double>(n_x_points))
                  + std::log(static_cast<double>(n_z_points)) + 2.0 * std::log(td) + std::log(pi * pi / (6.0 * delta)));
}

ConfidenceField confidence_bounds(std::span<const GPPosterior> posteriors, double beta)
{
    if (!(beta >= 0.0))
        throw std::invalid_argument("beta must be nonnegative");
    const double root = std::sqrt(beta);
    ConfidenceField field;
    field.beta = beta;
    field.upper.reserve(posteriors.size());
    field.lower.reserve(posteriors.size());
    for (const auto& p : posteriors) {
        field.upper.push_back(p.mean + root * p.std);
        field.lower.push_back(p.mean - root * p.std);
    }
    return field;
}

FeasibleSets feasible_sets(const ConfidenceField& field, const FunctionLayout& layout)
{
    if (field.upper.size() != layout.size())
        throw std::invalid_argument("confidence field does not cover every function");
    const auto n = static_cast<std::size_t>(field.upper.front().size());
    FeasibleSets out{Mask(n, true), Mask(n, true)};
    for (std::size_t c = layout.first_upper_constraint(); c < layout.size(); ++c) {
        const bool lower_level = c >= layout.first_lower_constraint();
        const auto& u = field.upper[c];
        for (std::size_t i = 0; i < n; ++i) {
            if (u[static_cast<Eigen::Index>(i)] < 0.0) {
                out.s_plus[i] = false;
                if (lower_level)
                    out.s_plus_lo[i] = false;
            }
        }
    }
    return out;
}

std::vector<std::optional<std::size_t>> lower_solution_estimates(const ConfidenceField& field, const Mask& s_plus_lo,
                                                                 const Grid& grid)
{
    const auto& uf = field.upper.at(FunctionLayout::lower_objective_index);
    if (static_cast<std::size_t>(uf.size()) != grid.size() || s_plus_lo.size() != grid.size())
        throw std::invalid_argument("field and mask must cover the grid");
    std::vector<std::optional<std::size_t>> out(grid.num_x());
    const std::size_t nz = grid.num_z();
    for (std::size_t x = 0; x < grid.num_x(); ++x) {
        const std::size_t base = x * nz;
        std::optional<std::size_t> best;
        double best_value = 0.0;
        for (std::size_t z = 0; z < nz; ++z) {
            if (!s_plus_lo[base + z])
                continue;
            const double v = uf[static_cast<Eigen::Index>(base + z)];
            if (!best || v > best_value) {
                best = z;
                best_value = v;
            }
        }
        out[x] = best;
    }
    return out;
}

Mask optimal_lower_set(const ConfidenceField& field, const Mask& s_plus_lo,
                       std::span<const std::optional<std::size_t>> z_bar, const Grid& grid, double epsilon,
                       LowerSetVariant variant)
{
    if (!(epsilon >= 0.0))
        throw std::invalid_argument("epsilon must be nonnegative");
    if (z_bar.size() != grid.num_x())
        throw std::invalid_argument("z_bar must have one entry per upper point");
    const auto& uf = field.upper.at(FunctionLayout::lower_objective_index);
    const auto& lf = field.lower.at(FunctionLayout::lower_objective_index);
    const std::size_t nz = grid.num_z();
    Mask out(grid.size(), false);
    for (std::size_t x = 0; x < grid.num_x(); ++x) {
        if (!z_bar[x])
            continue;
        const std::size_t base = x * nz;
        if (variant == LowerSetVariant::PBar) {
            out[base + *z_bar[x]] = true;
            continue;
        }
        const double threshold = lf[static_cast<Eigen::Index>(base + *z_bar[x])];
        for (std::size_t z = 0; z < nz; ++z) {
            const std::size_t i = base + z;
            if (s_plus_lo[i] && uf[static_cast<Eigen::Index>(i)] + epsilon >= threshold)
                out[i] = true;
        }
    }
    return out;
}

TrustedSets build_trusted_sets(const ConfidenceField& field, const FunctionLayout& layout, const Grid& grid,
                               double epsilon, LowerSetVariant variant)
{
    auto feasible = feasible_sets(field, layout);
    TrustedSets sets;
    sets.z_bar = lower_solution_estimates(field, feasible.s_plus_lo, grid);
    sets.p_plus = optimal_lower_set(field, feasible.s_plus_lo, sets.z_bar, grid, epsilon, variant);
    sets.s_plus = std::move(feasible.s_plus);
    sets.s_plus_lo = std::move(feasible.s_plus_lo);
    return sets;
}

}  // namespace bilbo
