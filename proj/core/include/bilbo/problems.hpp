#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bilbo/grid.hpp"

namespace bilbo {

enum class FunctionKind { UpperObjective, LowerObjective, UpperConstraint, LowerConstraint };

/// One member of the blackbox set {F, f} u C_up u C_lo.
struct FunctionId {
    FunctionKind kind = FunctionKind::UpperObjective;
    std::size_t index = 0;  ///< constraint number; 0 for objectives

    static constexpr FunctionId upper_objective() { return {FunctionKind::UpperObjective, 0}; }
    static constexpr FunctionId lower_objective() { return {FunctionKind::LowerObjective, 0}; }
    static constexpr FunctionId upper_constraint(std::size_t i) { return {FunctionKind::UpperConstraint, i}; }
    static constexpr FunctionId lower_constraint(std::size_t i) { return {FunctionKind::LowerConstraint, i}; }

    bool is_constraint() const
    {
        return kind == FunctionKind::UpperConstraint || kind == FunctionKind::LowerConstraint;
    }

    friend bool operator==(const FunctionId&, const FunctionId&) = default;
};

/// "F", "f", "cu<i>", "cl<i>".
std::string to_string(FunctionId id);
std::optional<FunctionId> parse_function_id(std::string_view text);

/// Fixed ordering F, f, C_up..., C_lo... used to index per-function arrays.
class FunctionLayout {
public:
    FunctionLayout(std::size_t n_upper_constraints, std::size_t n_lower_constraints)
        : n_up_(n_upper_constraints), n_lo_(n_lower_constraints)
    {
    }

    std::size_t size() const { return 2 + n_up_ + n_lo_; }
    std::size_t n_upper_constraints() const { return n_up_; }
    std::size_t n_lower_constraints() const { return n_lo_; }
    std::size_t n_constraints() const { return n_up_ + n_lo_; }
    bool contains(FunctionId id) const;

    /// Position of `id` in the ordering; throws std::invalid_argument for unknown ids.
    std::size_t index(FunctionId id) const;
    FunctionId id(std::size_t position) const;
    std::vector<FunctionId> all() const;

    static constexpr std::size_t upper_objective_index = 0;
    static constexpr std::size_t lower_objective_index = 1;
    std::size_t first_upper_constraint() const { return 2; }
    std::size_t first_lower_constraint() const { return 2 + n_up_; }

private:
    std::size_t n_up_;
    std::size_t n_lo_;
};

/// Affine output map y -> (y - shift) / scale.
struct OutputMap {
    double shift = 0.0;
    double scale = 1.0;

    double apply(double y) const { return (y - shift) / scale; }
};

using Evaluator = std::function<double(FunctionId, std::span<const double> x, std::span<const double> z)>;

struct ProblemDefinition {
    std::string name;
    std::size_t dim_x = 1;
    std::size_t dim_z = 1;
    std::size_t n_upper_constraints = 0;
    std::size_t n_lower_constraints = 0;
    /// Noiseless value in maximisation form; constraints are feasible when >= 0.
    Evaluator evaluate;
    double noise_std = 0.01;
    /// Tolerance for grouping lower-level optima in the brute-force oracle.
    double tie_tolerance = 1e-9;
};

/// A constrained bilevel problem max F(x, z) over z in P(x), on the unit cube.
class BilevelProblem {
public:
    explicit BilevelProblem(ProblemDefinition def);

    const std::string& name() const { return def_.name; }
    std::size_t dim_x() const { return def_.dim_x; }
    std::size_t dim_z() const { return def_.dim_z; }
    const FunctionLayout& layout() const { return layout_; }
    std::vector<FunctionId> functions() const { return layout_.all(); }
    std::size_t num_functions() const { return layout_.size(); }
    double noise_std() const { return def_.noise_std; }
    double tie_tolerance() const { return def_.tie_tolerance; }

    std::vector<Bounds> x_bounds() const { return std::vector<Bounds>(dim_x(), Bounds{0.0, 1.0}); }
    std::vector<Bounds> z_bounds() const { return std::vector<Bounds>(dim_z(), Bounds{0.0, 1.0}); }

    /// Noiseless value before the output map.
    double evaluate_raw(FunctionId fn, std::span<const double> x, std::span<const double> z) const;
    /// Noiseless value in model units (after the output map).
    double evaluate(FunctionId fn, std::span<const double> x, std::span<const double> z) const;
    /// evaluate_raw + N(0, noise_std^2), mapped to model units.
    double observe(FunctionId fn, std::span<const double> x, std::span<const double> z, std::mt19937_64& rng) const;
    /// Observation noise variance expressed in model units.
    double model_noise_variance(FunctionId fn) const;

    const OutputMap& output_map(FunctionId fn) const { return maps_.at(layout_.index(fn)); }
    BilevelProblem with_output_maps(std::vector<OutputMap> maps) const;
    BilevelProblem with_noise_std(double noise_std) const;

private:
    void check_point(std::span<const double> x, std::span<const double> z) const;

    ProblemDefinition def_;
    FunctionLayout layout_;
    std::vector<OutputMap> maps_;
};

/// Branin-Hoo upper objective and Goldstein-Price lower objective, both in
/// their rescaled unit-square forms and negated for maximisation. The first
/// benchmark input is bound to x, the second to z.
BilevelProblem make_branin_goldstein();

/// Edited SMD2, SMD6 or SMD12 with p = 1, r = 1, q = 2 (d_x = 2, d_z = 3).
BilevelProblem make_smd(int variant);

/// Looks a benchmark up by name: "branin_goldstein", "smd2", "smd6", "smd12".
BilevelProblem make_problem(std::string_view name);

namespace benchmark_functions {

/// Rescaled Branin-Hoo on [0, 1]^2 (minimisation form).
double branin_rescaled(double u, double v);
/// Rescaled log Goldstein-Price on [0, 1]^2 (minimisation form).
double goldstein_price_rescaled(double u, double v);

}  // namespace benchmark_functions

namespace smd {

/// Original ranges of (x_u1, x_u2, x_l1^1, x_l1^2, x_l2) for a variant.
std::array<Bounds, 5> original_ranges(int variant);

/// Maps unit-cube (x, z) to the original SMD variables in the order above.
std::array<double, 5> to_original(int variant, std::span<const double> x, std::span<const double> z);

}  // namespace smd

}  // namespace bilbo
