#include "bilbo/problems.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bilbo {

std::string to_string(FunctionId id)
{
    switch (id.kind) {
    case FunctionKind::UpperObjective:
        return "F";
    case FunctionKind::LowerObjective:
        return "f";
    case FunctionKind::UpperConstraint:
        return "cu" + std::to_string(id.index);
    case FunctionKind::LowerConstraint:
        return "cl" + std::to_string(id.index);
    }
    return "?";
}

std::optional<FunctionId> parse_function_id(std::string_view text)
{
    if (text == "F")
        return FunctionId::upper_objective();
    if (text == "f")
        return FunctionId::lower_objective();
    if (text.size() < 3 || text[0] != 'c' || (text[1] != 'u' && text[1] != 'l'))
        return std::nullopt;
    std::size_t index = 0;
    const auto digits = text.substr(2);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec != std::errc{} || ptr != digits.data() + digits.size())
        return std::nullopt;
    return text[1] == 'u' ? FunctionId::upper_constraint(index) : FunctionId::lower_constraint(index);
}

bool FunctionLayout::contains(FunctionId id) const
{
    switch (id.kind) {
    case FunctionKind::UpperObjective:
    case FunctionKind::LowerObjective:
        return id.index == 0;
    case FunctionKind::UpperConstraint:
        return id.index < n_up_;
    case FunctionKind::LowerConstraint:
        return id.index < n_lo_;
    }
    return false;
}

std::size_t FunctionLayout::index(FunctionId id) const
{
    if (!contains(id))
        throw std::invalid_argument("unknown function id " + to_string(id));
    switch (id.kind) {
    case FunctionKind::UpperObjective:
        return upper_objective_index;
    case FunctionKind::LowerObjective:
        return lower_objective_index;
    case FunctionKind::UpperConstraint:
        return first_upper_constraint() + id.index;
    case FunctionKind::LowerConstraint:
        return first_lower_constraint() + id.index;
    }
    return 0;
}

FunctionId FunctionLayout::id(std::size_t position) const
{
    if (position >= size())
        throw std::out_of_range("function position");
    if (position == upper_objective_index)
        return FunctionId::upper_objective();
    if (position == lower_objective_index)
        return FunctionId::lower_objective();
    if (position < first_lower_constraint())
        return FunctionId::upper_constraint(position - first_upper_constraint());
    return FunctionId::lower_constraint(position - first_lower_constraint());
}

std::vector<FunctionId> FunctionLayout::all() const
{
    std::vector<FunctionId> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i)
        out.push_back(id(i));
    return out;
}

BilevelProblem::BilevelProblem(ProblemDefinition def)
    : def_(std::move(def)), layout_(def_.n_upper_constraints, def_.n_lower_constraints), maps_(layout_.size())
{
    if (def_.dim_x == 0 || def_.dim_z == 0)
        throw std::invalid_argument("problem dimensions must be positive");
    if (!def_.evaluate)
        throw std::invalid_argument("problem needs an evaluator");
    if (!(def_.noise_std >= 0.0))
        throw std::invalid_argument("noise standard deviation must be nonnegative");
}

void BilevelProblem::check_point(std::span<const double> x, std::span<const double> z) const
{
    if (x.size() != dim_x() || z.size() != dim_z())
        throw std::invalid_argument("point dimension mismatch for problem " + name());
    constexpr double slack = 1e-12;
    auto inside = [](double v) { return v >= -slack && v <= 1.0 + slack; };
    if (!std::all_of(x.begin(), x.end(), inside) || !std::all_of(z.begin(), z.end(), inside))
        throw std::out_of_range("point outside the unit-cube domain");
}

double BilevelProblem::evaluate_raw(FunctionId fn, std::span<const double> x, std::span<const double> z) const
{
    if (!layout_.contains(fn))
        throw std::invalid_argument("unknown function id " + to_string(fn));
    check_point(x, z);
    return def_.evaluate(fn, x, z);
}

double BilevelProblem::evaluate(FunctionId fn, std::span<const double> x, std::span<const double> z) const
{
    return output_map(fn).apply(evaluate_raw(fn, x, z));
}

double BilevelProblem::observe(FunctionId fn, std::span<const double> x, std::span<const double> z,
                               std::mt19937_64& rng) const
{
    const double clean = evaluate_raw(fn, x, z);
    std::normal_distribution<double> noise(0.0, 1.0);
    return output_map(fn).apply(clean + def_.noise_std * noise(rng));
}

double BilevelProblem::model_noise_variance(FunctionId fn) const
{
    const double s = def_.noise_std / output_map(fn).scale;
    return s * s;
}

BilevelProblem BilevelProblem::with_output_maps(std::vector<OutputMap> maps) const
{
    if (maps.size() != layout_.size())
        throw std::invalid_argument("one output map per function required");
    for (const auto& m : maps) {
        if (!(m.scale > 0.0))
            throw std::invalid_argument("output map scale must be positive");
    }
    BilevelProblem out = *this;
    out.maps_ = std::move(maps);
    return out;
}

BilevelProblem BilevelProblem::with_noise_std(double noise_std) const
{
    if (!(noise_std >= 0.0))
        throw std::invalid_argument("noise standard deviation must be nonnegative");
    BilevelProblem out = *this;
    out.def_.noise_std = noise_std;
    return out;
}

namespace benchmark_functions {

double branin_rescaled(double u, double v)
{
    using std::numbers::pi;
    const double a = 15.0 * u - 5.0;
    const double b = 15.0 * v;
    const double t = b - 5.1 * a * a / (4.0 * pi * pi) + 5.0 * a / pi - 6.0;
    return (t * t + (10.0 - 10.0 / (8.0 * pi)) * std::cos(a) - 44.81) / 51.95;
}

double goldstein_price_rescaled(double u, double v)
{
    const double a = 4.0 * u - 2.0;
    const double b = 4.0 * v - 2.0;
    const double p = a + b + 1.0;
    const double q = 2.0 * a - 3.0 * b;
    const double left = 1.0 + p * p * (19.0 - 14.0 * a + 3.0 * a * a - 14.0 * b + 6.0 * a * b + 3.0 * b * b);
    const double right = 30.0 + q * q * (18.0 - 32.0 * a + 12.0 * a * a + 48.0 * b - 36.0 * a * b + 27.0 * b * b);
    return (std::log(left * right) - 8.693) / 2.427;
}

}  // namespace benchmark_functions

BilevelProblem make_branin_goldstein()
{
    ProblemDefinition def;
    def.name = "branin_goldstein";
    def.dim_x = 1;
    def.dim_z = 1;
    def.evaluate = [](FunctionId fn, std::span<const double> x, std::span<const double> z) {
        if (fn.kind == FunctionKind::UpperObjective)
            return -benchmark_functions::branin_rescaled(x[0], z[0]);
        return -benchmark_functions::goldstein_price_rescaled(x[0], z[0]);
    };
    return BilevelProblem(std::move(def));
}

namespace smd {

std::array<Bounds, 5> original_ranges(int variant)
{
    using std::numbers::e;
    using std::numbers::pi;
    switch (variant) {
    case 2:
        return {Bounds{-1.0, 2.0}, Bounds{-5.0, 1.0}, Bounds{-1.0, 2.0}, Bounds{-1.0, 2.0}, Bounds{0.0, e}};
    case 6:
        return {Bounds{-1.0, 2.0}, Bounds{-1.0, 2.0}, Bounds{-1.0, 2.0}, Bounds{-1.0, 2.0}, Bounds{-1.0, 2.0}};
    case 12:
        return {Bounds{-5.0, 10.0}, Bounds{-1.0, 1.0}, Bounds{-5.0, 10.0}, Bounds{-5.0, 10.0},
                Bounds{-pi / 2.0, pi / 2.0}};
    default:
        throw std::invalid_argument("unsupported SMD variant " + std::to_string(variant));
    }
}

std::array<double, 5> to_original(int variant, std::span<const double> x, std::span<const double> z)
{
    if (x.size() != 2 || z.size() != 3)
        throw std::invalid_argument("SMD problems take x in [0,1]^2 and z in [0,1]^3");
    const auto ranges = original_ranges(variant);
    const std::array<double, 5> unit = {x[0], x[1], z[0], z[1], z[2]};
    std::array<double, 5> out{};
    for (std::size_t i = 0; i < 5; ++i)
        out[i] = ranges[i].lo + unit[i] * (ranges[i].hi - ranges[i].lo);
    return out;
}

}  // namespace smd

namespace {

double sq(double v) { return v * v; }

// Each component sum is replaced by its mean over the summed dimensions.
double smd2(FunctionId fn, const std::array<double, 5>& v)
{
    const auto [u1, u2, l1a, l1b, l2] = v;
    const double lower_fit = sq(u2 - std::log(0.99 * l2 + 0.01));
    if (fn.kind == FunctionKind::UpperObjective)
        return -sq(u1) + 0.5 * (sq(l1a) + sq(l1b)) - sq(u2) - lower_fit;
    return -sq(u1) - 0.5 * (sq(l1a) + sq(l1b)) - lower_fit;
}

double smd6(FunctionId fn, const std::array<double, 5>& v)
{
    const auto [u1, u2, l1a, l1b, l2] = v;
    if (fn.kind == FunctionKind::UpperObjective)
        return -(sq(u1) + 0.5 * (sq(l1a) + sq(l1b)) + sq(u2) - sq(u2 - l2));
    constexpr double d = 3.0;
    return -(sq(u1) / d + sq(l1b - l1a) / (d * d) + sq(u2 - l2) / d);
}

double smd12(FunctionId fn, const std::array<double, 5>& v)
{
    const auto [u1, u2, l1a, l1b, l2] = v;
    const double th = std::tanh(l2);
    switch (fn.kind) {
    case FunctionKind::UpperObjective:
        return -(sq(u1 - 2.0) + 0.5 * (sq(l1a) + sq(l1b)) + sq(u2 - 2.0) + std::tanh(std::abs(l2)) - sq(u2 - th));
    case FunctionKind::LowerObjective:
        return -(sq(u1) + 0.5 * (sq(l1a - 2.0) + sq(l1b - 2.0)) + sq(u2 - th));
    case FunctionKind::UpperConstraint:
        switch (fn.index) {
        case 0:
            return u2 - th - 1.0;
        case 1:
            return u1;
        default:
            return u2;
        }
    case FunctionKind::LowerConstraint:
        switch (fn.index) {
        case 0:
            return l1a - l1b * l1b * l1b;
        case 1:
            return l1b - l1a * l1a * l1a;
        default:
            return sq(u2 - th) - 1.0;
        }
    }
    return 0.0;
}

}  // namespace

BilevelProblem make_smd(int variant)
{
    ProblemDefinition def;
    def.name = "smd" + std::to_string(variant);
    def.dim_x = 2;
    def.dim_z = 3;
    switch (variant) {
    case 2:
        def.evaluate = [](FunctionId fn, std::span<const double> x, std::span<const double> z) {
            return smd2(fn, smd::to_original(2, x, z));
        };
        break;
    case 6:
        def.tie_tolerance = 1e-6;
        def.evaluate = [](FunctionId fn, std::span<const double> x, std::span<const double> z) {
            return smd6(fn, smd::to_original(6, x, z));
        };
        break;
    case 12:
        def.n_upper_constraints = 3;
        def.n_lower_constraints = 3;
        def.evaluate = [](FunctionId fn, std::span<const double> x, std::span<const double> z) {
            return smd12(fn, smd::to_original(12, x, z));
        };
        break;
    default:
        throw std::invalid_argument("unsupported SMD variant " + std::to_string(variant));
    }
    return BilevelProblem(std::move(def));
}

BilevelProblem make_problem(std::string_view name)
{
    std::string key(name);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (key == "branin_goldstein" || key == "braninhoo+goldsteinprice")
        return make_branin_goldstein();
    if (key == "smd2")
        return make_smd(2);
    if (key == "smd6")
        return make_smd(6);
    if (key == "smd12")
        return make_smd(12);
    throw std::invalid_argument("unknown problem " + std::string(name));
}

}  // namespace bilbo
