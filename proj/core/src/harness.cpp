#include "bilbo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace bilbo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kAuditTolerance = 1e-9;

Eigen::Index at(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string lower_case(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view key)
{
    T value{};
    const auto t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw std::invalid_argument("invalid value '" + std::string(text) + "' for " + std::string(key));
    return value;
}

bool parse_bool(std::string_view text, std::string_view key)
{
    const auto v = lower_case(trim(text));
    if (v == "1" || v == "true" || v == "yes" || v == "on")
        return true;
    if (v == "0" || v == "false" || v == "no" || v == "off")
        return false;
    throw std::invalid_argument("invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

double mean_of(const std::vector<double>& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double ci_of(const std::vector<double>& v, double mean)
{
    if (v.size() < 2)
        return 0.0;
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
}

bool same_double(double a, double b)
{
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

}  // namespace

std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::Bilbo:
        return "bilbo";
    case Algorithm::TrustedRand:
        return "trustedrand";
    case Algorithm::Nested:
        return "nested";
    }
    return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view text)
{
    const auto v = lower_case(text);
    if (v == "bilbo")
        return Algorithm::Bilbo;
    if (v == "trustedrand")
        return Algorithm::TrustedRand;
    if (v == "nested")
        return Algorithm::Nested;
    return std::nullopt;
}

std::string to_string(LowerSetVariant v) { return v == LowerSetVariant::PPlus ? "P_plus" : "P_bar"; }

std::optional<LowerSetVariant> parse_lower_set_variant(std::string_view text)
{
    const auto v = lower_case(text);
    if (v == "p_plus" || v == "pplus" || v == "plus")
        return LowerSetVariant::PPlus;
    if (v == "p_bar" || v == "pbar" || v == "bar")
        return LowerSetVariant::PBar;
    return std::nullopt;
}

std::string to_string(EstimatorKind k)
{
    return k == EstimatorKind::MinMaxEstimatedRegret ? "min_max" : "posterior_mean";
}

std::optional<EstimatorKind> parse_estimator(std::string_view text)
{
    const auto v = lower_case(text);
    if (v == "min_max" || v == "minmax")
        return EstimatorKind::MinMaxEstimatedRegret;
    if (v == "posterior_mean" || v == "mean")
        return EstimatorKind::PosteriorMeanInTrusted;
    return std::nullopt;
}

ExperimentConfig ExperimentConfig::preset(std::string_view problem)
{
    ExperimentConfig c;
    c.problem = make_problem(problem).name();
    if (c.problem == "branin_goldstein") {
        c.lengthscale = 0.2;
        c.grid_m = 100;
    } else if (c.problem == "smd2") {
        c.lengthscale = 0.7;
        c.grid_m = 25;
        c.p_variant = LowerSetVariant::PBar;
    } else if (c.problem == "smd6") {
        c.lengthscale = 0.2;
        c.grid_m = 25;
    } else if (c.problem == "smd12") {
        c.lengthscale = 0.4;
        c.grid_m = 16;
    }
    return c;
}

void ExperimentConfig::validate() const
{
    const BilevelProblem p = make_problem(problem);
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("delta must lie in (0, 1)");
    if (!(epsilon >= 0.0))
        throw std::invalid_argument("epsilon must be nonnegative");
    if (!(beta_scale > 0.0))
        throw std::invalid_argument("beta_scale must be positive");
    if (total_queries < 1)
        throw std::invalid_argument("total queries must be at least 1");
    if (seeds.empty())
        throw std::invalid_argument("at least one seed is required");
    if (grid_m < 2)
        throw std::invalid_argument("grid needs at least 2 points per dimension");
    if (!(lengthscale > 0.0))
        throw std::invalid_argument("lengthscale must be positive");
    if (!(noise_std >= 0.0))
        throw std::invalid_argument("noise must be nonnegative");
    if (jobs < 1)
        throw std::invalid_argument("jobs must be at least 1");
    if (algorithm == Algorithm::Nested) {
        if (p.layout().n_constraints() != 0)
            throw std::invalid_argument("nested does not support constrained problem " + p.name());
        NestedConfig n = nested;
        n.delta = delta;
        n.lengthscale = lengthscale;
        n.init_upper_points = std::max<std::size_t>(init_observations, 1);
        n.validate();
    }
}

Settings parse_settings(std::string_view text)
{
    Settings out;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key=value");
        std::string key(trim(line.substr(0, eq)));
        std::replace(key.begin(), key.end(), '-', '_');
        out[key] = std::string(trim(line.substr(eq + 1)));
    }
    return out;
}

Settings read_settings_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_settings(ss.str());
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text)
{
    std::vector<std::uint64_t> seeds;
    for (auto item : split(text, ',')) {
        item = trim(item);
        if (item.empty())
            continue;
        const auto dash = item.find('-');
        if (dash == std::string_view::npos) {
            seeds.push_back(parse_number<std::uint64_t>(item, "seeds"));
            continue;
        }
        const auto lo = parse_number<std::uint64_t>(item.substr(0, dash), "seeds");
        const auto hi = parse_number<std::uint64_t>(item.substr(dash + 1), "seeds");
        if (hi < lo)
            throw std::invalid_argument("empty seed range " + std::string(item));
        for (auto s = lo; s <= hi; ++s)
            seeds.push_back(s);
    }
    if (seeds.empty())
        throw std::invalid_argument("seed list is empty");
    return seeds;
}

ExperimentConfig make_config(const Settings& settings)
{
    const auto problem = settings.find("problem");
    ExperimentConfig c = ExperimentConfig::preset(problem == settings.end() ? "branin_goldstein" : problem->second);
    for (const auto& [key, value] : settings) {
        if (key == "problem") {
            continue;
        } else if (key == "algo" || key == "algorithm") {
            const auto a = parse_algorithm(value);
            if (!a)
                throw std::invalid_argument("unknown algorithm " + value);
            c.algorithm = *a;
        } else if (key == "seeds") {
            c.seeds = parse_seed_list(value);
        } else if (key == "queries" || key == "total_queries") {
            c.total_queries = parse_number<std::size_t>(value, key);
        } else if (key == "beta_scale") {
            c.beta_scale = parse_number<double>(value, key);
        } else if (key == "delta") {
            c.delta = parse_number<double>(value, key);
        } else if (key == "epsilon") {
            c.epsilon = parse_number<double>(value, key);
        } else if (key == "p_variant") {
            const auto v = parse_lower_set_variant(value);
            if (!v)
                throw std::invalid_argument("unknown lower-set variant " + value);
            c.p_variant = *v;
        } else if (key == "grid_m" || key == "m") {
            c.grid_m = parse_number<std::size_t>(value, key);
        } else if (key == "init_observations") {
            c.init_observations = parse_number<std::size_t>(value, key);
        } else if (key == "lengthscale") {
            c.lengthscale = parse_number<double>(value, key);
        } else if (key == "noise" || key == "noise_std") {
            c.noise_std = parse_number<double>(value, key);
        } else if (key == "estimator") {
            const auto e = parse_estimator(value);
            if (!e)
                throw std::invalid_argument("unknown estimator " + value);
            c.estimator = *e;
        } else if (key == "out" || key == "output_dir") {
            c.output_dir = value;
        } else if (key == "cache_dir") {
            if (value.empty())
                c.cache_dir.reset();
            else
                c.cache_dir = value;
        } else if (key == "nested_lower_budget") {
            c.nested.lower_budget = parse_number<std::size_t>(value, key);
        } else if (key == "nested_restarts") {
            c.nested.lower_restarts = parse_number<std::size_t>(value, key);
        } else if (key == "nested_fd_step") {
            c.nested.fd_step = parse_number<double>(value, key);
        } else if (key == "refit") {
            c.refit_hyperparameters = parse_bool(value, key);
        } else if (key == "audit") {
            c.audit = parse_bool(value, key);
        } else if (key == "timing") {
            c.record_timing = parse_bool(value, key);
        } else if (key == "jobs") {
            c.jobs = parse_number<std::size_t>(value, key);
        } else {
            throw std::invalid_argument("unknown setting " + key);
        }
    }
    c.validate();
    return c;
}

std::vector<PointIndex> calibration_sample(const Grid& grid, std::size_t count, std::uint64_t seed)
{
    std::vector<std::size_t> all(grid.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    if (count >= all.size()) {
        chosen = std::move(all);
    } else {
        std::mt19937_64 rng(seed);
        std::sample(all.begin(), all.end(), std::back_inserter(chosen), count, rng);
    }
    std::vector<PointIndex> out;
    out.reserve(chosen.size());
    for (std::size_t i : chosen)
        out.push_back(grid.split(i));
    return out;
}

Normalization normalize_outputs(const BilevelProblem& problem, const Grid& grid, const std::vector<PointIndex>& sample)
{
    if (sample.empty())
        throw std::invalid_argument("calibration sample is empty");
    Normalization out;
    for (const FunctionId id : problem.functions()) {
        std::vector<double> values;
        values.reserve(sample.size());
        for (const PointIndex p : sample) {
            const auto [x, z] = grid.coordinates(p);
            values.push_back(problem.evaluate_raw(id, {x.data(), static_cast<std::size_t>(x.size())},
                                                  {z.data(), static_cast<std::size_t>(z.size())}));
        }
        const double mean = mean_of(values);
        double ss = 0.0;
        for (double v : values)
            ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(values.size()));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            out.maps.push_back({});
            out.warnings.push_back(problem.name() + ": " + to_string(id)
                                   + " is constant on the calibration sample; output left unscaled");
            continue;
        }
        out.maps.push_back({id.is_constraint() ? 0.0 : mean, sd});
    }
    return out;
}

Experiment prepare_experiment(const ExperimentConfig& config)
{
    config.validate();
    BilevelProblem base = make_problem(config.problem).with_noise_std(config.noise_std);
    Grid grid(base.x_bounds(), base.z_bounds(), config.grid_m);
    Normalization norm = normalize_outputs(base, grid, calibration_sample(grid, 1000, 0));
    BilevelProblem problem = base.with_output_maps(norm.maps);

    std::optional<GroundTruth> truth;
    std::filesystem::path cache;
    if (config.cache_dir) {
        cache = *config.cache_dir / ground_truth_cache_name(problem.name(), grid.points_per_dim());
        if (std::filesystem::exists(cache)) {
            try {
                GroundTruth loaded = load_ground_truth(cache);
                if (loaded.problem == problem.name() && loaded.points_per_dim == grid.points_per_dim()
                    && loaded.values.size() == problem.num_functions() && loaded.values[0].size() == grid.size())
                    truth = std::move(loaded);
            } catch (const std::exception& e) {
                norm.warnings.push_back("ignoring unreadable ground-truth cache: " + std::string(e.what()));
            }
        }
    }
    if (!truth) {
        truth = solve_ground_truth(problem, grid, problem.tie_tolerance());
        if (config.cache_dir) {
            std::filesystem::create_directories(*config.cache_dir);
            save_ground_truth(*truth, cache);
        }
    }
    return Experiment{std::move(problem), std::move(grid), std::move(*truth), std::move(norm.warnings)};
}

namespace {

struct IterationAudit {
    bool containment = true;
    bool inclusion = true;
    bool query_bounds = true;
    bool set_bounds = true;
    std::size_t constraint_points = 0;
    std::size_t lower_points = 0;
};

IterationAudit audit_iteration(const GroundTruth& truth, const Grid& grid, const ConfidenceField& field,
                               const TrustedSets& sets, const HistoryEntry& entry, double r_t, double epsilon,
                               LowerSetVariant variant)
{
    IterationAudit a;
    const FunctionLayout layout = truth.layout();
    const std::size_t n = grid.size();
    for (std::size_t fn = 0; fn < layout.size() && a.containment; ++fn) {
        const auto& v = truth.values[fn];
        const auto& u = field.upper[fn];
        const auto& l = field.lower[fn];
        for (std::size_t i = 0; i < n; ++i) {
            if (v[i] > u[at(i)] || v[i] < l[at(i)]) {
                a.containment = false;
                break;
            }
        }
    }

    // P+ proper even when the run samples from the z-bar variant
    const Mask p_plus = variant == LowerSetVariant::PPlus
                            ? sets.p_plus
                            : optimal_lower_set(field, sets.s_plus_lo, sets.z_bar, grid, epsilon,
                                                LowerSetVariant::PPlus);
    const std::size_t star = grid.linear(truth.best);
    a.inclusion = sets.s_plus[star] && p_plus[star];

    const double max_r_bar = *std::max_element(entry.decision.r_bar.begin(), entry.decision.r_bar.end());
    a.query_bounds = r_t <= entry.regret_bound + epsilon + kAuditTolerance
                     && r_t <= max_r_bar + epsilon + kAuditTolerance;

    const std::size_t nz = grid.num_z();
    const std::size_t f_idx = FunctionLayout::lower_objective_index;
    for (std::size_t i = 0; i < n; ++i) {
        if (sets.s_plus[i]) {
            for (std::size_t c = layout.first_upper_constraint(); c < layout.size(); ++c) {
                ++a.constraint_points;
                if (std::max(0.0, -truth.values[c][i]) > field.width(c, i) + kAuditTolerance)
                    a.set_bounds = false;
            }
        }
        if (p_plus[i]) {
            const std::size_t x = i / nz;
            if (!truth.f_star[x] || !sets.z_bar[x])
                continue;
            ++a.lower_points;
            const std::size_t zb = x * nz + *sets.z_bar[x];
            double bound = epsilon + field.width(f_idx, i);
            if (zb != i)
                bound += field.width(f_idx, zb);
            if (*truth.f_star[x] - truth.values[f_idx][i] > bound + kAuditTolerance)
                a.set_bounds = false;
        }
    }
    return a;
}

double multi_solution_fraction(const TrustedSets& sets, const Grid& grid)
{
    const std::size_t nz = grid.num_z();
    std::size_t multi = 0;
    for (std::size_t x = 0; x < grid.num_x(); ++x) {
        std::size_t k = 0;
        for (std::size_t z = 0; z < nz && k < 2; ++z)
            k += sets.p_plus[x * nz + z] ? 1 : 0;
        multi += k >= 2 ? 1 : 0;
    }
    return static_cast<double>(multi) / static_cast<double>(grid.num_x());
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const
    {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

RunRecord run_seed(const ExperimentConfig& config, const Experiment& experiment, std::uint64_t seed)
{
    const BilevelProblem& problem = experiment.problem;
    const Grid& grid = experiment.grid;
    const GroundTruth& truth = experiment.truth;
    const std::size_t nF = problem.num_functions();

    RunRecord rec;
    rec.config = config;
    rec.seed = seed;
    std::mt19937_64 rng(seed);
    double R_T = 0.0;

    auto make_row = [&](std::size_t iter, std::size_t queries, PointIndex p) {
        const RegretComponents r = instantaneous_regret(truth, p);
        TraceRow row;
        row.iter = iter;
        row.queries = queries;
        row.algo = to_string(config.algorithm);
        row.problem = problem.name();
        row.seed = seed;
        row.r_F = r.r_F;
        row.r_f = r.r_f;
        row.r_c_sum = r.constraint_sum();
        row.r_t = r.r_t;
        row.sum_regret = r.sum();
        if (iter > 0)
            R_T += r.r_t;
        row.R_T = R_T;
        row.estimator_sum_regret = kNaN;
        row.wall_ms = kNaN;
        return row;
    };
    auto estimator_regret = [&](const std::optional<PointIndex>& p) {
        return p ? instantaneous_regret(truth, *p).sum() : kNaN;
    };
    auto stop_row = [&](std::size_t iter, std::size_t queries, const std::string& reason) {
        TraceRow row;
        row.iter = iter;
        row.queries = queries;
        row.algo = to_string(config.algorithm);
        row.problem = problem.name();
        row.seed = seed;
        row.r_F = row.r_f = row.r_c_sum = row.r_t = row.sum_regret = kNaN;
        row.R_T = R_T;
        row.estimator_sum_regret = kNaN;
        row.wall_ms = kNaN;
        row.reason = reason;
        return row;
    };

    if (config.algorithm == Algorithm::Nested) {
        NestedConfig nc = config.nested;
        nc.delta = config.delta;
        nc.lengthscale = config.lengthscale;
        nc.init_upper_points = std::max<std::size_t>(config.init_observations, 1);
        nc.refit_hyperparameters = config.refit_hyperparameters;
        Stopwatch clock;
        const auto entries = nested_run(problem, grid, nc, rng, config.total_queries);
        const double per_entry = entries.empty() ? 0.0 : clock.ms() / static_cast<double>(entries.size());
        for (const auto& e : entries) {
            TraceRow row = make_row(e.t, e.queries, e.query);
            row.h_t = "f+F";
            if (e.t > 0)
                row.estimator_sum_regret = estimator_regret(e.estimate);
            if (config.record_timing)
                row.wall_ms = per_entry;
            rec.rows.push_back(row);
        }
        if (!entries.empty()) {
            rec.final_estimate = entries.back().estimate;
            rec.observations = entries.back().queries;
        }
        return rec;
    }

    SurrogateModels models(problem, grid, default_hyperparams(problem, config.lengthscale),
                           config.refit_hyperparameters);
    std::size_t queries = 0;
    {
        Stopwatch clock;
        const auto init = initialize_uniform(models, config.init_observations, rng);
        const double per_point = init.empty() ? 0.0 : clock.ms() / static_cast<double>(init.size());
        for (const PointIndex p : init) {
            queries += nF;
            TraceRow row = make_row(0, queries, p);
            row.h_t = "all";
            if (config.record_timing)
                row.wall_ms = per_point;
            rec.rows.push_back(row);
        }
    }

    if (config.algorithm == Algorithm::TrustedRand) {
        TrustedRand tr(models, {config.epsilon, config.p_variant});
        while (queries + nF <= config.total_queries) {
            Stopwatch clock;
            const TrustedRandEntry& e = tr.step(rng);
            const double ms = clock.ms();
            queries += nF;
            TraceRow row = make_row(e.t, queries, e.query);
            row.h_t = "all";
            if (e.fallback)
                row.reason = "mean-based region empty; sampled whole grid";
            row.estimator_sum_regret = estimator_regret(tr.estimate());
            if (config.record_timing)
                row.wall_ms = ms;
            rec.rows.push_back(row);
        }
        rec.final_estimate = tr.estimate();
        rec.observations = models.observations();
        return rec;
    }

    Bilbo bilbo(models, {config.delta, config.epsilon, config.p_variant, config.beta_scale});
    rec.audit.full_containment = true;
    while (queries + 1 <= config.total_queries) {
        rec.max_multi_solution_fraction
            = std::max(rec.max_multi_solution_fraction, multi_solution_fraction(bilbo.sets(), grid));
        std::optional<ConfidenceField> field;
        std::optional<TrustedSets> sets;
        if (config.audit) {
            field = bilbo.field();
            sets = bilbo.sets();
        }
        const std::size_t t = bilbo.iteration();
        Stopwatch clock;
        const auto result = bilbo.step(rng);
        const double ms = clock.ms();
        if (const auto* inf = std::get_if<Infeasible>(&result)) {
            rec.infeasible = true;
            rec.reason = "infeasibility declared: " + inf->reason;
            rec.rows.push_back(stop_row(t, queries, rec.reason));
            break;
        }
        const HistoryEntry& entry = std::get<HistoryEntry>(result);
        queries += 1;
        TraceRow row = make_row(entry.t, queries, entry.decision.query);
        row.h_t = to_string(problem.layout().id(entry.decision.h_t));
        row.reassigned = entry.decision.reassigned;
        row.estimator_sum_regret = estimator_regret(bilbo.estimate(config.estimator));
        if (config.record_timing)
            row.wall_ms = ms;
        if (config.audit) {
            const IterationAudit a = audit_iteration(truth, grid, *field, *sets, entry, row.r_t, config.epsilon,
                                                     config.p_variant);
            row.containment_ok = a.containment;
            row.bound_ok = a.inclusion && a.query_bounds && a.set_bounds;
            ++rec.audit.rows;
            rec.audit.constraint_points_checked += a.constraint_points;
            rec.audit.lower_points_checked += a.lower_points;
            if (a.containment) {
                ++rec.audit.containment_rows;
                rec.audit.inclusion_failures += a.inclusion ? 0 : 1;
                rec.audit.bound_failures += a.query_bounds ? 0 : 1;
                rec.audit.set_bound_failures += a.set_bounds ? 0 : 1;
            } else {
                rec.audit.full_containment = false;
            }
        }
        rec.regret_bounds.push_back(entry.regret_bound);
        rec.rows.push_back(row);
    }
    if (!config.audit)
        rec.audit.full_containment = false;
    rec.final_estimate = bilbo.estimate(config.estimator);
    rec.min_max_estimate = bilbo.estimate(EstimatorKind::MinMaxEstimatedRegret);
    rec.observations = models.observations();
    return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const Experiment& experiment)
{
    config.validate();
    std::vector<RunRecord> records(config.seeds.size());
    const std::size_t workers = std::min(config.jobs, config.seeds.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < config.seeds.size(); ++i)
            records[i] = run_seed(config, experiment, config.seeds[i]);
        return records;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(config.seeds.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
                try {
                    records[i] = run_seed(config, experiment, config.seeds[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors) {
        if (e)
            std::rethrow_exception(e);
    }
    return records;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config)
{
    const Experiment experiment = prepare_experiment(config);
    return run_experiment(config, experiment);
}

std::string format_double(double v)
{
    if (std::isnan(v))
        return {};
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc())
        throw std::runtime_error("cannot format number");
    return std::string(buf, ptr);
}

std::string csv_header()
{
    return "iter,queries,algo,problem,seed,r_F,r_f,r_c_sum,r_t,sum_regret,R_T,estimator_sum_regret,h_t,reassigned,"
           "containment_ok,bound_ok,wall_ms,reason";
}

std::string format_row(const TraceRow& row)
{
    std::string reason = row.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    std::string s;
    s += std::to_string(row.iter) + ',' + std::to_string(row.queries) + ',' + row.algo + ',' + row.problem + ','
         + std::to_string(row.seed) + ',';
    for (double v : {row.r_F, row.r_f, row.r_c_sum, row.r_t, row.sum_regret, row.R_T, row.estimator_sum_regret})
        s += format_double(v) + ',';
    s += row.h_t + ',';
    s += row.reassigned ? "1," : "0,";
    s += row.containment_ok ? "1," : "0,";
    s += row.bound_ok ? "1," : "0,";
    s += format_double(row.wall_ms) + ',' + reason;
    return s;
}

std::string run_csv(const RunRecord& record)
{
    std::string out = csv_header() + '\n';
    for (const auto& row : record.rows)
        out += format_row(row) + '\n';
    return out;
}

std::vector<TraceRow> parse_run_csv(std::string_view text)
{
    auto lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != csv_header())
        throw std::invalid_argument("unexpected CSV header");
    auto number = [](std::string_view s) { return s.empty() ? kNaN : parse_number<double>(s, "csv field"); };
    std::vector<TraceRow> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        std::string_view line = lines[li];
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        const auto f = split(line, ',');
        if (f.size() != 18)
            throw std::invalid_argument("CSV line " + std::to_string(li + 1) + " has " + std::to_string(f.size())
                                        + " fields");
        TraceRow r;
        r.iter = parse_number<std::size_t>(f[0], "iter");
        r.queries = parse_number<std::size_t>(f[1], "queries");
        r.algo = f[2];
        r.problem = f[3];
        r.seed = parse_number<std::uint64_t>(f[4], "seed");
        r.r_F = number(f[5]);
        r.r_f = number(f[6]);
        r.r_c_sum = number(f[7]);
        r.r_t = number(f[8]);
        r.sum_regret = number(f[9]);
        r.R_T = number(f[10]);
        r.estimator_sum_regret = number(f[11]);
        r.h_t = f[12];
        r.reassigned = f[13] == "1";
        r.containment_ok = f[14] == "1";
        r.bound_ok = f[15] == "1";
        r.wall_ms = number(f[16]);
        r.reason = f[17];
        rows.push_back(std::move(r));
    }
    return rows;
}

bool operator==(const TraceRow& a, const TraceRow& b)
{
    return a.iter == b.iter && a.queries == b.queries && a.algo == b.algo && a.problem == b.problem
           && a.seed == b.seed && same_double(a.r_F, b.r_F) && same_double(a.r_f, b.r_f)
           && same_double(a.r_c_sum, b.r_c_sum) && same_double(a.r_t, b.r_t)
           && same_double(a.sum_regret, b.sum_regret) && same_double(a.R_T, b.R_T)
           && same_double(a.estimator_sum_regret, b.estimator_sum_regret) && a.h_t == b.h_t
           && a.reassigned == b.reassigned && a.containment_ok == b.containment_ok && a.bound_ok == b.bound_ok
           && same_double(a.wall_ms, b.wall_ms) && a.reason == b.reason;
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records)
{
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_q;
    for (const auto& rec : records) {
        for (const auto& row : rec.rows) {
            if (std::isnan(row.sum_regret))
                continue;
            auto& [sums, est] = by_q[row.queries];
            sums.push_back(row.sum_regret);
            if (!std::isnan(row.estimator_sum_regret))
                est.push_back(row.estimator_sum_regret);
        }
    }
    std::vector<AggregateRow> out;
    for (const auto& [q, vals] : by_q) {
        AggregateRow a;
        a.queries = q;
        a.n = vals.first.size();
        a.mean_sum_regret = mean_of(vals.first);
        a.ci_sum_regret = ci_of(vals.first, a.mean_sum_regret);
        a.n_estimator = vals.second.size();
        if (a.n_estimator > 0) {
            a.mean_estimator_sum_regret = mean_of(vals.second);
            a.ci_estimator_sum_regret = ci_of(vals.second, a.mean_estimator_sum_regret);
        } else {
            a.mean_estimator_sum_regret = a.ci_estimator_sum_regret = kNaN;
        }
        out.push_back(a);
    }
    return out;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows)
{
    std::string out = "queries,n,mean_sum_regret,ci95_sum_regret,n_estimator,mean_estimator_sum_regret,"
                      "ci95_estimator_sum_regret\n";
    for (const auto& a : rows) {
        out += std::to_string(a.queries) + ',' + std::to_string(a.n) + ',' + format_double(a.mean_sum_regret) + ','
               + format_double(a.ci_sum_regret) + ',' + std::to_string(a.n_estimator) + ','
               + format_double(a.mean_estimator_sum_regret) + ',' + format_double(a.ci_estimator_sum_regret) + '\n';
    }
    return out;
}

std::string run_file_name(const ExperimentConfig& config, std::uint64_t seed)
{
    return to_string(config.algorithm) + '_' + make_problem(config.problem).name() + "_seed" + std::to_string(seed)
           + ".csv";
}

std::string aggregate_file_name(const ExperimentConfig& config)
{
    return to_string(config.algorithm) + '_' + make_problem(config.problem).name() + "_aggregate.csv";
}

std::vector<std::filesystem::path> emit_csv(const std::vector<RunRecord>& records,
                                            const std::filesystem::path& directory)
{
    if (records.empty())
        throw std::invalid_argument("no records to write");
    std::filesystem::create_directories(directory);
    auto write = [](const std::filesystem::path& path, const std::string& content) {
        std::ofstream out(path, std::ios::binary);
        out << content;
        out.close();
        if (!out)
            throw std::runtime_error("failed to write " + path.string());
    };
    std::vector<std::filesystem::path> written;
    std::map<std::string, std::size_t> seen;
    for (const auto& rec : records) {
        std::string name = run_file_name(rec.config, rec.seed);
        if (const std::size_t k = seen[name]++; k > 0)
            name.insert(name.size() - 4, "_" + std::to_string(k));
        written.push_back(directory / name);
        write(written.back(), run_csv(rec));
    }
    written.push_back(directory / aggregate_file_name(records.front().config));
    write(written.back(), aggregate_csv(aggregate(records)));
    return written;
}

double value_at_queries(const std::vector<TraceRow>& rows, std::size_t q, double TraceRow::*field)
{
    double v = kNaN;
    for (const auto& row : rows) {
        if (row.queries > q)
            break;
        if (!std::isnan(row.*field))
            v = row.*field;
    }
    return v;
}

}  // namespace bilbo
