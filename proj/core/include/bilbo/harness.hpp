#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bilbo/baselines.hpp"
#include "bilbo/grid.hpp"
#include "bilbo/optimizer.hpp"
#include "bilbo/oracle.hpp"
#include "bilbo/problems.hpp"

namespace bilbo {

enum class Algorithm { Bilbo, TrustedRand, Nested };

std::string to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view text);
std::string to_string(LowerSetVariant v);
std::optional<LowerSetVariant> parse_lower_set_variant(std::string_view text);
std::string to_string(EstimatorKind k);
std::optional<EstimatorKind> parse_estimator(std::string_view text);

struct ExperimentConfig {
    std::string problem = "branin_goldstein";
    Algorithm algorithm = Algorithm::Bilbo;
    std::vector<std::uint64_t> seeds{0};
    std::size_t total_queries = 200;
    double delta = 0.05;
    double epsilon = 0.0;
    double beta_scale = 1.0;
    LowerSetVariant p_variant = LowerSetVariant::PPlus;
    std::size_t grid_m = 100;
    std::size_t init_observations = 3;
    double lengthscale = 0.2;
    double noise_std = 0.01;
    EstimatorKind estimator = EstimatorKind::PosteriorMeanInTrusted;
    NestedConfig nested;
    bool refit_hyperparameters = true;
    bool audit = true;
    bool record_timing = true;
    std::size_t jobs = 1;
    std::filesystem::path output_dir = "results";
    std::optional<std::filesystem::path> cache_dir;

    /// Per-problem defaults (lengthscale, grid size, lower-set variant).
    static ExperimentConfig preset(std::string_view problem);
    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
};

/// Flat key=value settings. Keys use underscores; '#' starts a comment.
using Settings = std::map<std::string, std::string>;

Settings parse_settings(std::string_view text);
Settings read_settings_file(const std::filesystem::path& path);
/// Starts from the preset of settings["problem"] (if given) and applies
/// every other key. Unknown keys and malformed values throw.
ExperimentConfig make_config(const Settings& settings);
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

/// Seeded uniform sample of distinct grid points (all points if count >= size).
std::vector<PointIndex> calibration_sample(const Grid& grid, std::size_t count, std::uint64_t seed);

struct Normalization {
    std::vector<OutputMap> maps;
    std::vector<std::string> warnings;
};

/// Objectives map to zero mean, unit deviation on the sample. Constraints
/// are only scaled so that the sign (feasibility) is preserved. A zero
/// deviation keeps unit scale and adds a warning.
Normalization normalize_outputs(const BilevelProblem& problem, const Grid& grid,
                                const std::vector<PointIndex>& sample);

/// Problem with frozen output maps, its grid and ground truth.
struct Experiment {
    BilevelProblem problem;
    Grid grid;
    GroundTruth truth;
    std::vector<std::string> warnings;
};

Experiment prepare_experiment(const ExperimentConfig& config);

/// One CSV row. Missing numbers are NaN and written as empty fields.
struct TraceRow {
    std::size_t iter = 0;
    std::size_t queries = 0;
    std::string algo;
    std::string problem;
    std::uint64_t seed = 0;
    double r_F = 0.0;
    double r_f = 0.0;
    double r_c_sum = 0.0;
    double r_t = 0.0;
    double sum_regret = 0.0;
    double R_T = 0.0;
    double estimator_sum_regret = 0.0;
    std::string h_t;
    bool reassigned = false;
    bool containment_ok = false;
    bool bound_ok = false;
    double wall_ms = 0.0;
    std::string reason;

    /// Field-wise equality; NaN equals NaN.
    friend bool operator==(const TraceRow& a, const TraceRow& b);
};

struct AuditSummary {
    std::size_t rows = 0;
    std::size_t containment_rows = 0;
    std::size_t inclusion_failures = 0;   ///< containment rows where (x*, z*) left S+ and P+
    std::size_t bound_failures = 0;       ///< containment rows violating a query bound
    std::size_t set_bound_failures = 0;   ///< containment rows violating a trusted-set bound
    std::size_t constraint_points_checked = 0;
    std::size_t lower_points_checked = 0;
    bool full_containment = false;        ///< every audited row had containment
};

struct RunRecord {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::vector<TraceRow> rows;
    bool infeasible = false;
    std::string reason;
    AuditSummary audit;
    std::optional<PointIndex> final_estimate;
    std::optional<PointIndex> min_max_estimate;
    std::vector<double> regret_bounds;  ///< per BILBO iteration, 4 sqrt(beta) max sigma
    double max_multi_solution_fraction = 0.0;  ///< max over iterations of share of x with >= 2 points in P+
    std::size_t observations = 0;
};

RunRecord run_seed(const ExperimentConfig& config, const Experiment& experiment, std::uint64_t seed);
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const Experiment& experiment);

std::string csv_header();
std::string format_row(const TraceRow& row);
std::string run_csv(const RunRecord& record);
std::vector<TraceRow> parse_run_csv(std::string_view text);

struct AggregateRow {
    std::size_t queries = 0;
    std::size_t n = 0;
    double mean_sum_regret = 0.0;
    double ci_sum_regret = 0.0;
    std::size_t n_estimator = 0;
    double mean_estimator_sum_regret = 0.0;
    double ci_estimator_sum_regret = 0.0;
};

/// Mean and 1.96 sd / sqrt(n) per query count, over the runs that have a
/// row at that count.
std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

std::string run_file_name(const ExperimentConfig& config, std::uint64_t seed);
std::string aggregate_file_name(const ExperimentConfig& config);
/// Writes one CSV per run plus the aggregate; returns the paths written.
std::vector<std::filesystem::path> emit_csv(const std::vector<RunRecord>& records,
                                            const std::filesystem::path& directory);

/// Value of `field` on the last row with queries <= q, or NaN.
double value_at_queries(const std::vector<TraceRow>& rows, std::size_t q, double TraceRow::*field);

/// Shortest round-trip decimal text of a double; empty for NaN.
std::string format_double(double v);

}  // namespace bilbo
