// Command-line front end: run experiments and inspect ground truth.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bilbo/harness.hpp"

namespace {

int run_command(const std::string& config_file, const bilbo::Settings& overrides)
{
    bilbo::Settings settings;
    if (!config_file.empty())
        settings = bilbo::read_settings_file(config_file);
    for (const auto& [k, v] : overrides)
        settings[k] = v;
    const bilbo::ExperimentConfig config = bilbo::make_config(settings);

    const bilbo::Experiment experiment = bilbo::prepare_experiment(config);
    for (const auto& w : experiment.warnings)
        std::cerr << "warning: " << w << '\n';
    std::cerr << "problem " << experiment.problem.name() << ": " << experiment.grid.size() << " grid points, "
              << experiment.problem.num_functions() << " functions\n";

    const auto records = bilbo::run_experiment(config, experiment);
    const auto files = bilbo::emit_csv(records, config.output_dir);

    std::size_t infeasible = 0;
    for (const auto& rec : records) {
        infeasible += rec.infeasible ? 1 : 0;
        const double final_regret = rec.rows.empty() ? 0.0 : rec.rows.back().estimator_sum_regret;
        std::cout << bilbo::to_string(config.algorithm) << " seed " << rec.seed << ": " << rec.observations
                  << " observations, final estimator sum-regret " << bilbo::format_double(final_regret);
        if (rec.infeasible)
            std::cout << " (" << rec.reason << ')';
        std::cout << '\n';
    }
    for (const auto& f : files)
        std::cout << "wrote " << f.string() << '\n';
    return infeasible == records.size() ? 2 : 0;
}

int ground_truth_command(const std::string& problem_name, std::size_t m, const std::string& cache_dir)
{
    bilbo::Settings settings{{"problem", problem_name}};
    if (m > 0)
        settings["grid_m"] = std::to_string(m);
    if (!cache_dir.empty())
        settings["cache_dir"] = cache_dir;
    const bilbo::ExperimentConfig config = bilbo::make_config(settings);
    const bilbo::Experiment e = bilbo::prepare_experiment(config);
    const auto& gt = e.truth;
    const auto [x, z] = e.grid.coordinates(gt.best);
    std::size_t multi = 0;
    for (const auto& zs : gt.z_star)
        multi += zs.size() > 1 ? 1 : 0;
    std::cout << "problem        " << gt.problem << '\n'
              << "grid           m=" << gt.points_per_dim << ", " << e.grid.size() << " points\n"
              << "feasible       " << bilbo::count(gt.feasible) << '\n'
              << "best index     x=" << gt.best.x << " z=" << gt.best.z << '\n'
              << "best x         " << x.transpose() << '\n'
              << "best z         " << z.transpose() << '\n'
              << "best F         " << bilbo::format_double(gt.best_value) << '\n'
              << "optima at tie  " << gt.best_multiplicity << '\n'
              << "x with |z*|>1  " << multi << " of " << gt.z_star.size() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bilevel Bayesian optimisation experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run seeded experiments and write CSV traces");
    std::string config_file;
    run->add_option("--config", config_file, "key=value settings file")->check(CLI::ExistingFile);
    bilbo::Settings overrides;
    std::vector<std::string> extra;
    const std::vector<std::pair<std::string, std::string>> flags = {
        {"--problem", "branin_goldstein, smd2, smd6 or smd12"},
        {"--algo", "bilbo, trustedrand or nested"},
        {"--seeds", "comma list, ranges allowed (0-4)"},
        {"--queries", "total observation budget"},
        {"--delta", "confidence parameter in (0, 1)"},
        {"--epsilon", "lower-level optimality slack"},
        {"--p-variant", "P_plus or P_bar"},
        {"--grid-m", "grid points per dimension"},
        {"--out", "output directory"},
        {"--beta-scale", "multiplier on the confidence schedule (default 1)"},
        {"--estimator", "posterior_mean or min_max"},
        {"--jobs", "seeds run in parallel"},
        {"--cache-dir", "ground-truth cache directory"},
    };
    std::vector<std::string> values(flags.size());
    for (std::size_t i = 0; i < flags.size(); ++i)
        run->add_option(flags[i].first, values[i], flags[i].second);
    run->add_option("--set", extra, "additional key=value settings");

    auto* gt = app.add_subcommand("ground-truth", "brute-force the bilevel optimum on a grid");
    std::string gt_problem = "branin_goldstein";
    std::size_t gt_m = 0;
    std::string gt_cache;
    gt->add_option("--problem", gt_problem, "problem name");
    gt->add_option("--grid-m", gt_m, "grid points per dimension (default: problem preset)");
    gt->add_option("--cache-dir", gt_cache, "ground-truth cache directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            for (std::size_t i = 0; i < flags.size(); ++i) {
                if (run->count(flags[i].first) > 0) {
                    std::string key = flags[i].first.substr(2);
                    std::replace(key.begin(), key.end(), '-', '_');
                    overrides[key] = values[i];
                }
            }
            for (const auto& kv : extra) {
                const auto parsed = bilbo::parse_settings(kv);
                for (const auto& [k, v] : parsed)
                    overrides[k] = v;
            }
            return run_command(config_file, overrides);
        }
        return ground_truth_command(gt_problem, gt_m, gt_cache);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
