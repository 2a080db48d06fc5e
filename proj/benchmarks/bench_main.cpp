#include <benchmark/benchmark.h>

#include <random>

#include "bilbo/harness.hpp"

using namespace bilbo;

namespace {

const Experiment& branin()
{
    static const Experiment e = prepare_experiment(make_config({{"problem", "branin_goldstein"}}));
    return e;
}

}  // namespace

static void GpPosteriorGrid(benchmark::State& state)
{
    const Grid& grid = branin().grid;
    const Eigen::MatrixXd points = grid.unit_points();
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    GPDataset data(grid.dim());
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        const Eigen::Index c = static_cast<Eigen::Index>(pick(rng));
        data.add(points.col(c), std::sin(3.0 * points.col(c).sum()));
    }
    const GPHyperparams hp;
    for (auto _ : state) {
        GPPosterior post = posterior(data, hp, points);
        benchmark::DoNotOptimize(post.mean.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(GpPosteriorGrid)->RangeMultiplier(2)->Range(8, 256)->Unit(benchmark::kMillisecond)->Complexity();

static void FitMle(benchmark::State& state)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GPDataset data(2);
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        Eigen::Vector2d x(unit(rng), unit(rng));
        data.add(x, std::sin(3.0 * x.sum()));
    }
    for (auto _ : state) {
        GPHyperparams hp = fit_mle(data, GPHyperparams{});
        benchmark::DoNotOptimize(hp.lengthscale);
    }
}
BENCHMARK(FitMle)->Arg(25)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

static void TrustedSetsBranin(benchmark::State& state)
{
    const Experiment& e = branin();
    SurrogateModels models(e.problem, e.grid, default_hyperparams(e.problem, 0.2));
    std::mt19937_64 rng(3);
    initialize_uniform(models, 10, rng);
    const ConfidenceField field = confidence_bounds(models.posteriors(), 30.0);
    for (auto _ : state) {
        TrustedSets sets = build_trusted_sets(field, models.layout(), e.grid, 0.0, LowerSetVariant::PPlus);
        benchmark::DoNotOptimize(sets);
    }
}
BENCHMARK(TrustedSetsBranin)->Unit(benchmark::kMillisecond);

static void BilboStepBranin(benchmark::State& state)
{
    const Experiment& e = branin();
    SurrogateModels base(e.problem, e.grid, default_hyperparams(e.problem, 0.2));
    std::mt19937_64 rng(4);
    initialize_uniform(base, 3, rng);
    {
        Bilbo warm(base, {});
        for (std::int64_t i = 0; i < state.range(0); ++i)
            warm.step(rng);
    }
    for (auto _ : state) {
        state.PauseTiming();
        SurrogateModels models = base;
        Bilbo bilbo(models, {});
        state.ResumeTiming();
        auto result = bilbo.step(rng);
        benchmark::DoNotOptimize(result);
    }
}
BENCHMARK(BilboStepBranin)->Arg(0)->Arg(50)->Arg(150)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
