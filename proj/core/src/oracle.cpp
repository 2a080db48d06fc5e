#include "bilbo/oracle.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace bilbo {

bool GroundTruth::is_lower_optimal(PointIndex p) const
{
    const auto& zs = z_star.at(p.x);
    return std::binary_search(zs.begin(), zs.end(), p.z);
}

GroundTruth solve_ground_truth(const BilevelProblem& problem, const Grid& grid, double tie_tolerance)
{
    if (grid.dim_x() != problem.dim_x() || grid.dim_z() != problem.dim_z())
        throw std::invalid_argument("grid dimensions do not match the problem");
    if (!(tie_tolerance >= 0.0))
        throw std::invalid_argument("tie tolerance must be nonnegative");

    const FunctionLayout layout = problem.layout();
    GroundTruth gt;
    gt.problem = problem.name();
    gt.dim_x = grid.dim_x();
    gt.dim_z = grid.dim_z();
    gt.points_per_dim = grid.points_per_dim();
    gt.n_upper_constraints = layout.n_upper_constraints();
    gt.n_lower_constraints = layout.n_lower_constraints();
    gt.tie_tolerance = tie_tolerance;

    const std::size_t n = grid.size();
    const std::size_t nz = grid.num_z();
    gt.values.assign(layout.size(), std::vector<double>(n));
    gt.feasible.assign(n, true);
    gt.lower_feasible.assign(n, true);

    for (std::size_t x = 0; x < grid.num_x(); ++x) {
        const Eigen::VectorXd xv = grid.x_coordinates(x);
        for (std::size_t z = 0; z < nz; ++z) {
            const Eigen::VectorXd zv = grid.z_coordinates(z);
            const std::size_t i = x * nz + z;
            for (std::size_t fn = 0; fn < layout.size(); ++fn) {
                const double v = problem.evaluate(layout.id(fn), {xv.data(), static_cast<std::size_t>(xv.size())},
                                                  {zv.data(), static_cast<std::size_t>(zv.size())});
                gt.values[fn][i] = v;
                if (fn >= layout.first_upper_constraint() && v < 0.0) {
                    gt.feasible[i] = false;
                    if (fn >= layout.first_lower_constraint())
                        gt.lower_feasible[i] = false;
                }
            }
        }
    }

    const auto& f = gt.values[FunctionLayout::lower_objective_index];
    const auto& F = gt.values[FunctionLayout::upper_objective_index];
    gt.z_star.assign(grid.num_x(), {});
    gt.f_star.assign(grid.num_x(), std::nullopt);
    for (std::size_t x = 0; x < grid.num_x(); ++x) {
        const std::size_t base = x * nz;
        double slice_max = -std::numeric_limits<double>::infinity();
        for (std::size_t z = 0; z < nz; ++z) {
            if (gt.lower_feasible[base + z])
                slice_max = std::max(slice_max, f[base + z]);
        }
        if (slice_max == -std::numeric_limits<double>::infinity())
            continue;
        gt.f_star[x] = slice_max;
        for (std::size_t z = 0; z < nz; ++z) {
            if (gt.lower_feasible[base + z] && f[base + z] >= slice_max - tie_tolerance)
                gt.z_star[x].push_back(z);
        }
    }

    bool found = false;
    for (std::size_t x = 0; x < grid.num_x(); ++x) {
        for (std::size_t z : gt.z_star[x]) {
            const std::size_t i = x * nz + z;
            if (!gt.feasible[i])
                continue;
            if (!found || F[i] > gt.best_value) {
                gt.best = {x, z};
                gt.best_value = F[i];
                found = true;
            }
        }
    }
    if (!found)
        throw std::runtime_error("problem " + problem.name() + " has no bilevel-feasible point on the grid");

    for (std::size_t x = 0; x < grid.num_x(); ++x) {
        for (std::size_t z : gt.z_star[x]) {
            const std::size_t i = x * nz + z;
            if (gt.feasible[i] && F[i] >= gt.best_value - tie_tolerance)
                ++gt.best_multiplicity;
        }
    }
    return gt;
}

double RegretComponents::constraint_sum() const
{
    double s = 0.0;
    for (double r : r_c)
        s += r;
    return s;
}

RegretComponents instantaneous_regret(const GroundTruth& truth, PointIndex p)
{
    const FunctionLayout layout = truth.layout();
    if (p.x >= truth.z_star.size() || p.z >= truth.num_z())
        throw std::out_of_range("point outside ground-truth grid");
    RegretComponents r;
    r.r_F = std::max(0.0, truth.best_value - truth.value(FunctionLayout::upper_objective_index, p));
    if (truth.f_star[p.x]) {
        r.r_f = *truth.f_star[p.x] - truth.value(FunctionLayout::lower_objective_index, p);
    } else {
        r.lower_infeasible = true;
    }
    r.r_t = std::max(r.r_F, r.r_f);
    for (std::size_t c = layout.first_upper_constraint(); c < layout.size(); ++c) {
        const double rc = std::max(0.0, -truth.value(c, p));
        r.r_c.push_back(rc);
        r.r_t = std::max(r.r_t, rc);
    }
    return r;
}

void RegretTrace::accumulate(double r_t)
{
    r_.push_back(r_t);
    cumulative_.push_back(cumulative() + r_t);
}

namespace {

constexpr std::array<char, 7> kMagic = {'B', 'I', 'L', 'B', 'O', 'G', 'T'};
constexpr std::uint8_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary)
    {
        if (!out_)
            throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void mask(const Mask& m)
    {
        u64(m.size());
        std::vector<std::uint8_t> packed((m.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i])
                packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        }
        bytes(packed.data(), packed.size());
    }
    void finish()
    {
        out_.flush();
        if (!out_)
            throw std::runtime_error("failed writing ground-truth cache");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary)
    {
        if (!in_)
            throw std::runtime_error("cannot open " + path.string());
    }
    void bytes(void* p, std::size_t n)
    {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_)
            throw std::runtime_error("truncated ground-truth cache");
    }
    std::uint64_t u64()
    {
        std::uint64_t v = 0;
        bytes(&v, sizeof v);
        return v;
    }
    double f64()
    {
        double v = 0;
        bytes(&v, sizeof v);
        return v;
    }
    Mask mask()
    {
        const auto n = u64();
        std::vector<std::uint8_t> packed((n + 7) / 8);
        bytes(packed.data(), packed.size());
        Mask m(n);
        for (std::size_t i = 0; i < n; ++i)
            m[i] = (packed[i / 8] >> (i % 8)) & 1u;
        return m;
    }

private:
    std::ifstream in_;
};

}  // namespace

void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path)
{
    Writer w(path);
    w.bytes(kMagic.data(), kMagic.size());
    w.bytes(&kVersion, 1);
    w.u64(truth.problem.size());
    w.bytes(truth.problem.data(), truth.problem.size());
    w.u64(truth.dim_x);
    w.u64(truth.dim_z);
    w.u64(truth.points_per_dim);
    w.u64(truth.n_upper_constraints);
    w.u64(truth.n_lower_constraints);
    w.f64(truth.tie_tolerance);
    w.u64(truth.values.size());
    for (const auto& v : truth.values) {
        w.u64(v.size());
        w.bytes(v.data(), v.size() * sizeof(double));
    }
    w.mask(truth.feasible);
    w.mask(truth.lower_feasible);
    w.u64(truth.z_star.size());
    for (std::size_t x = 0; x < truth.z_star.size(); ++x) {
        w.u64(truth.z_star[x].size());
        for (std::size_t z : truth.z_star[x])
            w.u64(z);
        const std::uint8_t has = truth.f_star[x].has_value();
        w.bytes(&has, 1);
        w.f64(truth.f_star[x].value_or(0.0));
    }
    w.u64(truth.best.x);
    w.u64(truth.best.z);
    w.f64(truth.best_value);
    w.u64(truth.best_multiplicity);
    w.finish();
}

GroundTruth load_ground_truth(const std::filesystem::path& path)
{
    Reader r(path);
    std::array<char, 7> magic{};
    r.bytes(magic.data(), magic.size());
    std::uint8_t version = 0;
    r.bytes(&version, 1);
    if (magic != kMagic || version != kVersion)
        throw std::runtime_error("not a ground-truth cache (version " + std::to_string(version) + ")");
    GroundTruth gt;
    gt.problem.resize(r.u64());
    r.bytes(gt.problem.data(), gt.problem.size());
    gt.dim_x = r.u64();
    gt.dim_z = r.u64();
    gt.points_per_dim = r.u64();
    gt.n_upper_constraints = r.u64();
    gt.n_lower_constraints = r.u64();
    gt.tie_tolerance = r.f64();
    gt.values.resize(r.u64());
    for (auto& v : gt.values) {
        v.resize(r.u64());
        r.bytes(v.data(), v.size() * sizeof(double));
    }
    gt.feasible = r.mask();
    gt.lower_feasible = r.mask();
    const auto nx = r.u64();
    gt.z_star.resize(nx);
    gt.f_star.resize(nx);
    for (std::size_t x = 0; x < nx; ++x) {
        gt.z_star[x].resize(r.u64());
        for (auto& z : gt.z_star[x])
            z = r.u64();
        std::uint8_t has = 0;
        r.bytes(&has, 1);
        const double v = r.f64();
        if (has)
            gt.f_star[x] = v;
    }
    gt.best.x = r.u64();
    gt.best.z = r.u64();
    gt.best_value = r.f64();
    gt.best_multiplicity = r.u64();
    return gt;
}

std::filesystem::path ground_truth_cache_name(const std::string& problem, std::size_t points_per_dim)
{
    return problem + "_m" + std::to_string(points_per_dim) + ".gt";
}

}  // namespace bilbo
