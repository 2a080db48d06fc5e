#include "bilbo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bilbo {

namespace {

std::size_t checked_pow(std::size_t base, std::size_t exp)
{
    std::size_t out = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (out > std::numeric_limits<std::size_t>::max() / base)
            throw std::invalid_argument("grid too large");
        out *= base;
    }
    return out;
}

void check_bounds(const std::vector<Bounds>& bounds, const char* level)
{
    for (const auto& b : bounds) {
        if (!(b.lo < b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi))
            throw std::invalid_argument(std::string("degenerate ") + level + " bounds");
    }
}

}  // namespace

Grid::Grid(std::vector<Bounds> x_bounds, std::vector<Bounds> z_bounds, std::size_t points_per_dim)
    : x_bounds_(std::move(x_bounds)), z_bounds_(std::move(z_bounds)), m_(points_per_dim)
{
    if (m_ < 2)
        throw std::invalid_argument("grid needs at least 2 points per dimension");
    if (x_bounds_.empty() || z_bounds_.empty())
        throw std::invalid_argument("grid needs at least one upper and one lower dimension");
    check_bounds(x_bounds_, "upper");
    check_bounds(z_bounds_, "lower");
    num_x_ = checked_pow(m_, x_bounds_.size());
    num_z_ = checked_pow(m_, z_bounds_.size());
    if (num_x_ > std::numeric_limits<std::size_t>::max() / num_z_)
        throw std::invalid_argument("grid too large");
}

std::size_t Grid::linear(PointIndex idx) const
{
    if (!valid(idx))
        throw std::out_of_range("point index outside grid");
    return idx.x * num_z_ + idx.z;
}

PointIndex Grid::split(std::size_t linear_index) const
{
    if (linear_index >= size())
        throw std::out_of_range("linear index outside grid");
    return {linear_index / num_z_, linear_index % num_z_};
}

double Grid::axis_value(const Bounds& b, std::size_t k) const
{
    // k/(m-1) first keeps the midpoint and endpoints exact.
    const double frac = static_cast<double>(k) / static_cast<double>(m_ - 1);
    return b.lo + (b.hi - b.lo) * frac;
}

void Grid::digits(std::size_t flat, std::size_t ndim, std::span<std::size_t> out) const
{
    for (std::size_t d = ndim; d-- > 0;) {
        out[d] = flat % m_;
        flat /= m_;
    }
}

void Grid::check_x(std::size_t x_idx) const
{
    if (x_idx >= num_x_)
        throw std::out_of_range("upper index outside grid");
}

Eigen::VectorXd Grid::x_coordinates(std::size_t x_idx) const
{
    check_x(x_idx);
    std::vector<std::size_t> d(dim_x());
    digits(x_idx, dim_x(), d);
    Eigen::VectorXd out(dim_x());
    for (std::size_t i = 0; i < dim_x(); ++i)
        out[static_cast<Eigen::Index>(i)] = axis_value(x_bounds_[i], d[i]);
    return out;
}

Eigen::VectorXd Grid::z_coordinates(std::size_t z_idx) const
{
    if (z_idx >= num_z_)
        throw std::out_of_range("lower index outside grid");
    std::vector<std::size_t> d(dim_z());
    digits(z_idx, dim_z(), d);
    Eigen::VectorXd out(dim_z());
    for (std::size_t i = 0; i < dim_z(); ++i)
        out[static_cast<Eigen::Index>(i)] = axis_value(z_bounds_[i], d[i]);
    return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Grid::coordinates(PointIndex idx) const
{
    if (!valid(idx))
        throw std::out_of_range("point index outside grid");
    return {x_coordinates(idx.x), z_coordinates(idx.z)};
}

std::size_t Grid::index_of_block(std::span<const double> v, const std::vector<Bounds>& bounds) const
{
    if (v.size() != bounds.size())
        throw std::invalid_argument("coordinate dimension mismatch");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        const auto& b = bounds[i];
        const double spacing = (b.hi - b.lo) / static_cast<double>(m_ - 1);
        if (v[i] < b.lo - 0.5 * spacing || v[i] > b.hi + 0.5 * spacing)
            throw std::out_of_range("coordinate outside grid bounds");
        const double pos = std::round((v[i] - b.lo) / spacing);
        const auto k = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(m_ - 1)));
        flat = flat * m_ + k;
    }
    return flat;
}

std::size_t Grid::x_index_of(std::span<const double> x) const { return index_of_block(x, x_bounds_); }

std::size_t Grid::z_index_of(std::span<const double> z) const { return index_of_block(z, z_bounds_); }

PointIndex Grid::index_of(std::span<const double> x, std::span<const double> z) const
{
    return {x_index_of(x), z_index_of(z)};
}

Eigen::VectorXd Grid::unit_point(PointIndex idx) const
{
    if (!valid(idx))
        throw std::out_of_range("point index outside grid");
    std::vector<std::size_t> dx(dim_x()), dz(dim_z());
    digits(idx.x, dim_x(), dx);
    digits(idx.z, dim_z(), dz);
    Eigen::VectorXd out(dim());
    const double denom = static_cast<double>(m_ - 1);
    for (std::size_t i = 0; i < dim_x(); ++i)
        out[static_cast<Eigen::Index>(i)] = static_cast<double>(dx[i]) / denom;
    for (std::size_t i = 0; i < dim_z(); ++i)
        out[static_cast<Eigen::Index>(dim_x() + i)] = static_cast<double>(dz[i]) / denom;
    return out;
}

Eigen::MatrixXd Grid::unit_x_points() const
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(dim_x()), static_cast<Eigen::Index>(num_x_));
    std::vector<std::size_t> d(dim_x());
    const double denom = static_cast<double>(m_ - 1);
    for (std::size_t x = 0; x < num_x_; ++x) {
        digits(x, dim_x(), d);
        for (std::size_t i = 0; i < dim_x(); ++i)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(x)) = static_cast<double>(d[i]) / denom;
    }
    return out;
}

Eigen::MatrixXd Grid::unit_points() const
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(size()));
    std::vector<std::size_t> dx(dim_x()), dz(dim_z());
    const double denom = static_cast<double>(m_ - 1);
    for (std::size_t x = 0; x < num_x_; ++x) {
        digits(x, dim_x(), dx);
        for (std::size_t z = 0; z < num_z_; ++z) {
            digits(z, dim_z(), dz);
            const auto col = static_cast<Eigen::Index>(x * num_z_ + z);
            for (std::size_t i = 0; i < dim_x(); ++i)
                out(static_cast<Eigen::Index>(i), col) = static_cast<double>(dx[i]) / denom;
            for (std::size_t i = 0; i < dim_z(); ++i)
                out(static_cast<Eigen::Index>(dim_x() + i), col) = static_cast<double>(dz[i]) / denom;
        }
    }
    return out;
}

}  // namespace bilbo
