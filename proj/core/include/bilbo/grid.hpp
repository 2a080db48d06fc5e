#pragma once

#include <cstddef>
#include <ranges>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace bilbo {

struct Bounds {
    double lo = 0.0;
    double hi = 1.0;
};

/// Position of a joint grid point as (upper slice, offset inside the lower slice).
struct PointIndex {
    std::size_t x = 0;
    std::size_t z = 0;

    friend bool operator==(const PointIndex&, const PointIndex&) = default;
};

/// Uniform lattice over X x Z with the same number of points per dimension.
///
/// Points are linearised row-major with the upper dimensions outermost, so
/// every lower slice {(x, z) : z in Z} occupies the contiguous range
/// [x * num_z(), (x + 1) * num_z()). Inside a block, the first dimension is
/// the most significant digit.
class Grid {
public:
    Grid(std::vector<Bounds> x_bounds, std::vector<Bounds> z_bounds, std::size_t points_per_dim);

    std::size_t points_per_dim() const { return m_; }
    std::size_t dim_x() const { return x_bounds_.size(); }
    std::size_t dim_z() const { return z_bounds_.size(); }
    std::size_t dim() const { return dim_x() + dim_z(); }
    std::size_t num_x() const { return num_x_; }
    std::size_t num_z() const { return num_z_; }
    std::size_t size() const { return num_x_ * num_z_; }

    const std::vector<Bounds>& x_bounds() const { return x_bounds_; }
    const std::vector<Bounds>& z_bounds() const { return z_bounds_; }

    std::size_t linear(PointIndex idx) const;
    PointIndex split(std::size_t linear_index) const;
    bool valid(PointIndex idx) const { return idx.x < num_x_ && idx.z < num_z_; }

    /// Value of lattice position k along a dimension with the given bounds.
    double axis_value(const Bounds& b, std::size_t k) const;

    Eigen::VectorXd x_coordinates(std::size_t x_idx) const;
    Eigen::VectorXd z_coordinates(std::size_t z_idx) const;
    std::pair<Eigen::VectorXd, Eigen::VectorXd> coordinates(PointIndex idx) const;

    /// Nearest lattice index for a coordinate; throws when outside the bounds.
    std::size_t x_index_of(std::span<const double> x) const;
    std::size_t z_index_of(std::span<const double> z) const;
    PointIndex index_of(std::span<const double> x, std::span<const double> z) const;

    /// Joint coordinate rescaled to the unit cube, x dimensions first.
    Eigen::VectorXd unit_point(PointIndex idx) const;
    /// Unit-cube coordinates of every upper point, one column per x index.
    Eigen::MatrixXd unit_x_points() const;
    /// Unit-cube coordinates of every joint point, one column per linear index.
    Eigen::MatrixXd unit_points() const;

    /// The m^{d_z} points sharing upper index x_idx, in increasing z order.
    auto lower_slice(std::size_t x_idx) const
    {
        check_x(x_idx);
        return std::views::iota(std::size_t{0}, num_z_)
            | std::views::transform([x_idx](std::size_t z) { return PointIndex{x_idx, z}; });
    }

private:
    void check_x(std::size_t x_idx) const;
    void digits(std::size_t flat, std::size_t ndim, std::span<std::size_t> out) const;
    std::size_t index_of_block(std::span<const double> v, const std::vector<Bounds>& bounds) const;

    std::vector<Bounds> x_bounds_;
    std::vector<Bounds> z_bounds_;
    std::size_t m_;
    std::size_t num_x_;
    std::size_t num_z_;
};

}  // namespace bilbo
