#pragma once

#include "psg/grid.hpp"
#include "psg/guidance.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace psg {

/// Bins riding passive relative orbits. The logical raster (bin ids, pi, A)
/// never changes; only the centroids move with the step k.
///
/// With x = column and y = row of bin i:
///   kappa_k[i] = ( 0.5 (1 + x/15) sin(pi k/10 + pi y/300),
///                        (1 + x/15) cos(pi k/10 + pi y/300) )
class OrbitGridAdapter {
public:
    static constexpr std::uint64_t kPeriod = 20;

    explicit OrbitGridAdapter(Grid base);

    const Grid& base() const noexcept { return base_; }

    Point bin_centroid_at(std::size_t bin, std::uint64_t k) const;
    std::vector<Point> centroids_at(std::uint64_t k) const;

    /// Grid whose centroids are the step-k orbit positions.
    Grid grid_at(std::uint64_t k) const;

    /// Distance-based alpha using instantaneous l1 distances at step k.
    AlphaVector orbit_alpha_vector(std::size_t c, std::uint64_t k) const;

private:
    Grid base_;
};

/// Evaluates the centroid formula directly for raster coordinates (x, y).
Point orbit_centroid(double x, double y, std::uint64_t k);

} // namespace psg
