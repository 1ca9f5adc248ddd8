#pragma once

#include "psg/probability.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace psg {

using Point = std::array<double, 2>;

/// Rectangular bin partition. Bins are indexed row-major; the default
/// centroid of bin (row, col) is (x = col, y = row) in grid units.
class Grid {
public:
    Grid(std::size_t width, std::size_t height);
    /// Custom centroids, one per bin in row-major order; must be pairwise distinct.
    Grid(std::size_t width, std::size_t height, std::vector<Point> centroids);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t n_cell() const noexcept { return width_ * height_; }

    std::size_t index(std::size_t row, std::size_t col) const;
    std::size_t row_of(std::size_t bin) const { return bin / width_; }
    std::size_t col_of(std::size_t bin) const { return bin % width_; }

    const Point& centroid(std::size_t bin) const;
    const std::vector<Point>& centroids() const noexcept { return centroids_; }

private:
    std::size_t width_;
    std::size_t height_;
    std::vector<Point> centroids_;
};

/// l1 distance between bin centroids.
double bin_distance(const Grid& grid, std::size_t a, std::size_t b);

/// Largest l1 distance between any two bin centroids.
double max_bin_distance(const Grid& grid);

/// Desired formation: the target density and its support (recurrent bins).
class Formation {
public:
    explicit Formation(DensityVector pi);

    const DensityVector& pi() const noexcept { return pi_; }
    const std::vector<std::size_t>& recurrent() const noexcept { return recurrent_; }
    std::size_t n_rec() const noexcept { return recurrent_.size(); }
    std::size_t n_cell() const noexcept { return pi_.size(); }
    bool is_recurrent(std::size_t bin) const { return pi_[bin] > 0.0; }

private:
    DensityVector pi_;
    std::vector<std::size_t> recurrent_;
};

/// Parsed formation file before normalization.
struct FormationRaster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> weights; // row-major
    bool binary = false;
};

/// Parses a '.'/'#' raster or a whitespace-separated numeric matrix. Lines
/// starting with ';' are comments; blank lines are skipped.
FormationRaster parse_formation(std::string_view text);

/// Builds the formation for `grid`, checking the raster has matching dimensions.
Formation load_formation(std::string_view text, const Grid& grid);

/// Reads and parses a formation file; errors name the path.
FormationRaster read_formation_file(const std::string& path);

/// Symmetric 0/1 reachability between bins with self-loops. Construction
/// enforces symmetry, unit diagonal, and connectivity of the induced graph.
class ConstraintMatrix {
public:
    /// Row-major n*n 0/1 entries.
    ConstraintMatrix(std::size_t n, std::vector<std::uint8_t> allowed);

    static ConstraintMatrix unconstrained(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    bool allowed(std::size_t from, std::size_t to) const { return allowed_[from * n_ + to] != 0; }
    /// Reachable bins from `bin`, including itself, ascending.
    const std::vector<std::size_t>& reachable(std::size_t bin) const { return reach_[bin]; }
    bool is_all_ones() const noexcept { return all_ones_; }

private:
    std::size_t n_;
    std::vector<std::uint8_t> allowed_;
    std::vector<std::vector<std::size_t>> reach_;
    bool all_ones_ = false;
};

/// Bins within l1 hop `range` of each other (on raster coordinates) are mutually reachable.
/// A negative range means unconstrained.
ConstraintMatrix motion_constraints(const Grid& grid, double range);

/// True iff every recurrent bin can reach every other using only moves inside the support.
bool check_pi_connectivity(const Formation& formation, const ConstraintMatrix& constraints);

/// ASCII rendering of a density on the grid ('.' empty, digits 1-9 by relative mass).
std::string render_density(const Grid& grid, const DensityVector& density);

} // namespace psg
