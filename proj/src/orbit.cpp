#include "psg/orbit.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace psg {

Point orbit_centroid(double x, double y, std::uint64_t k) {
    // Reducing k keeps the phase small, so period 20 holds bit for bit.
    const long double pi = std::numbers::pi_v<long double>;
    const long double kk = static_cast<long double>(k % OrbitGridAdapter::kPeriod);
    const long double phase = pi * kk / 10.0L + pi * static_cast<long double>(y) / 300.0L;
    const long double amp = 1.0L + static_cast<long double>(x) / 15.0L;
    return {static_cast<double>(0.5L * amp * std::sin(phase)), static_cast<double>(amp * std::cos(phase))};
}

OrbitGridAdapter::OrbitGridAdapter(Grid base) : base_(std::move(base)) {}

Point OrbitGridAdapter::bin_centroid_at(std::size_t bin, std::uint64_t k) const {
    if (bin >= base_.n_cell()) throw std::out_of_range("bin index out of range");
    return orbit_centroid(static_cast<double>(base_.col_of(bin)), static_cast<double>(base_.row_of(bin)), k);
}

std::vector<Point> OrbitGridAdapter::centroids_at(std::uint64_t k) const {
    std::vector<Point> out(base_.n_cell());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = bin_centroid_at(i, k);
    return out;
}

Grid OrbitGridAdapter::grid_at(std::uint64_t k) const {
    return Grid(base_.width(), base_.height(), centroids_at(k));
}

AlphaVector OrbitGridAdapter::orbit_alpha_vector(std::size_t c, std::uint64_t k) const {
    const Point pc = bin_centroid_at(c, k);
    std::vector<double> d(base_.n_cell());
    for (std::size_t l = 0; l < d.size(); ++l) {
        const Point p = bin_centroid_at(l, k);
        d[l] = std::abs(p[0] - pc[0]) + std::abs(p[1] - pc[1]);
    }
    return alpha_from_distances(d);
}

} // namespace psg
