#include "psg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace psg {

namespace {

std::vector<Point> raster_centroids(std::size_t width, std::size_t height) {
    std::vector<Point> c;
    c.reserve(width * height);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t col = 0; col < width; ++col)
            c.push_back({static_cast<double>(col), static_cast<double>(r)});
    return c;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool is_raster_line(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char ch) { return ch == '.' || ch == '#'; });
}

} // namespace

Grid::Grid(std::size_t width, std::size_t height)
    : Grid(width, height, raster_centroids(width, height)) {}

Grid::Grid(std::size_t width, std::size_t height, std::vector<Point> centroids)
    : width_(width), height_(height), centroids_(std::move(centroids)) {
    if (width_ == 0 || height_ == 0) throw std::invalid_argument("grid must have at least one bin");
    if (centroids_.size() != width_ * height_)
        throw std::invalid_argument("centroid count does not match grid size");
    std::set<Point> seen(centroids_.begin(), centroids_.end());
    if (seen.size() != centroids_.size()) throw std::invalid_argument("bin centroids must be distinct");
}

std::size_t Grid::index(std::size_t row, std::size_t col) const {
    if (row >= height_ || col >= width_) throw std::out_of_range("grid coordinate out of range");
    return row * width_ + col;
}

const Point& Grid::centroid(std::size_t bin) const {
    if (bin >= centroids_.size()) throw std::out_of_range("bin index out of range");
    return centroids_[bin];
}

double bin_distance(const Grid& grid, std::size_t a, std::size_t b) {
    const Point& p = grid.centroid(a);
    const Point& q = grid.centroid(b);
    return std::abs(p[0] - q[0]) + std::abs(p[1] - q[1]);
}

double max_bin_distance(const Grid& grid) {
    double best = 0.0;
    const std::size_t n = grid.n_cell();
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) best = std::max(best, bin_distance(grid, a, b));
    return best;
}

Formation::Formation(DensityVector pi) : pi_(std::move(pi)) {
    for (std::size_t i = 0; i < pi_.size(); ++i)
        if (pi_[i] > 0.0) recurrent_.push_back(i);
    if (recurrent_.empty()) throw std::invalid_argument("formation has no recurrent bins");
}

FormationRaster parse_formation(std::string_view text) {
    FormationRaster raster;
    std::vector<std::vector<double>> rows;
    std::optional<bool> binary;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == ';') continue;

        std::vector<double> row;
        const bool raster_line = is_raster_line(line);
        if (binary && *binary != raster_line) {
            std::ostringstream os;
            os << "line " << line_no << ": mixes character raster and numeric rows";
            throw std::invalid_argument(os.str());
        }
        binary = raster_line;
        if (raster_line) {
            for (char ch : line) row.push_back(ch == '#' ? 1.0 : 0.0);
        } else {
            std::istringstream is{std::string(line)};
            std::string tok;
            while (is >> tok) {
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(tok, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != tok.size()) {
                    std::ostringstream os;
                    os << "line " << line_no << ": cannot parse '" << tok << "'";
                    throw std::invalid_argument(os.str());
                }
                if (v < 0.0 || !std::isfinite(v)) {
                    std::ostringstream os;
                    os << "line " << line_no << ": negative or non-finite weight " << tok;
                    throw std::invalid_argument(os.str());
                }
                row.push_back(v);
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            std::ostringstream os;
            os << "line " << line_no << ": ragged row (" << row.size() << " entries, expected "
               << rows.front().size() << ")";
            throw std::invalid_argument(os.str());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("formation has no rows");
    raster.height = rows.size();
    raster.width = rows.front().size();
    raster.binary = binary.value_or(false);
    for (auto& r : rows) raster.weights.insert(raster.weights.end(), r.begin(), r.end());
    if (std::all_of(raster.weights.begin(), raster.weights.end(), [](double w) { return w == 0.0; }))
        throw std::invalid_argument("formation is all zero");
    return raster;
}

Formation load_formation(std::string_view text, const Grid& grid) {
    FormationRaster raster = parse_formation(text);
    if (raster.width != grid.width() || raster.height != grid.height()) {
        std::ostringstream os;
        os << "formation is " << raster.width << "x" << raster.height << " but grid is " << grid.width()
           << "x" << grid.height();
        throw std::invalid_argument(os.str());
    }
    return Formation(DensityVector::from_weights(raster.weights));
}

FormationRaster read_formation_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open formation file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_formation(buf.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

ConstraintMatrix::ConstraintMatrix(std::size_t n, std::vector<std::uint8_t> allowed)
    : n_(n), allowed_(std::move(allowed)), reach_(n) {
    if (n_ == 0 || allowed_.size() != n_ * n_) throw std::invalid_argument("constraint matrix must be n*n");
    all_ones_ = true;
    for (std::size_t i = 0; i < n_; ++i) {
        if (!allowed_[i * n_ + i]) throw std::invalid_argument("constraint matrix needs unit diagonal");
        for (std::size_t j = 0; j < n_; ++j) {
            const bool a = allowed_[i * n_ + j] != 0;
            if (a != (allowed_[j * n_ + i] != 0)) throw std::invalid_argument("constraint matrix must be symmetric");
            if (a) reach_[i].push_back(j);
            else all_ones_ = false;
        }
    }
    std::vector<bool> seen(n_, false);
    std::deque<std::size_t> queue{0};
    seen[0] = true;
    std::size_t visited = 1;
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        for (std::size_t j : reach_[i])
            if (!seen[j]) {
                seen[j] = true;
                ++visited;
                queue.push_back(j);
            }
    }
    if (visited != n_) throw std::invalid_argument("constraint graph is not strongly connected");
}

ConstraintMatrix ConstraintMatrix::unconstrained(std::size_t n) {
    return ConstraintMatrix(n, std::vector<std::uint8_t>(n * n, 1));
}

ConstraintMatrix motion_constraints(const Grid& grid, double range) {
    const std::size_t n = grid.n_cell();
    if (range < 0.0) return ConstraintMatrix::unconstrained(n);
    std::vector<std::uint8_t> allowed(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double dr = std::abs(static_cast<double>(grid.row_of(i)) - static_cast<double>(grid.row_of(j)));
            const double dc = std::abs(static_cast<double>(grid.col_of(i)) - static_cast<double>(grid.col_of(j)));
            allowed[i * n + j] = (dr + dc <= range) ? 1 : 0;
        }
    return ConstraintMatrix(n, std::move(allowed));
}

bool check_pi_connectivity(const Formation& formation, const ConstraintMatrix& constraints) {
    const auto& rec = formation.recurrent();
    if (rec.size() <= 1) return true;
    std::vector<bool> seen(formation.n_cell(), false);
    std::deque<std::size_t> queue{rec.front()};
    seen[rec.front()] = true;
    std::size_t visited = 1;
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        for (std::size_t j : constraints.reachable(i))
            if (!seen[j] && formation.is_recurrent(j)) {
                seen[j] = true;
                ++visited;
                queue.push_back(j);
            }
    }
    return visited == rec.size();
}

std::string render_density(const Grid& grid, const DensityVector& density) {
    double peak = 0.0;
    for (double v : density.values()) peak = std::max(peak, v);
    std::string out;
    for (std::size_t r = 0; r < grid.height(); ++r) {
        for (std::size_t c = 0; c < grid.width(); ++c) {
            const double v = density[grid.index(r, c)];
            if (v <= 0.0) {
                out += '.';
            } else {
                const int level = std::clamp(static_cast<int>(std::ceil(9.0 * v / peak)), 1, 9);
                out += static_cast<char>('0' + level);
            }
        }
        out += '\n';
    }
    return out;
}

} // namespace psg
