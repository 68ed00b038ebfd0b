#include "burnscan/scene.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "burnscan/errors.hpp"

namespace burnscan {

namespace {

constexpr std::array<std::string_view, kBandCount> kBandNames = {
    "Blue", "Green", "Red", "RedEdge1", "RedEdge2", "RedEdge3", "NIR", "SWIR1", "SWIR2"};

constexpr std::array<Band, 4> kSensorABands = {Band::Blue, Band::Green, Band::Red, Band::NIR};

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

// Orientation of (a, b, c): >0 counter-clockwise, <0 clockwise, 0 collinear.
double cross(const Point& a, const Point& b, const Point& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

bool on_segment(const Point& a, const Point& b, const Point& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
    const double d1 = cross(q1, q2, p1);
    const double d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1);
    const double d4 = cross(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
        return true;
    }
    return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
           (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

// Drops a repeated closing vertex.
std::vector<Point> open_ring(std::span<const Point> polygon) {
    std::vector<Point> ring(polygon.begin(), polygon.end());
    if (ring.size() > 1 && ring.front() == ring.back()) {
        ring.pop_back();
    }
    return ring;
}

struct Edge {
    Point lo;  // endpoint with smaller (y, x), so results do not depend on ring direction
    Point hi;
};

std::vector<Edge> ring_edges(const std::vector<Point>& ring) {
    std::vector<Edge> edges;
    edges.reserve(ring.size());
    for (std::size_t i = 0; i < ring.size(); ++i) {
        Point a = ring[i];
        Point b = ring[(i + 1) % ring.size()];
        if (std::tie(b.y, b.x) < std::tie(a.y, a.x)) {
            std::swap(a, b);
        }
        edges.push_back({a, b});
    }
    return edges;
}

bool center_inside(const std::vector<Edge>& edges, const Point& p) {
    bool inside = false;
    for (const auto& e : edges) {
        if ((e.lo.y > p.y) != (e.hi.y > p.y)) {
            const double x_at = e.lo.x + (e.hi.x - e.lo.x) * (p.y - e.lo.y) / (e.hi.y - e.lo.y);
            if (p.x < x_at) {
                inside = !inside;
            }
        }
    }
    return inside;
}

// Liang-Barsky clip of a segment against a closed box.
bool segment_touches_box(const Edge& e, double x0, double x1, double y0, double y1) {
    const double dx = e.hi.x - e.lo.x;
    const double dy = e.hi.y - e.lo.y;
    double t0 = 0.0;
    double t1 = 1.0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {e.lo.x - x0, x1 - e.lo.x, e.lo.y - y0, y1 - e.lo.y};
    for (int k = 0; k < 4; ++k) {
        if (p[k] == 0.0) {
            if (q[k] < 0.0) {
                return false;
            }
            continue;
        }
        const double r = q[k] / p[k];
        if (p[k] < 0.0) {
            t0 = std::max(t0, r);
        } else {
            t1 = std::min(t1, r);
        }
        if (t0 > t1) {
            return false;
        }
    }
    return true;
}

double keys_kernel(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) {
        return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    }
    if (x < 2.0) {
        return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    }
    return 0.0;
}

}  // namespace

std::string_view band_name(Band band) { return kBandNames[static_cast<std::size_t>(band)]; }

Band parse_band(std::string_view name) {
    for (std::size_t i = 0; i < kBandCount; ++i) {
        if (iequals(name, kBandNames[i])) {
            return static_cast<Band>(i);
        }
    }
    throw FormatError("unknown band '" + std::string(name) + "'");
}

std::string_view sensor_name(Sensor sensor) { return sensor == Sensor::A ? "A" : "B"; }

Sensor parse_sensor(std::string_view name) {
    if (iequals(name, "A")) return Sensor::A;
    if (iequals(name, "B")) return Sensor::B;
    throw FormatError("unknown sensor '" + std::string(name) + "'");
}

std::span<const Band> sensor_bands(Sensor sensor) {
    if (sensor == Sensor::A) {
        return kSensorABands;
    }
    return kAllBands;
}

bool GridGeometry::same_grid(const GridGeometry& other, double tol) const noexcept {
    return ncols == other.ncols && nrows == other.nrows && std::abs(xll - other.xll) <= tol &&
           std::abs(yll - other.yll) <= tol && std::abs(cellsize - other.cellsize) <= tol;
}

std::span<const float> BandObservation::band(Band b) const {
    const auto& v = bands[static_cast<std::size_t>(b)];
    if (v.empty()) {
        throw MissingBandError(std::string(band_name(b)));
    }
    return v;
}

void BandObservation::validate() const {
    const auto required = sensor_bands(sensor);
    for (Band b : kAllBands) {
        const bool needed = std::find(required.begin(), required.end(), b) != required.end();
        if (needed && !has_band(b)) {
            throw MissingBandError(std::string(band_name(b)));
        }
        if (!needed && has_band(b)) {
            throw FormatError("sensor " + std::string(sensor_name(sensor)) + " does not carry band " +
                              std::string(band_name(b)));
        }
    }
    const std::size_t n = geometry.cell_count();
    if (valid.size() != n) {
        throw AlignmentError("valid mask size does not match grid");
    }
    for (Band b : required) {
        const auto values = band(b);
        if (values.size() != n) {
            throw AlignmentError("band " + std::string(band_name(b)) + " size does not match grid");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (valid[i] && !(values[i] >= 0.0f && values[i] <= 1.0f)) {
                throw FormatError("reflectance outside [0,1] at a valid pixel of " + date.to_string());
            }
        }
    }
}

SceneCube::SceneCube(Sensor sensor, std::vector<BandObservation> observations)
    : sensor_(sensor), observations_(std::move(observations)) {
    std::stable_sort(observations_.begin(), observations_.end(),
                     [](const BandObservation& a, const BandObservation& b) { return a.date < b.date; });
    for (std::size_t i = 0; i < observations_.size(); ++i) {
        const auto& obs = observations_[i];
        if (obs.sensor != sensor_) {
            throw FormatError("observation of sensor " + std::string(sensor_name(obs.sensor)) +
                              " in a cube of sensor " + std::string(sensor_name(sensor_)));
        }
        obs.validate();
        if (i == 0) {
            geometry_ = obs.geometry;
        } else {
            if (!obs.geometry.same_grid(geometry_)) {
                throw AlignmentError("observation on " + obs.date.to_string() +
                                     " does not share the cube grid");
            }
            if (!(observations_[i - 1].date < obs.date)) {
                throw FormatError("duplicate observation date " + obs.date.to_string());
            }
        }
    }
}

std::string_view label_name(Label label) {
    switch (label) {
        case Label::Burned: return "burned";
        case Label::NotBurned: return "not_burned";
        case Label::Unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

Label parse_label(std::string_view text) {
    if (iequals(text, "burned")) return Label::Burned;
    if (iequals(text, "not_burned")) return Label::NotBurned;
    if (iequals(text, "unlabeled") || text.empty()) return Label::Unlabeled;
    throw FormatError("unknown label '" + std::string(text) + "'");
}

std::string_view group_name(Group group) {
    switch (group) {
        case Group::Treatment: return "treatment";
        case Group::Control: return "control";
        case Group::None: return "none";
    }
    return "none";
}

Group parse_group(std::string_view text) {
    if (iequals(text, "treatment")) return Group::Treatment;
    if (iequals(text, "control")) return Group::Control;
    if (iequals(text, "none") || text.empty()) return Group::None;
    throw FormatError("unknown group '" + std::string(text) + "'");
}

bool Plot::is_border(std::uint32_t pixel) const {
    return std::binary_search(border_pixels.begin(), border_pixels.end(), pixel);
}

double polygon_area(std::span<const Point> polygon) {
    const auto ring = open_ring(polygon);
    double twice = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[(i + 1) % ring.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return std::abs(twice) * 0.5;
}

bool polygon_is_simple(std::span<const Point> polygon) {
    const auto ring = open_ring(polygon);
    const std::size_t n = ring.size();
    if (n < 3) {
        return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a1 = ring[i];
        const Point& a2 = ring[(i + 1) % n];
        if (a1 == a2) {
            return false;
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point& b1 = ring[j];
            const Point& b2 = ring[(j + 1) % n];
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) {
                // Adjacent edges may only share their common vertex.
                const Point& shared = (j == i + 1) ? a2 : a1;
                const Point& other_a = (j == i + 1) ? a1 : a2;
                const Point& other_b = (j == i + 1) ? b2 : b1;
                if (cross(other_a, shared, other_b) == 0.0 &&
                    ((other_b.x - shared.x) * (other_a.x - shared.x) +
                     (other_b.y - shared.y) * (other_a.y - shared.y)) > 0.0) {
                    return false;  // folds back onto itself
                }
                continue;
            }
            if (segments_intersect(a1, a2, b1, b2)) {
                return false;
            }
        }
    }
    return true;
}

PlotFootprint rasterize_plot(std::span<const Point> polygon, const GridGeometry& grid) {
    const auto ring = open_ring(polygon);
    if (!polygon_is_simple(ring)) {
        throw ParameterError("plot polygon is not simple");
    }
    const double cs = grid.cellsize;
    const double xmax_grid = grid.xll + grid.ncols * cs;
    const double ymax_grid = grid.yll + grid.nrows * cs;
    double minx = ring[0].x, maxx = ring[0].x, miny = ring[0].y, maxy = ring[0].y;
    for (const auto& p : ring) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const double tol = 1e-9 * cs;
    if (minx < grid.xll - tol || maxx > xmax_grid + tol || miny < grid.yll - tol ||
        maxy > ymax_grid + tol) {
        throw ParameterError("plot polygon extends beyond the grid");
    }
    if (polygon_area(ring) < cs * cs) {
        throw EmptyPlotError("plot polygon covers less than one cell");
    }

    const auto edges = ring_edges(ring);
    const int col_lo = std::max(0, static_cast<int>(std::floor((minx - grid.xll) / cs)) - 1);
    const int col_hi = std::min(grid.ncols - 1, static_cast<int>(std::floor((maxx - grid.xll) / cs)) + 1);
    const int row_lo = std::max(0, grid.nrows - 1 - static_cast<int>(std::floor((maxy - grid.yll) / cs)) - 1);
    const int row_hi = std::min(grid.nrows - 1, grid.nrows - 1 - static_cast<int>(std::floor((miny - grid.yll) / cs)) + 1);

    PlotFootprint fp;
    for (int row = row_lo; row <= row_hi; ++row) {
        for (int col = col_lo; col <= col_hi; ++col) {
            const Point c = grid.cell_center(col, row);
            if (!center_inside(edges, c)) {
                continue;
            }
            const auto idx = static_cast<std::uint32_t>(grid.index(col, row));
            fp.pixels.push_back(idx);
            const double x0 = grid.xll + col * cs;
            const double y0 = grid.yll + (grid.nrows - row - 1) * cs;
            const bool touches = std::any_of(edges.begin(), edges.end(), [&](const Edge& e) {
                return segment_touches_box(e, x0, x0 + cs, y0, y0 + cs);
            });
            if (touches) {
                fp.border_pixels.push_back(idx);
            }
        }
    }
    if (fp.pixels.empty()) {
        throw EmptyPlotError("plot polygon covers no cell center");
    }
    // Row-major scan already yields sorted indices.
    return fp;
}

Plot make_plot(std::string id, std::vector<Point> polygon, const GridGeometry& grid, Label label,
               Group group) {
    auto fp = rasterize_plot(polygon, grid);
    Plot plot;
    plot.id = std::move(id);
    plot.polygon = std::move(polygon);
    plot.pixels = std::move(fp.pixels);
    plot.border_pixels = std::move(fp.border_pixels);
    plot.label = label;
    plot.group = group;
    return plot;
}

BandObservation apply_mask(const BandObservation& obs, std::span<const double> cloud_probability,
                           const GridGeometry& probability_grid, double threshold) {
    if (!probability_grid.same_grid(obs.geometry) ||
        cloud_probability.size() != obs.geometry.cell_count()) {
        throw AlignmentError("cloud probability grid is not aligned with the observation");
    }
    BandObservation out = obs;
    for (std::size_t i = 0; i < cloud_probability.size(); ++i) {
        if (cloud_probability[i] >= threshold) {
            out.valid[i] = 0;
        }
        if (!out.valid[i]) {
            for (auto& band : out.bands) {
                if (!band.empty()) {
                    band[i] = kMaskedSentinel;
                }
            }
        }
    }
    return out;
}

GridGeometry upsampled_geometry(const GridGeometry& coarse, int factor) {
    if (factor < 1) {
        throw ParameterError("upsampling factor must be >= 1");
    }
    const double cs = coarse.cellsize;
    const double shift = 0.5 * cs - 0.5 * cs / factor;
    return GridGeometry{coarse.ncols * factor, coarse.nrows * factor, coarse.xll + shift,
                        coarse.yll - shift, cs / factor};
}

MaskedRaster upsample_cubic(const MaskedRaster& grid, int factor) {
    if (factor < 1) {
        throw ParameterError("upsampling factor must be >= 1");
    }
    const int nc = grid.geometry.ncols;
    const int nr = grid.geometry.nrows;
    if (nc < 4 || nr < 4) {
        throw ParameterError("cubic upsampling needs at least 4x4 input cells");
    }
    if (grid.values.size() != grid.geometry.cell_count() || grid.valid.size() != grid.values.size()) {
        throw AlignmentError("raster buffers do not match geometry");
    }

    MaskedRaster out;
    out.geometry = upsampled_geometry(grid.geometry, factor);
    const int onc = out.geometry.ncols;
    const int onr = out.geometry.nrows;
    out.values.assign(out.geometry.cell_count(), 0.0);
    out.valid.assign(out.geometry.cell_count(), 1);

    // Per output column/row: four clamped source indices and weights.
    struct Taps {
        std::array<int, 4> idx;
        std::array<double, 4> w;
    };
    auto make_taps = [factor](int i, int n) {
        const int base = i / factor;
        const double t = static_cast<double>(i % factor) / factor;
        Taps taps;
        for (int k = 0; k < 4; ++k) {
            taps.idx[k] = std::clamp(base - 1 + k, 0, n - 1);
            taps.w[k] = keys_kernel(t - (k - 1));
        }
        return taps;
    };
    std::vector<Taps> col_taps(onc), row_taps(onr);
    for (int i = 0; i < onc; ++i) col_taps[i] = make_taps(i, nc);
    for (int j = 0; j < onr; ++j) row_taps[j] = make_taps(j, nr);

    for (int j = 0; j < onr; ++j) {
        const auto& rt = row_taps[j];
        for (int i = 0; i < onc; ++i) {
            const auto& ct = col_taps[i];
            double acc = 0.0;
            bool ok = true;
            for (int a = 0; a < 4 && ok; ++a) {
                if (rt.w[a] == 0.0) continue;
                for (int b = 0; b < 4; ++b) {
                    if (ct.w[b] == 0.0) continue;
                    const std::size_t src = grid.geometry.index(ct.idx[b], rt.idx[a]);
                    if (!grid.valid[src]) {
                        ok = false;
                        break;
                    }
                    acc += rt.w[a] * ct.w[b] * grid.values[src];
                }
            }
            const std::size_t dst = out.geometry.index(i, j);
            out.valid[dst] = ok ? 1 : 0;
            out.values[dst] = ok ? acc : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

std::vector<Date> plot_observation_dates(const SceneCube& cube, const Plot& plot) {
    std::vector<Date> dates;
    if (plot.pixels.empty()) {
        return dates;
    }
    for (const auto& obs : cube.observations()) {
        std::size_t n_valid = 0;
        for (auto px : plot.pixels) {
            n_valid += obs.valid[px] ? 1 : 0;
        }
        if (static_cast<double>(n_valid) >= kPlotObservedFraction * static_cast<double>(plot.pixels.size())) {
            dates.push_back(obs.date);
        }
    }
    return dates;
}

std::optional<GapStats> gaps_from_dates(std::span<const Date> dates) {
    if (dates.size() < 2) {
        return std::nullopt;
    }
    GapStats g;
    double sum = 0.0;
    for (std::size_t i = 1; i < dates.size(); ++i) {
        const double gap = dates[i] - dates[i - 1];
        sum += gap;
        g.max_gap = std::max(g.max_gap, gap);
    }
    g.mean_gap = sum / static_cast<double>(dates.size() - 1);
    return g;
}

GapSummary summarize_gaps(std::span<const PlotGapEntry> entries) {
    GapSummary s;
    double sum_means = 0.0, sum_maxes = 0.0;
    for (const auto& e : entries) {
        if (!e.gaps) {
            ++s.n_flagged;
            continue;
        }
        ++s.n_plots;
        sum_means += e.gaps->mean_gap;
        sum_maxes += e.gaps->max_gap;
        s.max_of_means = std::max(s.max_of_means, e.gaps->mean_gap);
        s.max_of_maxes = std::max(s.max_of_maxes, e.gaps->max_gap);
    }
    if (s.n_plots > 0) {
        s.mean_of_means = sum_means / static_cast<double>(s.n_plots);
        s.mean_of_maxes = sum_maxes / static_cast<double>(s.n_plots);
    }
    return s;
}

SensorGapReport gap_statistics(const SceneCube& cube, std::span<const Plot> plots) {
    SensorGapReport report;
    report.sensor = cube.sensor();
    report.plots.reserve(plots.size());
    for (const auto& plot : plots) {
        const auto dates = plot_observation_dates(cube, plot);
        report.plots.push_back({plot.id, dates.size(), gaps_from_dates(dates)});
    }
    report.summary = summarize_gaps(report.plots);
    return report;
}

const SensorGapReport* GapReport::find(Sensor sensor) const {
    for (const auto& s : sensors) {
        if (s.sensor == sensor) return &s;
    }
    return nullptr;
}

}  // namespace burnscan
