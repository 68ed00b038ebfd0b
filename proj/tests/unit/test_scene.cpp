#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"

#include "burnscan/errors.hpp"
#include "burnscan/scene.hpp"

using namespace burnscan;

namespace {

/// Even-odd ray casting, written independently of the library.
bool inside_oracle(const std::vector<Point>& poly, Point p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point a = poly[i], b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) in = !in;
        }
    }
    return in;
}

/// Liang-Barsky clip of segment ab against the closed box.
bool segment_hits_box(Point a, Point b, double x0, double x1, double y0, double y1) {
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - x0, x1 - a.x, a.y - y0, y1 - a.y};
    for (int k = 0; k < 4; ++k) {
        if (p[k] == 0.0) {
            if (q[k] < 0.0) return false;
        } else {
            const double r = q[k] / p[k];
            if (p[k] < 0.0) t0 = std::max(t0, r);
            else t1 = std::min(t1, r);
        }
    }
    return t0 <= t1;
}

std::vector<Point> random_star(std::mt19937_64& gen, Point c, double rmin, double rmax, int n) {
    // One vertex per angular sector keeps the center in the kernel, so the
    // polygon is simple.
    std::uniform_real_distribution<double> jitter(0.05, 0.95);
    std::uniform_real_distribution<double> rad(rmin, rmax);
    std::vector<Point> poly;
    for (int k = 0; k < n; ++k) {
        const double a = (k + jitter(gen)) * 2.0 * std::numbers::pi / n;
        const double r = rad(gen);
        poly.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    }
    return poly;
}

const GridGeometry kGrid{40, 30, 500.0, 1000.0, 3.0};

}  // namespace

TEST_CASE("9x9 square rasterizes to 81 pixels with 32 on the border") {
    const auto poly = fixtures::cell_rect(kGrid, 5, 4, 9, 9);
    const auto fp = rasterize_plot(poly, kGrid);
    CHECK(fp.pixels.size() == 81);
    CHECK(fp.border_pixels.size() == 32);
    CHECK(std::is_sorted(fp.pixels.begin(), fp.pixels.end()));
    CHECK(std::includes(fp.pixels.begin(), fp.pixels.end(), fp.border_pixels.begin(), fp.border_pixels.end()));
}

TEST_CASE("degenerate polygons raise the empty-plot error") {
    const double x = kGrid.xll + 3 * kGrid.cellsize, y = kGrid.yll + 3 * kGrid.cellsize;
    // Smaller than one cell.
    CHECK_THROWS_AS(rasterize_plot(std::vector<Point>{{x, y}, {x + 2.7, y}, {x + 2.7, y + 2.7}, {x, y + 2.7}}, kGrid),
                    EmptyPlotError);
    // Thin strip between two rows of cell centers: area > one cell, no center.
    CHECK_THROWS_AS(rasterize_plot(std::vector<Point>{{x, y + 0.1}, {x + 15, y + 0.1}, {x + 15, y + 1.4}, {x, y + 1.4}},
                                   kGrid),
                    EmptyPlotError);
    // Self-intersecting bow tie.
    CHECK_THROWS_AS(rasterize_plot(std::vector<Point>{{x, y}, {x + 9, y + 9}, {x + 9, y}, {x, y + 9}}, kGrid),
                    ParameterError);
    // Leaves the grid.
    CHECK_THROWS_AS(rasterize_plot(std::vector<Point>{{x - 100, y}, {x + 9, y}, {x + 9, y + 9}}, kGrid), ParameterError);
}

TEST_CASE("rasterization matches brute-force point-in-polygon") {
    std::mt19937_64 gen(42);
    for (int trial = 0; trial < 60; ++trial) {
        const Point c{kGrid.xll + 60.0, kGrid.yll + 45.0};
        const auto poly = random_star(gen, c, 8.0, 40.0, 5 + trial % 9);
        PlotFootprint fp;
        try {
            fp = rasterize_plot(poly, kGrid);
        } catch (const EmptyPlotError&) {
            continue;
        }
        std::vector<std::uint32_t> expect, expect_border;
        for (int row = 0; row < kGrid.nrows; ++row) {
            for (int col = 0; col < kGrid.ncols; ++col) {
                if (!inside_oracle(poly, kGrid.cell_center(col, row))) continue;
                const auto idx = static_cast<std::uint32_t>(kGrid.index(col, row));
                expect.push_back(idx);
                const double x0 = kGrid.xll + col * kGrid.cellsize;
                const double y0 = kGrid.yll + (kGrid.nrows - row - 1) * kGrid.cellsize;
                for (std::size_t i = 0; i < poly.size(); ++i) {
                    if (segment_hits_box(poly[i], poly[(i + 1) % poly.size()], x0, x0 + kGrid.cellsize, y0,
                                         y0 + kGrid.cellsize)) {
                        expect_border.push_back(idx);
                        break;
                    }
                }
            }
        }
        CHECK(fp.pixels == expect);
        CHECK(fp.border_pixels == expect_border);
    }
}

TEST_CASE("polygon area and closing vertex") {
    const auto sq = fixtures::cell_rect(kGrid, 0, 0, 2, 3);
    CHECK(std::abs(polygon_area(sq)) == doctest::Approx(54.0));
    auto closed = sq;
    closed.push_back(sq.front());
    CHECK(rasterize_plot(closed, kGrid).pixels == rasterize_plot(sq, kGrid).pixels);
}

TEST_CASE("apply_mask invalidates exactly the cells at or above the threshold") {
    const GridGeometry g{6, 5, 0.0, 0.0, 3.0};
    const auto obs = fixtures::make_obs(Sensor::A, Date::from_ymd(2019, 11, 1), g,
                                        [](Band, std::size_t i) { return 0.1 + 0.001 * static_cast<double>(i); });
    std::vector<double> zero(g.cell_count(), 0.0), one(g.cell_count(), 1.0);
    const auto a = apply_mask(obs, zero, g, 0.5);
    CHECK(std::count(a.valid.begin(), a.valid.end(), 0) == 0);
    CHECK(a.bands == obs.bands);
    const auto b = apply_mask(obs, one, g, 0.5);
    CHECK(std::count(b.valid.begin(), b.valid.end(), 0) == static_cast<long>(g.cell_count()));

    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> mixed(g.cell_count());
    long k = 0;
    for (auto& p : mixed) {
        p = u(gen);
        if (p >= 0.5) ++k;
    }
    mixed[0] = 0.5;  // boundary counts as cloudy
    k = std::count_if(mixed.begin(), mixed.end(), [](double p) { return p >= 0.5; });
    const auto c = apply_mask(obs, mixed, g, 0.5);
    CHECK(std::count(c.valid.begin(), c.valid.end(), 0) == k);
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
        if (!c.valid[i]) CHECK(c.band(Band::Red)[i] == kMaskedSentinel);
        else CHECK(c.band(Band::Red)[i] == obs.band(Band::Red)[i]);
    }
    const GridGeometry other{6, 5, 1.0, 0.0, 3.0};
    CHECK_THROWS_AS(apply_mask(obs, zero, other, 0.5), AlignmentError);
}

namespace {

MaskedRaster raster(const GridGeometry& g, const std::function<double(int, int)>& f) {
    MaskedRaster r{g, std::vector<double>(g.cell_count()), std::vector<std::uint8_t>(g.cell_count(), 1)};
    for (int row = 0; row < g.nrows; ++row)
        for (int col = 0; col < g.ncols; ++col) r.values[g.index(col, row)] = f(col, row);
    return r;
}

}  // namespace

TEST_CASE("cubic upsampling reproduces constants, identity and linear ramps") {
    const GridGeometry g{8, 7, 100.0, 200.0, 10.0};
    const auto constant = raster(g, [](int, int) { return 0.37; });
    for (int f : {1, 2, 3, 5}) {
        const auto up = upsample_cubic(constant, f);
        CHECK(up.geometry.ncols == 8 * f);
        CHECK(up.geometry.cellsize == doctest::Approx(10.0 / f));
        for (double v : up.values) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
    }

    const auto ramp = raster(g, [](int c, int r) { return 0.2 + 0.03 * c - 0.015 * r; });
    const auto same = upsample_cubic(ramp, 1);
    CHECK(same.values == ramp.values);
    CHECK(same.geometry.same_grid(g));

    const int f = 2;
    const auto up = upsample_cubic(ramp, f);
    for (int j = 0; j < up.geometry.nrows; ++j) {
        for (int i = 0; i < up.geometry.ncols; ++i) {
            const int bc = i / f, br = j / f;
            if (bc < 1 || bc > g.ncols - 3 || br < 1 || br > g.nrows - 3) continue;
            const double expect = 0.2 + 0.03 * (static_cast<double>(i) / f) - 0.015 * (static_cast<double>(j) / f);
            CHECK(std::abs(up.values[up.geometry.index(i, j)] - expect) < 1e-9);
        }
    }
    // Fine sample centers sit on the coarse sample positions.
    const Point coarse = g.cell_center(3, 2);
    const Point fine = up.geometry.cell_center(3 * f, 2 * f);
    CHECK(fine.x == doctest::Approx(coarse.x));
    CHECK(fine.y == doctest::Approx(coarse.y));
    CHECK_THROWS_AS(upsample_cubic(ramp, 0), ParameterError);
}

TEST_CASE("invalid coarse cells poison only outputs that read them") {
    const GridGeometry g{8, 8, 0.0, 0.0, 10.0};
    auto r = raster(g, [](int, int) { return 0.3; });
    r.valid[g.index(4, 4)] = 0;
    r.values[g.index(4, 4)] = kMaskedSentinel;
    const auto up = upsample_cubic(r, 2);
    CHECK(up.valid[up.geometry.index(8, 8)] == 0);
    CHECK(up.valid[up.geometry.index(0, 0)] == 1);
    for (std::size_t i = 0; i < up.values.size(); ++i) {
        if (up.valid[i]) CHECK(up.values[i] == doctest::Approx(0.3));
    }
}

TEST_CASE("scene cube sorts observations and rejects duplicates") {
    const GridGeometry g{4, 4, 0.0, 0.0, 3.0};
    auto mk = [&](int day) {
        return fixtures::make_obs(Sensor::A, Date::from_ymd(2019, 10, 10) + day, g, [](Band, std::size_t) { return 0.2; });
    };
    const SceneCube cube(Sensor::A, {mk(5), mk(1), mk(3)});
    CHECK(cube.size() == 3);
    CHECK(cube.observations()[0].date < cube.observations()[1].date);
    CHECK(cube.observations()[1].date < cube.observations()[2].date);
    CHECK_THROWS_AS(SceneCube(Sensor::A, {mk(1), mk(1)}), Error);
    auto bad = mk(2);
    bad.bands[static_cast<std::size_t>(Band::Red)].clear();
    CHECK_THROWS_AS(SceneCube(Sensor::A, {bad}), MissingBandError);
}

TEST_CASE("gap statistics hand cases") {
    std::vector<Date> daily;
    for (int i = 0; i < 10; ++i) daily.push_back(Date::from_ymd(2019, 10, 10) + i);
    const auto d = gaps_from_dates(daily);
    REQUIRE(d);
    CHECK(d->mean_gap == 1.0);
    CHECK(d->max_gap == 1.0);

    const Date d0 = Date::from_ymd(2019, 10, 10);
    const std::vector<Date> sparse{d0, d0 + 2, d0 + 10};
    const auto s = gaps_from_dates(sparse);
    REQUIRE(s);
    CHECK(s->mean_gap == 5.0);
    CHECK(s->max_gap == 8.0);
    CHECK_FALSE(gaps_from_dates(std::vector<Date>{d0}));
}

TEST_CASE("gap statistics follow plot validity and flag sparse plots") {
    const GridGeometry g{10, 4, 0.0, 0.0, 3.0};
    const auto left = make_plot("L", fixtures::cell_rect(g, 0, 0, 4, 4), g);
    const auto right = make_plot("R", fixtures::cell_rect(g, 6, 0, 4, 4), g);
    const Date d0 = Date::from_ymd(2019, 10, 10);
    std::vector<BandObservation> obs;
    for (int day : {0, 2, 10}) {
        auto o = fixtures::make_obs(Sensor::A, d0 + day, g, [](Band, std::size_t) { return 0.2; });
        if (day != 0) {
            for (auto px : right.pixels) o.valid[px] = 0;
        } else {
            // Half the pixels valid still counts as observed.
            for (std::size_t k = 0; k < right.pixels.size() / 2; ++k) o.valid[right.pixels[k]] = 0;
        }
        obs.push_back(std::move(o));
    }
    const SceneCube cube(Sensor::A, std::move(obs));
    const std::vector<Plot> plots{left, right};
    const auto rep = gap_statistics(cube, plots);
    REQUIRE(rep.plots.size() == 2);
    CHECK(rep.plots[0].n_observations == 3);
    CHECK(rep.plots[0].gaps->mean_gap == 5.0);
    CHECK(rep.plots[1].n_observations == 1);
    CHECK_FALSE(rep.plots[1].gaps);
    CHECK(rep.summary.n_plots == 1);
    CHECK(rep.summary.n_flagged == 1);
    CHECK(rep.summary.mean_of_maxes == 8.0);
}
