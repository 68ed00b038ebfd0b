#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"

#include "burnscan/errors.hpp"
#include "burnscan/separability.hpp"

using namespace burnscan;

namespace {

constexpr int kPlots = 12;
constexpr int kDays = 24;
const GridGeometry kGrid{kPlots * 4, 4, 0.0, 0.0, 10.0};
const Date kStart = Date::from_ymd(2019, 10, 1);

std::vector<Plot> strip_plots() {
    std::vector<Plot> plots;
    for (int i = 0; i < kPlots; ++i) plots.push_back(make_plot("p" + std::to_string(i), fixtures::cell_rect(kGrid, 4 * i, 0, 4, 4), kGrid));
    return plots;
}

/// Daily cube where every pixel of plot i on day t carries value(i, t).
SceneCube strip_cube(const std::function<double(int, int)>& value) {
    std::vector<BandObservation> obs;
    for (int t = 0; t < kDays; ++t) {
        obs.push_back(fixtures::make_obs(Sensor::A, kStart + t, kGrid, [&](Band, std::size_t px) {
            const int col = static_cast<int>(px % static_cast<std::size_t>(kGrid.ncols));
            return value(col / 4, t);
        }));
    }
    return SceneCube(Sensor::A, std::move(obs));
}

std::vector<BurnEvent> events_at(int first, int last, int day) {
    std::vector<BurnEvent> ev;
    for (int i = first; i <= last; ++i) ev.push_back({static_cast<std::size_t>(i), kStart + day});
    return ev;
}

double base(int plot) { return 0.30 + 0.01 * plot; }

}  // namespace

TEST_CASE("M statistic hand case and edge cases") {
    const std::vector<double> b{1, 2, 3};
    const std::vector<double> u{5, 6, 7};
    CHECK(m_statistic(SampleStats::of(b), SampleStats::of(u)) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(m_statistic(SampleStats::of(u), SampleStats::of(b)) == m_statistic(SampleStats::of(b), SampleStats::of(u)));
    CHECK(m_statistic(SampleStats::of(b), SampleStats::of(b)) == 0.0);

    const std::vector<double> flat{4, 4, 4};
    CHECK(m_statistic(SampleStats::of(flat), SampleStats::of(flat)) == 0.0);
    CHECK(std::isinf(m_statistic(SampleStats::of(flat), SampleStats::of(std::vector<double>{5, 5}))));
    CHECK_THROWS_AS(m_statistic(SampleStats::of(std::vector<double>{1}), SampleStats::of(u)), ParameterError);
}

TEST_CASE("M statistic is invariant under affine maps") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> b(5 + rep % 7), u(4 + rep % 5);
        for (auto& x : b) x = nd(rng) + 1.5;
        for (auto& x : u) x = nd(rng);
        const double m = m_statistic(SampleStats::of(b), SampleStats::of(u));
        const double a = (rep % 2 ? -1.0 : 1.0) * std::exp(nd(rng));
        const double c = 10.0 * nd(rng);
        for (auto& x : b) x = a * x + c;
        for (auto& x : u) x = a * x + c;
        const double m2 = m_statistic(SampleStats::of(b), SampleStats::of(u));
        CHECK(std::abs(m2 - m) <= 1e-12 * std::max(1.0, m));
    }
}

TEST_CASE("persistent drop separates at every offset") {
    const auto plots = strip_plots();
    const auto cube = strip_cube([](int p, int t) { return base(p) - (p < 6 && t >= 8 ? 0.2 : 0.0); });
    const auto events = events_at(0, 5, 8);
    const auto curve = separability_curve(events, plots, cube, Band::NIR, {.max_offset = 10});
    CHECK(curve.source == "NIR");
    REQUIRE(curve.points.size() == 11);
    CHECK(curve.skipped_events == 0);
    for (const auto& pt : curve.points) {
        REQUIRE(pt.m);
        CHECK(*pt.m > 2.0);
        CHECK(pt.n_burn == 6);
        CHECK(pt.n_unburn == 6);
    }
}

TEST_CASE("decaying signal gives a falling curve") {
    const auto plots = strip_plots();
    const auto cube = strip_cube([](int p, int t) {
        if (p >= 6 || t < 8) return base(p);
        return base(p) - 0.2 * std::exp2(-(t - 8) / 1.5);
    });
    const auto curve = separability_curve(events_at(0, 5, 8), plots, cube, Band::NIR, {.max_offset = 10});
    for (std::size_t d = 1; d < curve.points.size(); ++d) CHECK(*curve.points[d].m < *curve.points[d - 1].m);
    CHECK(*curve.points[0].m > 1.5);
    CHECK(*curve.points[10].m < 0.5);
}

TEST_CASE("too few events leave the points missing") {
    const auto plots = strip_plots();
    const auto cube = strip_cube([](int p, int t) { return base(p) - (t >= 8 ? 0.2 : 0.0); });
    const auto curve = separability_curve(events_at(0, 1, 8), plots, cube, Band::NIR, {.max_offset = 4});
    for (const auto& pt : curve.points) {
        CHECK_FALSE(pt.m);
        CHECK(pt.n_burn == 2);
    }
}

TEST_CASE("events without a pre or post observation are skipped") {
    const auto plots = strip_plots();
    const auto cube = strip_cube([](int p, int) { return base(p); });
    auto events = events_at(0, 3, 8);
    events.push_back({4, kStart});              // nothing before
    events.push_back({5, kStart + kDays + 3});  // nothing after
    const auto curve = separability_curve(events, plots, cube, Band::NIR, {.max_offset = 2});
    CHECK(curve.skipped_events == 2);
    CHECK(curve.points[0].n_burn == 4);
    std::vector<BurnEvent> bad{{static_cast<std::size_t>(kPlots), kStart + 5}};
    CHECK_THROWS_AS(separability_curve(bad, plots, cube, Band::NIR), ParameterError);
}

TEST_CASE("same-image mode compares against reference plots on the same date") {
    const auto plots = strip_plots();
    const auto cube = strip_cube([](int p, int t) { return base(p) - (p < 6 && t >= 8 ? 0.2 : 0.0); });
    SeparabilityOptions opt;
    opt.max_offset = 3;
    opt.mode = SeparabilityMode::SameImage;
    opt.reference_plots = {6, 7, 8, 9, 10, 11};
    const auto curve = separability_curve(events_at(0, 5, 8), plots, cube, Band::NIR, opt);
    for (const auto& pt : curve.points) {
        CHECK(pt.n_burn == 6);
        CHECK(pt.n_unburn == 6);  // each reference counted once per date
        // Burned mean 0.325 - 0.2, reference mean 0.385, both sds of 0.01 * sd(0..5).
        const double sd = 0.01 * std::sqrt(3.5);
        CHECK(*pt.m == doctest::Approx((0.385 - 0.125) / (2 * sd)).epsilon(1e-5));
    }
}

TEST_CASE("masked plots drop out of the curve") {
    const auto plots = strip_plots();
    auto base_cube = strip_cube([](int p, int t) { return base(p) - (p < 6 && t >= 8 ? 0.2 : 0.0); });
    std::vector<BandObservation> obs(base_cube.observations().begin(), base_cube.observations().end());
    for (auto px : plots[0].pixels) obs[8].valid[px] = 0;
    const SceneCube cube(Sensor::A, std::move(obs));
    const auto curve = separability_curve(events_at(0, 5, 8), plots, cube, Band::NIR, {.max_offset = 1});
    CHECK(curve.points[0].n_burn == 5);
    CHECK(curve.points[1].n_burn == 6);
}

TEST_CASE("signature profiles of identical processes agree") {
    const auto plots = strip_plots();
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 0.02);
    std::vector<std::vector<double>> v(kPlots, std::vector<double>(kDays));
    for (auto& row : v)
        for (auto& x : row) x = 0.3 + nd(rng);
    const auto cube = strip_cube([&](int p, int t) { return v[static_cast<std::size_t>(p)][static_cast<std::size_t>(t)]; });
    const auto prof = signature_profile(events_at(0, 5, 10), events_at(6, 11, 10), plots, cube, Band::NIR, 6);
    REQUIRE(prof.points.size() == 13);
    CHECK(prof.points.front().offset_days == -6);
    for (const auto& pt : prof.points) {
        REQUIRE(pt.burned);
        REQUIRE(pt.unburned);
        const double se = std::sqrt(pt.burned->sd * pt.burned->sd / pt.burned->n +
                                    pt.unburned->sd * pt.unburned->sd / pt.unburned->n);
        CHECK(std::abs(pt.burned->mean - pt.unburned->mean) <= 2.0 * se);
    }
    CHECK_THROWS_AS(signature_profile({}, events_at(6, 11, 10), plots, cube, Band::NIR, 6), ParameterError);
}

TEST_CASE("source names") {
    CHECK(source_name(parse_source("CI")) == "CI");
    CHECK(source_name(parse_source("SWIR1")) == "SWIR1");
    CHECK_THROWS(parse_source("nope"));
}
