#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "burnscan/date.hpp"

namespace burnscan {

// ---------------------------------------------------------------------------
// Sensors and bands
// ---------------------------------------------------------------------------

/// A: 4-band, 3 m, near-daily. B: SWIR-capable, roughly weekly, resampled
/// onto the common grid before ingestion.
enum class Sensor : std::uint8_t { A, B };

enum class Band : std::uint8_t { Blue, Green, Red, RedEdge1, RedEdge2, RedEdge3, NIR, SWIR1, SWIR2 };

inline constexpr std::size_t kBandCount = 9;
inline constexpr std::array<Band, kBandCount> kAllBands = {
    Band::Blue,     Band::Green, Band::Red,   Band::RedEdge1, Band::RedEdge2,
    Band::RedEdge3, Band::NIR,   Band::SWIR1, Band::SWIR2};

std::string_view band_name(Band band);
/// Case-insensitive; throws FormatError.
Band parse_band(std::string_view name);
std::string_view sensor_name(Sensor sensor);
Sensor parse_sensor(std::string_view name);

/// Bands a sensor must carry, in canonical order.
std::span<const Band> sensor_bands(Sensor sensor);

// ---------------------------------------------------------------------------
// Raster geometry
// ---------------------------------------------------------------------------

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

/// Row-major grid, row 0 at the top (north). (xll, yll) is the lower-left
/// corner of the lower-left cell.
struct GridGeometry {
    int ncols = 0;
    int nrows = 0;
    double xll = 0.0;
    double yll = 0.0;
    double cellsize = 1.0;

    std::size_t cell_count() const noexcept {
        return static_cast<std::size_t>(ncols) * static_cast<std::size_t>(nrows);
    }
    std::size_t index(int col, int row) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(ncols) +
               static_cast<std::size_t>(col);
    }
    Point cell_center(int col, int row) const noexcept {
        return {xll + (col + 0.5) * cellsize, yll + (nrows - row - 0.5) * cellsize};
    }
    bool same_grid(const GridGeometry& other, double tol = 1e-9) const noexcept;
};

/// Values plus per-cell validity, used for single-band resampling.
struct MaskedRaster {
    GridGeometry geometry;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;
};

// ---------------------------------------------------------------------------
// Observations and cubes
// ---------------------------------------------------------------------------

/// Written into band cells whose pixel is masked, so any downstream read of a
/// masked value is detectable.
inline constexpr float kMaskedSentinel = -9999.0f;

struct BandObservation {
    Sensor sensor = Sensor::A;
    Date date;
    GridGeometry geometry;
    /// Unit reflectance per band; empty vector when the band is absent.
    std::array<std::vector<float>, kBandCount> bands;
    std::vector<std::uint8_t> valid;

    bool has_band(Band b) const noexcept { return !bands[static_cast<std::size_t>(b)].empty(); }
    std::span<const float> band(Band b) const;
    bool is_valid(std::size_t pixel) const noexcept { return valid[pixel] != 0; }

    /// Checks band set, grid sizes and the value range of valid cells.
    void validate() const;
};

/// Time-ordered observations of one sensor on one grid. Immutable once built.
class SceneCube {
public:
    SceneCube() = default;
    /// Sorts by date and validates each observation; throws on duplicate
    /// dates, mixed sensors or mixed grids.
    SceneCube(Sensor sensor, std::vector<BandObservation> observations);

    Sensor sensor() const noexcept { return sensor_; }
    const GridGeometry& geometry() const noexcept { return geometry_; }
    double resolution() const noexcept { return geometry_.cellsize; }
    std::span<const BandObservation> observations() const noexcept { return observations_; }
    std::size_t size() const noexcept { return observations_.size(); }
    bool empty() const noexcept { return observations_.empty(); }

private:
    Sensor sensor_ = Sensor::A;
    GridGeometry geometry_;
    std::vector<BandObservation> observations_;
};

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

enum class Label : std::uint8_t { Burned, NotBurned, Unlabeled };
enum class Group : std::uint8_t { Treatment, Control, None };

std::string_view label_name(Label label);
Label parse_label(std::string_view text);
std::string_view group_name(Group group);
Group parse_group(std::string_view text);

struct PlotFootprint {
    std::vector<std::uint32_t> pixels;         // sorted
    std::vector<std::uint32_t> border_pixels;  // sorted, subset of pixels
};

struct Plot {
    std::string id;
    std::vector<Point> polygon;
    std::vector<std::uint32_t> pixels;
    std::vector<std::uint32_t> border_pixels;
    Label label = Label::Unlabeled;
    Group group = Group::None;

    bool is_labeled() const noexcept { return label != Label::Unlabeled; }
    bool is_border(std::uint32_t pixel) const;
};

double polygon_area(std::span<const Point> polygon);
bool polygon_is_simple(std::span<const Point> polygon);

/// Pixels are cells whose center is inside the polygon; border pixels are the
/// pixels whose closed cell square touches the polygon boundary. Throws
/// EmptyPlotError when the polygon has less than one cell of area or covers no
/// cell center, ParameterError when it is not simple or leaves the grid.
PlotFootprint rasterize_plot(std::span<const Point> polygon, const GridGeometry& grid);

/// Builds a plot and fills its pixel sets.
Plot make_plot(std::string id, std::vector<Point> polygon, const GridGeometry& grid,
               Label label = Label::Unlabeled, Group group = Group::None);

// ---------------------------------------------------------------------------
// Masking and resampling
// ---------------------------------------------------------------------------

/// Marks pixels with cloud probability >= threshold invalid and poisons their
/// band values with kMaskedSentinel.
BandObservation apply_mask(const BandObservation& obs, std::span<const double> cloud_probability,
                           const GridGeometry& probability_grid, double threshold = 0.5);

/// Cubic convolution (Keys, a = -0.5) upsampling by an integer factor.
/// Fine sample i sits at coarse coordinate i / factor, so every factor-th
/// output sample coincides with an input sample; the output geometry is
/// shifted accordingly. Edge taps are clamped. An output cell is invalid when
/// any tap with non-zero weight is invalid.
MaskedRaster upsample_cubic(const MaskedRaster& grid, int factor);

/// Geometry produced by upsample_cubic for a coarse grid.
GridGeometry upsampled_geometry(const GridGeometry& coarse, int factor);

// ---------------------------------------------------------------------------
// Observation cadence
// ---------------------------------------------------------------------------

/// A plot counts as observed on a date when at least this fraction of its
/// pixels is valid.
inline constexpr double kPlotObservedFraction = 0.5;

/// Dates on which the plot is observed in the cube.
std::vector<Date> plot_observation_dates(const SceneCube& cube, const Plot& plot);

struct GapStats {
    double mean_gap = 0.0;
    double max_gap = 0.0;
};

struct PlotGapEntry {
    std::string plot_id;
    std::size_t n_observations = 0;
    std::optional<GapStats> gaps;  // empty when fewer than two observations
};

/// Cross-plot summary rows: (across plots, across time).
struct GapSummary {
    double mean_of_means = 0.0;
    double mean_of_maxes = 0.0;
    double max_of_means = 0.0;
    double max_of_maxes = 0.0;
    std::size_t n_plots = 0;
    std::size_t n_flagged = 0;
};

struct SensorGapReport {
    Sensor sensor = Sensor::A;
    std::vector<PlotGapEntry> plots;
    GapSummary summary;
};

struct GapReport {
    std::vector<SensorGapReport> sensors;
    const SensorGapReport* find(Sensor sensor) const;
};

/// Gap statistics from a sorted list of observation dates.
std::optional<GapStats> gaps_from_dates(std::span<const Date> dates);
GapSummary summarize_gaps(std::span<const PlotGapEntry> entries);
SensorGapReport gap_statistics(const SceneCube& cube, std::span<const Plot> plots);

}  // namespace burnscan
