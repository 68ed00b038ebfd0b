#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "burnscan/scene.hpp"

namespace burnscan {

/// Single-band grid file: one header line "ncols nrows xll yll cellsize nodata"
/// followed by row-major values.
struct AsciiGrid {
    GridGeometry geometry;
    double nodata = -9999.0;
    std::vector<double> values;
};

AsciiGrid read_ascii_grid(const std::filesystem::path& path);
/// `digits` < 0 writes the shortest round-trip form of each value.
void write_ascii_grid(const std::filesystem::path& path, const GridGeometry& geometry,
                      std::span<const double> values, double nodata, int digits = -1);

struct ManifestEntry {
    Sensor sensor = Sensor::A;
    Date date;
    Band band = Band::Blue;
    std::filesystem::path grid;
    std::optional<std::filesystem::path> mask;  // cloud probability grid
};

/// Observation manifest. Grid values are integer-scaled reflectance divided by
/// `scale` on ingestion; mask grids hold cloud probability in [0,1].
struct Manifest {
    std::vector<ManifestEntry> entries;
    double scale = 10000.0;
    double mask_threshold = 0.5;
    std::optional<double> resolution;  // common grid cell size; default: finest grid
};

/// JSON manifest: either {"observations": [...], "scale": .., "mask_threshold": ..,
/// "resolution": ..} or a bare array of entries with keys sensor, date, band,
/// grid, mask. Relative paths resolve against the manifest directory.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Loads every grid of the manifest and assembles one cube per sensor present.
/// Coarser grids whose cell size is an integer multiple of the common
/// resolution are brought onto the common grid with upsample_cubic.
struct IngestResult {
    std::optional<SceneCube> cube_a;
    std::optional<SceneCube> cube_b;
    const SceneCube* cube(Sensor s) const;
};
IngestResult ingest(const Manifest& manifest);

/// WKT POLYGON, outer ring only.
std::vector<Point> parse_wkt_polygon(std::string_view wkt);
std::string format_wkt_polygon(std::span<const Point> polygon);

/// Plot CSV with columns plot_id, label, group, wkt_polygon. Polygons are
/// rasterized onto `grid`.
std::vector<Plot> read_plots(const std::filesystem::path& path, const GridGeometry& grid);
void write_plots(const std::filesystem::path& path, std::span<const Plot> plots);

/// Per-plot gap rows plus the four summary rows per sensor.
void write_gap_report(const std::filesystem::path& path, const GapReport& report);

}  // namespace burnscan
