#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "burnscan/indices.hpp"
#include "burnscan/scene.hpp"

namespace burnscan {

struct TemporalStats {
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    double p10 = 0.0;
    double p20 = 0.0;
    double p80 = 0.0;
    double p90 = 0.0;
    double mean = 0.0;
};

/// Order statistics of a pixel's valid values; nullopt for an empty series.
std::optional<TemporalStats> temporal_stats(std::span<const double> series);

enum class VdiffDirection : std::uint8_t { Drop, Spike };

struct VdiffSpec {
    VdiffDirection direction = VdiffDirection::Drop;
    int buffer = 0;
    /// Level the values after the step must stay below (Drop) or above
    /// (Spike); defaults to the series mean.
    std::optional<double> threshold;
};

/// Largest single-step drop (most negative V[t+1] - V[t]) whose values at
/// t+1 .. t+1+buffer all stay strictly below the threshold; Spike mirrors it.
/// 0 when no step qualifies, nullopt when the series is shorter than
/// buffer + 2.
std::optional<double> vdiff(std::span<const double> series, const VdiffSpec& spec);

inline constexpr std::array<std::string_view, 14> kStatNames = {
    "min",  "max",  "median", "p10",   "p20",    "p80",    "p90",
    "mean", "drop0", "drop1", "drop2", "spike0", "spike1", "spike2"};

struct FeatureOptions {
    /// Indices to derive; each sensor uses the ones it can compute.
    std::vector<IndexId> indices{kAllIndices.begin(), kAllIndices.end()};
    bool include_border = false;
    /// Pixels kept per plot (seeded sample); 0 keeps all.
    std::size_t max_pixels_per_plot = 0;
    std::uint64_t sample_seed = 0;
    double bsi_exponent = 1.0;
    /// BASMA is skipped when no endmember set is given.
    std::optional<EndmemberSet> endmembers;
    std::optional<double> vdiff_threshold;
};

struct FeatureRowMeta {
    std::uint32_t plot = 0;  // index into FeatureTable::plot_ids()
    std::uint32_t pixel = 0;
    bool border = false;
    std::uint16_t n_obs_a = 0;
    std::uint16_t n_obs_b = 0;
};

/// Pixel feature rows, row-major; NaN marks a missing value. Feature columns
/// are named <sensor>_<source>_<stat> plus <sensor>_n_obs and border.
class FeatureTable {
public:
    FeatureTable() = default;
    FeatureTable(std::vector<std::string> names, std::vector<std::string> plot_ids);

    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<std::string>& plot_ids() const noexcept { return plot_ids_; }
    std::size_t n_rows() const noexcept { return meta_.size(); }
    std::size_t n_features() const noexcept { return names_.size(); }

    const FeatureRowMeta& meta(std::size_t row) const { return meta_[row]; }
    const std::string& plot_id(std::size_t row) const { return plot_ids_[meta_[row].plot]; }
    std::span<const double> row(std::size_t r) const {
        return {values_.data() + r * names_.size(), names_.size()};
    }
    double at(std::size_t r, std::size_t c) const { return values_[r * names_.size() + c]; }
    std::optional<std::size_t> column(std::string_view name) const;

    void add_row(const FeatureRowMeta& meta, std::span<const double> values);
    /// Keeps the named columns in the given order; throws SchemaError.
    FeatureTable select(std::span<const std::string> columns) const;
    /// Rows whose plot id is in `ids`.
    FeatureTable filter_plots(std::span<const std::string> ids) const;

    /// Header: plot_id, pixel_id, then feature names.
    void write_csv(const std::filesystem::path& path) const;
    static FeatureTable read_csv(const std::filesystem::path& path);

    std::vector<std::string> warnings;

private:
    std::vector<std::string> names_;
    std::vector<std::string> plot_ids_;
    std::vector<FeatureRowMeta> meta_;
    std::vector<double> values_;
};

/// One row per selected plot pixel with temporal statistics and Vdiff
/// variants for every band and index of each supplied sensor. Either cube may
/// be null; the cubes must share a grid.
FeatureTable build_feature_table(const SceneCube* cube_a, const SceneCube* cube_b,
                                 std::span<const Plot> plots, const FeatureOptions& options);

/// Column names build_feature_table would produce.
std::vector<std::string> feature_names(bool has_a, bool has_b, const FeatureOptions& options);

}  // namespace burnscan
