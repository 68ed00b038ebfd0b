#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "burnscan/date.hpp"
#include "burnscan/scene.hpp"

namespace burnscan {

/// Acquisition and obscuration model of one sensor. A plot is clear on an
/// acquisition when its cloud chain is in the clear state and an independent
/// haze draw does not obscure it.
struct SensorCadence {
    bool enabled = true;
    int revisit_days = 1;
    double acquire_prob = 1.0;
    /// Per-plot two-state cloud chain, transition probabilities per day.
    double cloud_onset = 0.0;
    double cloud_clear = 1.0;
    double haze_prob = 0.0;
    double noise_sd = 0.01;
    /// Scales the char excursion seen by this sensor; 0 removes the signal.
    double char_visibility = 1.0;
};

using Spectrum = std::array<double, kBandCount>;

struct SignalModel {
    Spectrum stubble{0.07, 0.10, 0.13, 0.17, 0.22, 0.25, 0.28, 0.34, 0.27};
    Spectrum tilled{0.07, 0.10, 0.13, 0.15, 0.19, 0.21, 0.23, 0.30, 0.25};
    /// Additive char excursion at full intensity on the burn day.
    Spectrum char_delta{-0.06, -0.085, -0.12, -0.08, -0.10, -0.11, -0.12, -0.10, -0.05};
    double char_half_life_days = 1.5;
    double intensity_min = 0.6;
    double intensity_max = 1.0;
    /// Fraction of the remaining char kept when a burned plot is tilled.
    double till_char_retention = 1.0;
    double plot_offset_sd = 0.006;
    double observation_offset_sd = 0.004;
};

struct ScenarioConfig {
    std::size_t n_plots = 340;
    double area_median_ha = 0.9;
    double area_mean_ha = 1.4;
    double area_min_ha = 0.05;
    double area_max_ha = 8.0;
    double cellsize = 3.0;
    /// Grid width limit in cells; 0 lets the packer choose. Generation fails
    /// when the plots do not fit under max_rows.
    int max_cols = 0;
    int max_rows = 0;
    double burn_prob = 0.65;
    /// Relative reduction of burn probability in the treatment group.
    double treatment_effect = 0.0;
    double treatment_fraction = 0.5;
    double labeled_fraction = 0.8;
    Date season_start = Date::from_ymd(2019, 10, 10);
    Date season_end = Date::from_ymd(2019, 12, 15);
    Date event_window_start = Date::from_ymd(2019, 10, 20);
    Date event_window_end = Date::from_ymd(2019, 11, 25);
    int till_lag_min = 1;
    int till_lag_max = 3;
    SignalModel signal;
    SensorCadence sensor_a{.revisit_days = 1,
                           .acquire_prob = 1.0,
                           .cloud_onset = 0.07,
                           .cloud_clear = 0.35,
                           .haze_prob = 0.45,
                           .noise_sd = 0.02};
    SensorCadence sensor_b{.revisit_days = 5, .acquire_prob = 1.0, .haze_prob = 0.22, .noise_sd = 0.01};
    std::uint64_t seed = 20191010;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

struct PlotTruth {
    std::string plot_id;
    bool burned = false;
    std::optional<Date> burn_date;
    Date till_date;
    double intensity = 0.0;
    Label true_label = Label::NotBurned;
};

struct GroundTruth {
    std::vector<PlotTruth> plots;
    /// [sensor][plot] dates on which the plot is clear.
    std::array<std::vector<std::vector<Date>>, 2> clear_dates;
    GapReport gaps;

    /// Rebuilds `gaps` from clear_dates.
    void refresh_gaps(std::span<const Plot> plots_in);
};

struct Scenario {
    std::optional<SceneCube> cube_a;
    std::optional<SceneCube> cube_b;
    std::vector<Plot> plots;
    GroundTruth truth;
};

/// Deterministic for a given config.
Scenario generate(const ScenarioConfig& config);

/// Invalid window: the whole observation (dropped from the cube) when `plot`
/// is empty, otherwise the plot's pixels.
struct GapWindow {
    std::optional<std::size_t> plot;
    Date from;
    Date to;  // inclusive
};

/// Applies the schedule to one cube. When `truth` is given its clear dates
/// and gap table for the cube's sensor are updated.
SceneCube inject_gaps(const SceneCube& cube, std::span<const GapWindow> schedule, std::span<const Plot> plots,
                      GroundTruth* truth = nullptr);

/// Windows covering `days` days from each plot's event date (burn date for
/// burned plots, till date otherwise).
std::vector<GapWindow> post_event_windows(const GroundTruth& truth, int days);

/// Writes manifest.json, grids, masks, plots.csv, truth.csv and
/// gap_truth.csv. Reflectance is stored as integer DN (x 10000).
void write_scenario(const std::filesystem::path& dir, const Scenario& scenario);

/// Columns: plot_id, burned, burn_date, till_date, intensity.
void write_truth_csv(const std::filesystem::path& path, const GroundTruth& truth);
std::vector<PlotTruth> read_truth_csv(const std::filesystem::path& path);

}  // namespace burnscan
