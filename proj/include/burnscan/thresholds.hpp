#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "burnscan/scene.hpp"

namespace burnscan {

struct ConfusionCounts {
    std::size_t false_burn = 0;
    std::size_t false_no_burn = 0;
    std::size_t true_burn = 0;
    std::size_t true_no_burn = 0;

    std::size_t total() const noexcept { return false_burn + false_no_burn + true_burn + true_no_burn; }
    /// (true_burn + true_no_burn) / total.
    double accuracy() const noexcept;
    /// true_burn / (true_burn + false_no_burn).
    double burn_accuracy() const noexcept;
    /// true_no_burn / (true_no_burn + false_burn).
    double no_burn_accuracy() const noexcept;
    bool operator==(const ConfusionCounts&) const = default;
};

/// Plot-level score with its ground label.
struct ScoredPlot {
    double score = 0.0;
    bool burned = false;
};

/// Mean of the pixel scores; nullopt when there are none.
std::optional<double> aggregate_plot(std::span<const double> pixel_scores);

/// Alternative plot statistics, for diagnostics.
struct PlotScoreStats {
    double mean = 0.0;
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double p90 = 0.0;
};
std::optional<PlotScoreStats> plot_score_stats(std::span<const double> pixel_scores);

/// A plot is called burned when its score is strictly above the threshold.
ConfusionCounts confusion_at(std::span<const ScoredPlot> plots, double threshold);

/// Inverse of the linear-interpolation quantile function of the scores, in
/// [0, 100]. Within tied scores the highest matching percentile is used.
double score_percentile(std::span<const ScoredPlot> plots, double threshold);

/// Score quantile at a percentile (linear interpolation between ranks).
double score_quantile(std::span<const ScoredPlot> plots, double percent);

inline constexpr double kPercentileStep = 0.5;

struct ThresholdChoice {
    double threshold = 0.0;   // score units
    double percentile = 0.0;  // percentile units
    ConfusionCounts counts;
    bool fallback = false;
    std::vector<std::string> warnings;
};

/// Maximizes overall accuracy over the observed scores, the percentile grid
/// and a point below the minimum. Ties go to the lowest threshold. Throws
/// DegenerateModelError unless both labels are present.
ThresholdChoice max_accuracy_threshold(std::span<const ScoredPlot> plots);

/// Same candidate set, maximizing Cohen's kappa.
ThresholdChoice max_kappa_threshold(std::span<const ScoredPlot> plots);

/// Percentile where burn accuracy equals no-burn accuracy, found by linear
/// interpolation of their difference between neighbouring grid points. When
/// the interpolated point is worse than the better neighbour, that neighbour
/// is returned. Without a crossing, the grid point with the smallest gap is
/// returned with a warning.
ThresholdChoice balanced_accuracy_threshold(std::span<const ScoredPlot> plots);

struct Kappa {
    double value = 0.0;
    bool degenerate = false;  // chance agreement of 1; value reported as 0
};
Kappa cohens_kappa(const ConfusionCounts& counts);

struct SweepPoint {
    double percentile = 0.0;
    double threshold = 0.0;
    ConfusionCounts counts;
    double kappa = 0.0;
};
/// Accuracy curves on the percentile grid.
std::vector<SweepPoint> threshold_sweep(std::span<const ScoredPlot> plots);

struct PlotPrediction {
    std::string plot_id;
    std::optional<double> mean_score;
    std::optional<bool> call_max;
    std::optional<bool> call_balanced;
    Label label = Label::Unlabeled;
    Group group = Group::None;
    std::size_t n_pixels = 0;
};

/// Applies both thresholds to the scored plots.
void apply_calls(std::span<PlotPrediction> predictions, double max_threshold, double balanced_threshold);

struct StatRow {
    std::string variable;
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct DensityBin {
    std::string split;  // "max_call", "balanced_call" or "group"
    std::string level;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double density = 0.0;
};

struct PredictionSummary {
    std::vector<StatRow> stats;  // binary calls per policy, then continuous score
    /// cross_tab[balanced][max] counts of plots with both calls.
    std::size_t cross_tab[2][2] = {{0, 0}, {0, 0}};
    std::vector<DensityBin> densities;
};

PredictionSummary prediction_summary(std::span<const PlotPrediction> predictions, std::size_t n_bins = 20);

/// Columns: plot_id, mean_score, call_max, call_balanced, label, group.
void write_predictions_csv(const std::filesystem::path& path, std::span<const PlotPrediction> predictions);

struct PolicyResult {
    std::string policy;
    ThresholdChoice choice;
};
/// Columns: policy, threshold, percentile, false_burn, false_no_burn,
/// true_burn, true_no_burn, accuracy, burn_accuracy, no_burn_accuracy, kappa.
void write_confusion_csv(const std::filesystem::path& path, std::span<const PolicyResult> results);
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> sweep);
void write_summary_csv(const std::filesystem::path& path, const PredictionSummary& summary);
void write_crosstab_csv(const std::filesystem::path& path, const PredictionSummary& summary);
void write_density_csv(const std::filesystem::path& path, const PredictionSummary& summary);

}  // namespace burnscan
