#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "burnscan/features.hpp"
#include "burnscan/forest.hpp"
#include "burnscan/scene.hpp"

namespace burnscan {

/// Rows of labeled plots as a design matrix over the chosen columns.
struct LabeledRows {
    TrainingData data;
    std::vector<std::size_t> table_rows;  // source row per design row
};

/// `columns` empty selects every table column. Rows of plots the list does
/// not know or that are unlabeled are dropped.
LabeledRows labeled_rows(const FeatureTable& table, std::span<const Plot> plots,
                         std::span<const std::string> columns = {});

enum class CvMode { Auto, LeaveOnePlotOut, GroupedKFold };

struct FoldSpec {
    CvMode mode = CvMode::Auto;
    std::size_t k = 20;
    /// Auto uses leave-one-plot-out up to this many labeled plots.
    std::size_t loocv_max_plots = 200;
    std::uint64_t seed = 1;
};

/// Holdout groups over plot positions. Grouped k-fold deals each label class
/// round-robin over the folds after a seeded shuffle.
std::vector<std::vector<std::size_t>> make_folds(std::span<const Label> labels, const FoldSpec& spec);

/// Throws LeakageError when training and holdout rows share a plot, a
/// (plot, pixel) key, or an identical feature vector over `columns`. Rows
/// with no finite value outside the count/border columns are not
/// fingerprinted.
void check_fold_leakage(const FeatureTable& table, std::span<const std::size_t> train_rows,
                        std::span<const std::size_t> holdout_rows, std::span<const std::size_t> columns);

struct CvResult {
    std::vector<std::string> plot_ids;  // labeled plots with rows
    std::vector<Label> labels;
    std::vector<std::vector<double>> pixel_scores;
    std::vector<double> plot_mean;  // NaN when the plot has no non-border row
    std::vector<std::size_t> fold;
    std::size_t n_folds = 0;
    CvMode mode = CvMode::Auto;
    std::vector<std::string> warnings;
};

/// Trains one forest per fold on the other folds' labeled plots and scores
/// the held-out plots' rows. Labeled plots without rows are excluded with a
/// warning.
CvResult cross_validate(const FeatureTable& table, std::span<const Plot> plots,
                        std::span<const std::string> columns, const ForestParams& params, const FoldSpec& spec);

CvResult loocv_plot(const FeatureTable& table, std::span<const Plot> plots, std::span<const std::string> columns,
                    const ForestParams& params);

/// Columns: plot_id, fold, label, n_pixels, mean_score.
void write_cv_scores_csv(const std::filesystem::path& path, const CvResult& result);

struct SelectionOptions {
    /// Forest used to score each candidate subset.
    ForestParams params{.n_trees = 25};
    double holdout_fraction = 0.25;
    std::uint64_t seed = 1;
};

struct SelectionResult {
    std::vector<std::string> selected;  // in selection order
    std::vector<double> scores;         // holdout pixel accuracy after each addition
};

/// Greedy forward selection on one stratified plot-grouped split. Each step
/// adds the candidate with the highest holdout pixel accuracy; ties keep the
/// earlier candidate.
SelectionResult sequential_select(const FeatureTable& table, std::span<const Plot> plots,
                                  std::span<const std::string> candidates, std::size_t target_k,
                                  const SelectionOptions& options = {});

}  // namespace burnscan
