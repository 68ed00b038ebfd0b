#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace burnscan {

class FeatureTable;

struct ForestParams {
    std::size_t n_trees = 300;
    /// Features tried per split; 0 means floor(sqrt(n_features)).
    std::size_t max_features = 0;
    std::size_t min_leaf = 5;
    /// 0 = unlimited.
    std::size_t max_depth = 0;
    /// Candidate cut points per feature are at most max_bins - 1 quantiles.
    std::size_t max_bins = 255;
    std::uint64_t seed = 1;
    /// 0 = one worker per hardware thread.
    unsigned n_threads = 0;
};

/// Row-major design matrix with binary labels (1 = burned). NaN = missing.
struct TrainingData {
    std::vector<std::string> features;
    std::size_t n_rows = 0;
    std::vector<double> x;
    std::vector<std::uint8_t> y;

    std::span<const double> row(std::size_t r) const { return {x.data() + r * features.size(), features.size()}; }
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 for a leaf
    double threshold = 0.0;     // x <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double p_burn = 0.0;  // burned fraction of the node's bootstrap sample
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

class ForestModel {
public:
    static constexpr int kFormatVersion = 1;

    ForestModel() = default;
    ForestModel(std::vector<std::string> features, std::vector<double> medians, std::vector<Tree> trees,
                std::vector<double> importance, ForestParams params);

    const std::vector<std::string>& features() const noexcept { return features_; }
    const std::vector<double>& importance() const noexcept { return importance_; }
    const std::vector<double>& medians() const noexcept { return medians_; }
    const std::vector<Tree>& trees() const noexcept { return trees_; }
    const ForestParams& params() const noexcept { return params_; }
    std::size_t n_trees() const noexcept { return trees_.size(); }
    std::optional<double> oob_accuracy;

    /// 1 when tree t votes burned for the row (schema order; NaN imputed).
    int tree_vote(std::size_t t, std::span<const double> row) const;
    /// Fraction of trees voting burned.
    double predict_score(std::span<const double> row) const;
    /// Scores every row of a table, matching columns by name. Throws
    /// SchemaError listing features the table lacks.
    std::vector<double> predict_table(const FeatureTable& table) const;

    /// Features by descending importance; ties keep schema order.
    std::vector<std::string> ranked_features() const;

    void save(const std::filesystem::path& path) const;
    static ForestModel load(const std::filesystem::path& path);
    /// Columns: feature, gini_importance; descending importance.
    void write_importance_csv(const std::filesystem::path& path) const;

private:
    std::vector<std::string> features_;
    std::vector<double> medians_;
    std::vector<Tree> trees_;
    std::vector<double> importance_;
    ForestParams params_;
};

/// Grows a bootstrap forest with Gini splits. Missing values are replaced by
/// the per-feature training median, which the model keeps for prediction.
/// Throws DegenerateModelError when fewer than two classes are present.
ForestModel train_forest(const TrainingData& data, const ForestParams& params);

/// Per-feature median of the non-missing values; 0 for all-missing columns.
std::vector<double> column_medians(const TrainingData& data);

}  // namespace burnscan
