#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "burnscan/features.hpp"
#include "burnscan/forest.hpp"
#include "burnscan/scene.hpp"
#include "burnscan/separability.hpp"
#include "burnscan/synth.hpp"
#include "burnscan/thresholds.hpp"
#include "burnscan/validation.hpp"

namespace burnscan {

enum class SensorMode { Combined, AOnly, BOnly };

std::string_view sensor_mode_name(SensorMode mode);
/// Accepts combined, A_only, B_only (case-insensitive).
SensorMode parse_sensor_mode(std::string_view text);

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "BURNSCAN_OUTPUT_ROOT";

/// Output root from the environment, else "runs".
std::filesystem::path default_output_root();

enum class Stage { Ingest, Gaps, Separability, Features, Train, Cv, Threshold, Report };

std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view text);

struct RunConfig {
    std::optional<std::filesystem::path> manifest;
    std::optional<std::filesystem::path> plots;
    /// Truth-format CSV with burn and till dates, for separability curves.
    std::optional<std::filesystem::path> events;
    std::optional<std::filesystem::path> endmembers;
    std::filesystem::path output_root = "runs";
    std::string run_name = "run";
    /// Free-form description of in-memory inputs; part of the config hash.
    std::string data_tag;
    /// Stages after this one are skipped.
    Stage last_stage = Stage::Report;

    SensorMode sensor_mode = SensorMode::Combined;
    FeatureOptions features;
    /// Derive BASMA from the built-in endmember set when no file is given.
    bool default_endmembers = true;
    bool write_features = true;

    ForestParams forest;
    FoldSpec cv;
    /// Features kept from the full forest's importance ranking.
    std::size_t top_k = 50;
    /// Forward-selection target; 0 skips selection and keeps the top_k set.
    std::size_t select_k = 30;
    SelectionOptions selection;
    /// Rows per plot used during selection; 0 uses every row.
    std::size_t selection_rows_per_plot = 20;

    std::vector<std::string> separability_sources{"CI", "NDVI", "NIR", "MIRBI", "NBR", "SWIR1"};
    int separability_max_offset = 10;
    int profile_window = 6;

    std::uint64_t seed = 1;
    /// Forest worker threads; not part of the hash.
    unsigned n_threads = 0;

    /// Sets per-stage seeds from `seed`.
    void apply_seed();
    /// Canonical JSON text used for the config hash.
    std::string canonical_json() const;
    /// SHA-256 of canonical_json, hex.
    std::string hash() const;
};

/// In-memory inputs; used by run_pipeline after loading files, and directly
/// for synthetic runs.
struct PipelineInputs {
    std::optional<SceneCube> cube_a;
    std::optional<SceneCube> cube_b;
    std::vector<Plot> plots;
    std::optional<std::vector<PlotTruth>> events;
};

PipelineInputs load_inputs(const RunConfig& config);

/// Creates <root>/<name>-<hash12>-<NNN> with the first unused counter.
std::filesystem::path create_run_directory(const std::filesystem::path& root, const std::string& name,
                                           const std::string& config_hash);

struct PolicyAccuracy {
    std::string policy;
    double threshold = 0.0;
    double percentile = 0.0;
    ConfusionCounts counts;
};

struct RunResult {
    std::filesystem::path run_dir;
    std::vector<std::string> selected_features;
    CvResult cv;
    ThresholdChoice max_accuracy;
    ThresholdChoice balanced;
    std::vector<PlotPrediction> predictions;
    GapReport gaps;
    std::vector<SeparabilityCurve> separability;
    std::vector<std::string> warnings;
};

/// Stages: ingest, gaps, features, separability, train, cv, threshold,
/// report. The run manifest starts as "incomplete" and is marked "complete"
/// after the last stage; a failing stage raises StageError.
RunResult run_pipeline(const RunConfig& config);
RunResult run_pipeline(const RunConfig& config, const PipelineInputs& inputs);

struct AblationRun {
    std::string name;
    std::vector<PlotPrediction> predictions;
};

struct AblationRow {
    std::string run;
    std::string policy;
    std::size_t n_plots = 0;
    double accuracy = 0.0;
    double burn_accuracy = 0.0;
    double no_burn_accuracy = 0.0;
};

/// Accuracy per run and policy over labeled plots. Throws ComparisonError
/// when the runs' labeled plot sets differ.
std::vector<AblationRow> compare_ablations(std::span<const AblationRun> runs);
void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);

/// Threshold stage alone, from a cv scores CSV. Writes confusion and sweep
/// CSVs into a new run directory.
std::filesystem::path threshold_from_scores(const std::filesystem::path& scores, const RunConfig& config);

/// Report stage alone, from a predictions CSV.
std::filesystem::path report_from_predictions(const std::filesystem::path& predictions, const RunConfig& config);

/// Runs every sensor mode on the same inputs and writes ablation.csv into a
/// run directory of its own.
std::filesystem::path run_ablation(const RunConfig& config, const PipelineInputs& inputs);

/// Reads a predictions CSV written by write_predictions_csv.
std::vector<PlotPrediction> read_predictions_csv(const std::filesystem::path& path);

/// Confusion counts of a policy's calls against the labels.
ConfusionCounts prediction_counts(std::span<const PlotPrediction> predictions, bool balanced);

}  // namespace burnscan
