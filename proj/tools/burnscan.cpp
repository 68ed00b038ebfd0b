#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "burnscan/errors.hpp"
#include "burnscan/pipeline.hpp"
#include "burnscan/synth.hpp"

namespace fs = std::filesystem;
using namespace burnscan;

namespace {

struct Options {
    std::string manifest;
    std::string plots;
    std::string events;
    std::string endmembers;
    std::string output_root;
    std::string run_name = "run";
    std::string sensor_mode = "combined";
    std::vector<std::string> indices;
    bool include_border = false;
    std::size_t max_pixels = 50;
    double bsi_exponent = 1.0;
    std::size_t n_trees = 300;
    std::size_t max_features = 0;
    std::size_t min_leaf = 5;
    std::size_t max_depth = 0;
    std::string cv_mode = "auto";
    std::size_t folds = 20;
    std::size_t top_k = 50;
    std::size_t select_k = 30;
    std::size_t selection_rows = 20;
    std::size_t selection_trees = 25;
    std::vector<std::string> sources;
    int max_offset = 10;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    bool no_features_csv = false;

    bool synthetic = false;
    std::size_t n_plots = 340;
    double burn_prob = 0.65;
    double half_life = 1.5;
    std::uint64_t scenario_seed = 20191010;

    std::string out;
    std::string scores;
    std::string predictions;
};

const std::map<std::string, CvMode> kCvModes{
    {"auto", CvMode::Auto}, {"loocv", CvMode::LeaveOnePlotOut}, {"kfold", CvMode::GroupedKFold}};

RunConfig make_config(const Options& o, Stage last) {
    RunConfig c;
    if (!o.manifest.empty()) c.manifest = o.manifest;
    if (!o.plots.empty()) c.plots = o.plots;
    if (!o.events.empty()) c.events = o.events;
    if (!o.endmembers.empty()) c.endmembers = o.endmembers;
    c.output_root = o.output_root.empty() ? default_output_root() : fs::path(o.output_root);
    c.run_name = o.run_name;
    c.last_stage = last;
    c.sensor_mode = parse_sensor_mode(o.sensor_mode);
    if (!o.indices.empty()) {
        c.features.indices.clear();
        for (const auto& name : o.indices) c.features.indices.push_back(parse_index(name));
    }
    c.features.include_border = o.include_border;
    c.features.max_pixels_per_plot = o.max_pixels;
    c.features.bsi_exponent = o.bsi_exponent;
    c.write_features = !o.no_features_csv;
    c.forest.n_trees = o.n_trees;
    c.forest.max_features = o.max_features;
    c.forest.min_leaf = o.min_leaf;
    c.forest.max_depth = o.max_depth;
    c.cv.mode = kCvModes.at(o.cv_mode);
    c.cv.k = o.folds;
    c.top_k = o.top_k;
    c.select_k = o.select_k;
    c.selection_rows_per_plot = o.selection_rows;
    c.selection.params.n_trees = o.selection_trees;
    c.selection.params.min_leaf = o.min_leaf;
    if (!o.sources.empty()) c.separability_sources = o.sources;
    c.separability_max_offset = o.max_offset;
    c.seed = o.seed;
    c.n_threads = o.threads;
    c.apply_seed();
    return c;
}

ScenarioConfig make_scenario(const Options& o) {
    ScenarioConfig s;
    s.n_plots = o.n_plots;
    s.burn_prob = o.burn_prob;
    s.signal.char_half_life_days = o.half_life;
    s.seed = o.scenario_seed;
    s.validate();
    return s;
}

PipelineInputs synthetic_inputs(const Options& o, RunConfig& config) {
    auto scenario = generate(make_scenario(o));
    config.data_tag = "synthetic n_plots=" + std::to_string(o.n_plots) + " burn_prob=" + std::to_string(o.burn_prob) +
                      " half_life=" + std::to_string(o.half_life) + " seed=" + std::to_string(o.scenario_seed);
    PipelineInputs in;
    in.cube_a = std::move(scenario.cube_a);
    in.cube_b = std::move(scenario.cube_b);
    in.plots = std::move(scenario.plots);
    in.events = std::move(scenario.truth.plots);
    return in;
}

RunResult pipeline(const Options& o, Stage last) {
    RunConfig config = make_config(o, last);
    if (o.synthetic) {
        const auto inputs = synthetic_inputs(o, config);
        return run_pipeline(config, inputs);
    }
    return run_pipeline(config);
}

void report_run(const RunResult& r) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << r.run_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Plot-level crop-residue burn detection from two-sensor reflectance stacks"};
    app.set_config("--config", "", "Read options from a TOML/INI file");
    app.require_subcommand(1);
    app.fallthrough();

    Options o;
    app.add_option("--manifest", o.manifest, "Observation manifest (JSON)")->check(CLI::ExistingFile);
    app.add_option("--plots", o.plots, "Plot CSV (plot_id,label,group,wkt_polygon)")->check(CLI::ExistingFile);
    app.add_option("--events", o.events, "Event CSV with burn and till dates")->check(CLI::ExistingFile);
    app.add_option("--endmembers", o.endmembers, "Endmember CSV for BASMA")->check(CLI::ExistingFile);
    app.add_option("--output-root", o.output_root,
                   std::string("Parent of run directories (default: $") + kOutputRootEnv + " or ./runs)");
    app.add_option("--run-name", o.run_name, "Run directory prefix")->capture_default_str();
    app.add_option("--sensor-mode", o.sensor_mode, "combined, A_only or B_only")
        ->check(CLI::IsMember({"combined", "A_only", "B_only"}))
        ->capture_default_str();
    app.add_option("--indices", o.indices, "Indices to derive (default: all)");
    app.add_flag("--include-border", o.include_border, "Keep border pixels");
    app.add_option("--max-pixels", o.max_pixels, "Pixels sampled per plot, 0 = all")->capture_default_str();
    app.add_option("--bsi-exponent", o.bsi_exponent, "Exponent of the BSI visible term")->capture_default_str();
    app.add_option("--n-trees", o.n_trees, "Trees per forest")->capture_default_str();
    app.add_option("--max-features", o.max_features, "Features tried per split, 0 = sqrt")->capture_default_str();
    app.add_option("--min-leaf", o.min_leaf, "Minimum rows per leaf")->capture_default_str();
    app.add_option("--max-depth", o.max_depth, "Tree depth limit, 0 = none")->capture_default_str();
    app.add_option("--cv-mode", o.cv_mode, "auto, loocv or kfold")
        ->check(CLI::IsMember({"auto", "loocv", "kfold"}))
        ->capture_default_str();
    app.add_option("--folds", o.folds, "Folds for kfold")->capture_default_str();
    app.add_option("--top-k", o.top_k, "Features kept by importance")->capture_default_str();
    app.add_option("--select-k", o.select_k, "Forward-selection target, 0 = skip")->capture_default_str();
    app.add_option("--selection-rows", o.selection_rows, "Rows per plot during selection, 0 = all")
        ->capture_default_str();
    app.add_option("--selection-trees", o.selection_trees, "Trees per selection forest")->capture_default_str();
    app.add_option("--sources", o.sources, "Separability bands or indices");
    app.add_option("--max-offset", o.max_offset, "Largest separability offset in days")->capture_default_str();
    app.add_option("--seed", o.seed, "Run seed")->capture_default_str();
    app.add_option("--threads", o.threads, "Forest worker threads, 0 = hardware")->capture_default_str();
    app.add_flag("--no-features-csv", o.no_features_csv, "Do not write features.csv");

    app.add_flag("--synthetic", o.synthetic, "Use a generated scenario instead of input files");
    app.add_option("--n-plots", o.n_plots, "Synthetic plot count")->capture_default_str();
    app.add_option("--burn-prob", o.burn_prob, "Synthetic burn probability")->capture_default_str();
    app.add_option("--half-life", o.half_life, "Synthetic char half-life in days")->capture_default_str();
    app.add_option("--scenario-seed", o.scenario_seed, "Synthetic scenario seed")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "Write a synthetic scenario");
    synth->add_option("--out", o.out, "Scenario directory (default: a new run directory)");
    auto* ingest_cmd = app.add_subcommand("ingest", "Ingest observations and write the gap report");
    auto* features_cmd = app.add_subcommand("features", "Build the pixel feature table");
    auto* separability_cmd = app.add_subcommand("separability", "Separability curves and signature profiles");
    auto* train_cmd = app.add_subcommand("train", "Train, select features and cross-validate");
    auto* threshold_cmd = app.add_subcommand("threshold", "Choose thresholds from cv scores");
    threshold_cmd->add_option("--scores", o.scores, "cv_scores.csv from a train run")->check(CLI::ExistingFile);
    auto* report_cmd = app.add_subcommand("report", "Prediction summaries");
    report_cmd->add_option("--predictions", o.predictions, "predictions.csv; omit to run the full pipeline")
        ->check(CLI::ExistingFile);
    auto* ablate_cmd = app.add_subcommand("ablate", "Compare combined, A_only and B_only runs");
    auto* run_cmd = app.add_subcommand("run", "Full pipeline");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            RunConfig config = make_config(o, Stage::Ingest);
            const auto scenario_cfg = make_scenario(o);
            fs::path dir = o.out;
            if (dir.empty()) {
                config.data_tag = "synth seed=" + std::to_string(o.scenario_seed);
                dir = create_run_directory(config.output_root, o.run_name + "-synth", config.hash());
            }
            write_scenario(dir, generate(scenario_cfg));
            std::cout << dir.string() << "\n";
        } else if (ingest_cmd->parsed()) {
            report_run(pipeline(o, Stage::Gaps));
        } else if (separability_cmd->parsed()) {
            if (o.events.empty() && !o.synthetic) throw ConfigError("separability needs --events");
            report_run(pipeline(o, Stage::Separability));
        } else if (features_cmd->parsed()) {
            report_run(pipeline(o, Stage::Features));
        } else if (train_cmd->parsed()) {
            report_run(pipeline(o, Stage::Cv));
        } else if (threshold_cmd->parsed()) {
            if (o.scores.empty()) {
                report_run(pipeline(o, Stage::Threshold));
            } else {
                std::cout << threshold_from_scores(o.scores, make_config(o, Stage::Threshold)).string() << "\n";
            }
        } else if (report_cmd->parsed()) {
            if (o.predictions.empty()) {
                report_run(pipeline(o, Stage::Report));
            } else {
                std::cout << report_from_predictions(o.predictions, make_config(o, Stage::Report)).string() << "\n";
            }
        } else if (ablate_cmd->parsed()) {
            RunConfig config = make_config(o, Stage::Report);
            const PipelineInputs inputs = o.synthetic ? synthetic_inputs(o, config) : load_inputs(config);
            std::cout << run_ablation(config, inputs).string() << "\n";
        } else if (run_cmd->parsed()) {
            report_run(pipeline(o, Stage::Report));
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
