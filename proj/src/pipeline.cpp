#include "burnscan/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"
#include "burnscan/rng.hpp"
#include "burnscan/scene_io.hpp"
#include "json.hpp"

namespace burnscan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

constexpr std::array<Stage, 8> kStages = {Stage::Ingest, Stage::Gaps,  Stage::Separability, Stage::Features,
                                          Stage::Train,  Stage::Cv,    Stage::Threshold,    Stage::Report};

std::string cv_mode_name(CvMode mode) {
    switch (mode) {
        case CvMode::Auto: return "auto";
        case CvMode::LeaveOnePlotOut: return "loocv";
        case CvMode::GroupedKFold: return "kfold";
    }
    return "auto";
}

json forest_json(const ForestParams& p) {
    return {{"n_trees", p.n_trees},     {"max_features", p.max_features}, {"min_leaf", p.min_leaf},
            {"max_depth", p.max_depth}, {"max_bins", p.max_bins},         {"seed", p.seed}};
}

std::string sha256_hex(std::string_view text) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text;
    }
    fs::rename(tmp, path);
}

/// run.json kept on disk as the run progresses.
class RunManifest {
public:
    RunManifest(fs::path dir, const RunConfig& config, const std::string& hash, std::string command)
        : path_(dir / "run.json") {
        doc_["run_dir"] = dir.filename().string();
        doc_["command"] = std::move(command);
        doc_["status"] = "incomplete";
        doc_["config_hash"] = hash;
        doc_["seed"] = config.seed;
        doc_["config"] = json::parse(config.canonical_json());
        doc_["stages"] = json::array();
        doc_["artifacts"] = json::array();
        doc_["warnings"] = json::array();
        save();
    }

    void stage(std::string_view name, std::string_view status) {
        doc_["stages"].push_back({{"name", name}, {"status", status}});
        save();
    }
    void artifact(const std::string& file) { doc_["artifacts"].push_back(file); }
    void warn(const std::vector<std::string>& warnings) {
        for (const auto& w : warnings) doc_["warnings"].push_back(w);
    }
    json& doc() { return doc_; }
    void fail(std::string_view stage, std::string_view cause) {
        doc_["failed_stage"] = stage;
        doc_["error"] = cause;
        doc_["stages"].push_back({{"name", stage}, {"status", "failed"}});
        save();
    }
    void complete() {
        doc_["status"] = "complete";
        save();
    }
    void save() { write_text_atomic(path_, doc_.dump(2) + "\n"); }

private:
    fs::path path_;
    json doc_;
};

/// Runs `body` as a named stage; failures are recorded and rethrown as
/// StageError.
template <typename F>
void run_stage(RunManifest& manifest, std::string_view name, F&& body) {
    try {
        body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        manifest.fail(name, e.what());
        throw StageError(std::string(name), e.what());
    }
    manifest.stage(name, "done");
}

json threshold_json(const ThresholdChoice& c) {
    json j = {{"score", c.threshold},
              {"percentile", c.percentile},
              {"false_burn", c.counts.false_burn},
              {"false_no_burn", c.counts.false_no_burn},
              {"true_burn", c.counts.true_burn},
              {"true_no_burn", c.counts.true_no_burn},
              {"accuracy", c.counts.accuracy()},
              {"burn_accuracy", c.counts.burn_accuracy()},
              {"no_burn_accuracy", c.counts.no_burn_accuracy()},
              {"fallback", c.fallback}};
    return j;
}

/// Cube used for a separability source: A when it carries the needed bands,
/// otherwise B.
const SceneCube* cube_for_source(const SignalSource& source, const SceneCube* a, const SceneCube* b,
                                 bool has_unmixer) {
    auto carries = [&](const SceneCube* cube) {
        if (!cube) return false;
        if (const auto* band = std::get_if<Band>(&source)) {
            const auto bands = sensor_bands(cube->sensor());
            return std::find(bands.begin(), bands.end(), *band) != bands.end();
        }
        const auto id = std::get<IndexId>(source);
        if (id == IndexId::BASMA) return has_unmixer && cube->sensor() == Sensor::B;
        return index_available(id, cube->sensor());
    };
    if (carries(a)) return a;
    if (carries(b)) return b;
    return nullptr;
}

std::vector<ScoredPlot> scored_from_cv(const CvResult& cv) {
    std::vector<ScoredPlot> out;
    for (std::size_t i = 0; i < cv.plot_ids.size(); ++i) {
        if (std::isnan(cv.plot_mean[i])) continue;
        out.push_back({cv.plot_mean[i], cv.labels[i] == Label::Burned});
    }
    return out;
}

void write_thresholds(const fs::path& dir, std::span<const ScoredPlot> scored, ThresholdChoice& max_choice,
                      ThresholdChoice& balanced_choice, RunManifest& manifest) {
    max_choice = max_accuracy_threshold(scored);
    balanced_choice = balanced_accuracy_threshold(scored);
    const std::vector<PolicyResult> policies{{"max_accuracy", max_choice}, {"balanced", balanced_choice}};
    write_confusion_csv(dir / "confusion.csv", policies);
    write_sweep_csv(dir / "threshold_sweep.csv", threshold_sweep(scored));
    manifest.artifact("confusion.csv");
    manifest.artifact("threshold_sweep.csv");
    manifest.doc()["thresholds"] = {{"max_accuracy", threshold_json(max_choice)},
                                    {"balanced", threshold_json(balanced_choice)}};
    manifest.warn(max_choice.warnings);
    manifest.warn(balanced_choice.warnings);
}

void write_report(const fs::path& dir, std::span<const PlotPrediction> predictions, RunManifest& manifest) {
    write_predictions_csv(dir / "predictions.csv", predictions);
    const auto summary = prediction_summary(predictions);
    write_summary_csv(dir / "prediction_summary.csv", summary);
    write_crosstab_csv(dir / "prediction_crosstab.csv", summary);
    write_density_csv(dir / "prediction_density.csv", summary);
    for (const char* f : {"predictions.csv", "prediction_summary.csv", "prediction_crosstab.csv",
                          "prediction_density.csv"}) {
        manifest.artifact(f);
    }
}

/// Table restricted to a seeded subset of rows per plot.
FeatureTable subsample_rows(const FeatureTable& table, std::size_t per_plot, std::uint64_t seed) {
    if (per_plot == 0) return table;
    std::vector<std::vector<std::size_t>> by_plot(table.plot_ids().size());
    for (std::size_t r = 0; r < table.n_rows(); ++r) by_plot[table.meta(r).plot].push_back(r);
    FeatureTable out(table.names(), table.plot_ids());
    for (std::size_t p = 0; p < by_plot.size(); ++p) {
        auto& rows = by_plot[p];
        if (rows.size() > per_plot) {
            Rng rng(derive_seed(seed, p));
            rng.shuffle(rows.begin(), rows.end());
            rows.resize(per_plot);
            std::sort(rows.begin(), rows.end());
        }
        for (const auto r : rows) out.add_row(table.meta(r), table.row(r));
    }
    return out;
}

std::vector<BurnEvent> burn_events(std::span<const PlotTruth> truth, std::span<const Plot> plots, bool burned) {
    std::map<std::string, std::size_t, std::less<>> index;
    for (std::size_t i = 0; i < plots.size(); ++i) index.emplace(plots[i].id, i);
    std::vector<BurnEvent> out;
    for (const auto& t : truth) {
        const auto it = index.find(t.plot_id);
        if (it == index.end()) continue;
        if (burned && t.burned && t.burn_date) out.push_back({it->second, *t.burn_date});
        if (!burned && !t.burned) out.push_back({it->second, t.till_date});
    }
    return out;
}

}  // namespace

std::string_view sensor_mode_name(SensorMode mode) {
    switch (mode) {
        case SensorMode::Combined: return "combined";
        case SensorMode::AOnly: return "A_only";
        case SensorMode::BOnly: return "B_only";
    }
    return "combined";
}

SensorMode parse_sensor_mode(std::string_view text) {
    if (iequals(text, "combined")) return SensorMode::Combined;
    if (iequals(text, "A_only") || iequals(text, "A")) return SensorMode::AOnly;
    if (iequals(text, "B_only") || iequals(text, "B")) return SensorMode::BOnly;
    throw ConfigError("unknown sensor mode '" + std::string(text) + "'");
}

std::string_view stage_name(Stage stage) {
    switch (stage) {
        case Stage::Ingest: return "ingest";
        case Stage::Gaps: return "gaps";
        case Stage::Separability: return "separability";
        case Stage::Features: return "features";
        case Stage::Train: return "train";
        case Stage::Cv: return "cv";
        case Stage::Threshold: return "threshold";
        case Stage::Report: return "report";
    }
    return "report";
}

Stage parse_stage(std::string_view text) {
    for (const auto s : kStages) {
        if (iequals(text, stage_name(s))) return s;
    }
    throw ConfigError("unknown stage '" + std::string(text) + "'");
}

fs::path default_output_root() {
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
    return "runs";
}

void RunConfig::apply_seed() {
    features.sample_seed = derive_seed(seed, 1);
    forest.seed = derive_seed(seed, 2);
    cv.seed = derive_seed(seed, 3);
    selection.seed = derive_seed(seed, 4);
    selection.params.seed = derive_seed(seed, 5);
}

std::string RunConfig::canonical_json() const {
    auto opt_path = [](const std::optional<fs::path>& p) -> json {
        return p ? json(p->generic_string()) : json(nullptr);
    };
    json indices = json::array();
    for (const auto id : features.indices) indices.push_back(index_name(id));
    json j = {
        {"manifest", opt_path(manifest)},
        {"plots", opt_path(plots)},
        {"events", opt_path(events)},
        {"endmembers", opt_path(endmembers)},
        {"data_tag", data_tag},
        {"last_stage", stage_name(last_stage)},
        {"sensor_mode", sensor_mode_name(sensor_mode)},
        {"features",
         {{"indices", indices},
          {"include_border", features.include_border},
          {"max_pixels_per_plot", features.max_pixels_per_plot},
          {"sample_seed", features.sample_seed},
          {"bsi_exponent", features.bsi_exponent},
          {"vdiff_threshold", features.vdiff_threshold ? json(*features.vdiff_threshold) : json(nullptr)},
          {"default_endmembers", default_endmembers}}},
        {"forest", forest_json(forest)},
        {"cv",
         {{"mode", cv_mode_name(cv.mode)}, {"k", cv.k}, {"loocv_max_plots", cv.loocv_max_plots}, {"seed", cv.seed}}},
        {"selection",
         {{"top_k", top_k},
          {"select_k", select_k},
          {"rows_per_plot", selection_rows_per_plot},
          {"holdout_fraction", selection.holdout_fraction},
          {"seed", selection.seed},
          {"forest", forest_json(selection.params)}}},
        {"separability",
         {{"sources", separability_sources},
          {"max_offset", separability_max_offset},
          {"profile_window", profile_window}}},
        {"policies", {"max_accuracy", "balanced"}},
        {"seed", seed},
    };
    return j.dump();
}

std::string RunConfig::hash() const { return sha256_hex(canonical_json()); }

PipelineInputs load_inputs(const RunConfig& config) {
    if (!config.manifest) throw ConfigError("no observation manifest given");
    if (!config.plots) throw ConfigError("no plot CSV given");
    for (const auto& p : {config.manifest, config.plots, config.events, config.endmembers}) {
        if (p && !fs::exists(*p)) throw ConfigError("path does not exist: " + p->string());
    }
    PipelineInputs in;
    auto ingested = ingest(read_manifest(*config.manifest));
    in.cube_a = std::move(ingested.cube_a);
    in.cube_b = std::move(ingested.cube_b);
    const SceneCube* ref = in.cube_a ? &*in.cube_a : in.cube_b ? &*in.cube_b : nullptr;
    if (!ref) throw ConfigError("manifest lists no observations");
    in.plots = read_plots(*config.plots, ref->geometry());
    if (config.events) in.events = read_truth_csv(*config.events);
    return in;
}

fs::path create_run_directory(const fs::path& root, const std::string& name, const std::string& config_hash) {
    fs::create_directories(root);
    const std::string stem = name + "-" + config_hash.substr(0, 12) + "-";
    for (int n = 1; n < 100000; ++n) {
        char num[8];
        std::snprintf(num, sizeof num, "%03d", n);
        const fs::path dir = root / (stem + num);
        // create_directory reports false when the directory already exists, so
        // concurrent invocations never share a directory.
        if (fs::create_directory(dir)) return dir;
    }
    throw Error("no free run directory under " + root.string());
}

RunResult run_pipeline(const RunConfig& config) {
    PipelineInputs inputs;
    try {
        inputs = load_inputs(config);
    } catch (const std::exception& e) {
        throw StageError("ingest", e.what());
    }
    return run_pipeline(config, inputs);
}

RunResult run_pipeline(const RunConfig& config, const PipelineInputs& inputs) {
    const std::string hash = config.hash();
    RunResult result;
    result.run_dir = create_run_directory(config.output_root, config.run_name, hash);
    const fs::path& dir = result.run_dir;
    RunManifest manifest(dir, config, hash, "run");
    auto wants = [&](Stage s) { return static_cast<int>(s) <= static_cast<int>(config.last_stage); };

    const SceneCube* cube_a = nullptr;
    const SceneCube* cube_b = nullptr;
    std::optional<Unmixer> unmixer;
    FeatureOptions fopts = config.features;
    FeatureTable table;
    std::vector<std::string> candidates;
    ForestModel model;
    ForestParams forest = config.forest;
    forest.n_threads = config.n_threads;
    ForestParams sel_forest = config.selection.params;
    sel_forest.n_threads = config.n_threads;

    run_stage(manifest, "ingest", [&] {
        const bool need_a = config.sensor_mode != SensorMode::BOnly;
        const bool need_b = config.sensor_mode != SensorMode::AOnly;
        if (need_a && !inputs.cube_a) throw ConfigError("sensor mode needs sensor A observations");
        if (need_b && !inputs.cube_b) throw ConfigError("sensor mode needs sensor B observations");
        if (need_a) cube_a = &*inputs.cube_a;
        if (need_b) cube_b = &*inputs.cube_b;
        if (inputs.plots.empty()) throw ConfigError("no plots");
        if (cube_b) {
            if (config.endmembers) {
                fopts.endmembers = read_endmembers(*config.endmembers);
            } else if (config.default_endmembers) {
                fopts.endmembers = default_endmembers();
            }
            if (fopts.endmembers) unmixer.emplace(*fopts.endmembers);
        }
        manifest.doc()["n_plots"] = inputs.plots.size();
        manifest.doc()["observations"] = {{"A", cube_a ? cube_a->size() : 0}, {"B", cube_b ? cube_b->size() : 0}};
    });

    if (wants(Stage::Gaps)) {
        run_stage(manifest, "gaps", [&] {
            if (cube_a) result.gaps.sensors.push_back(gap_statistics(*cube_a, inputs.plots));
            if (cube_b) result.gaps.sensors.push_back(gap_statistics(*cube_b, inputs.plots));
            write_gap_report(dir / "gap_report.csv", result.gaps);
            manifest.artifact("gap_report.csv");
        });
    }

    if (wants(Stage::Separability) && inputs.events) {
        run_stage(manifest, "separability", [&] {
            const auto burned = burn_events(*inputs.events, inputs.plots, true);
            const auto tilled = burn_events(*inputs.events, inputs.plots, false);
            std::vector<SignatureProfile> profiles;
            for (const auto& name : config.separability_sources) {
                const auto source = parse_source(name);
                const SceneCube* cube = cube_for_source(source, cube_a, cube_b, unmixer.has_value());
                if (!cube) {
                    result.warnings.push_back("separability source " + name + " unavailable in this sensor mode");
                    continue;
                }
                SeparabilityOptions opts;
                opts.max_offset = config.separability_max_offset;
                opts.index_options.bsi_exponent = fopts.bsi_exponent;
                opts.index_options.unmixer = unmixer ? &*unmixer : nullptr;
                auto curve = separability_curve(burned, inputs.plots, *cube, source, opts);
                curve.source = std::string(sensor_name(cube->sensor())) + "_" + curve.source;
                result.separability.push_back(std::move(curve));
                if (!burned.empty() && !tilled.empty()) {
                    auto profile = signature_profile(burned, tilled, inputs.plots, *cube, source,
                                                     config.profile_window, opts.index_options);
                    profile.source = result.separability.back().source;
                    profiles.push_back(std::move(profile));
                }
            }
            write_separability_csv(dir / "separability.csv", result.separability);
            manifest.artifact("separability.csv");
            if (!profiles.empty()) {
                write_profile_csv(dir / "signature_profile.csv", profiles);
                manifest.artifact("signature_profile.csv");
            }
        });
    }

    if (wants(Stage::Features)) {
        run_stage(manifest, "features", [&] {
            table = build_feature_table(cube_a, cube_b, inputs.plots, fopts);
            result.warnings.insert(result.warnings.end(), table.warnings.begin(), table.warnings.end());
            if (config.write_features) {
                table.write_csv(dir / "features.csv");
                manifest.artifact("features.csv");
            }
            for (const auto& n : table.names()) {
                if (n != "border") candidates.push_back(n);
            }
            manifest.doc()["feature_rows"] = table.n_rows();
            manifest.doc()["feature_columns"] = candidates.size();
        });
    }

    if (wants(Stage::Train)) {
        run_stage(manifest, "train", [&] {
            const auto all = labeled_rows(table, inputs.plots, candidates);
            const ForestModel full = train_forest(all.data, forest);
            full.write_importance_csv(dir / "importance_full.csv");
            manifest.artifact("importance_full.csv");

            auto ranked = full.ranked_features();
            if (config.top_k > 0 && ranked.size() > config.top_k) ranked.resize(config.top_k);
            if (config.select_k > 0 && config.select_k < ranked.size()) {
                const auto sub = subsample_rows(table, config.selection_rows_per_plot, config.selection.seed);
                SelectionOptions sopts = config.selection;
                sopts.params = sel_forest;
                const auto sel = sequential_select(sub, inputs.plots, ranked, config.select_k, sopts);
                result.selected_features = sel.selected;
                std::vector<std::vector<std::string>> rows;
                for (std::size_t i = 0; i < sel.selected.size(); ++i) {
                    rows.push_back({std::to_string(i + 1), sel.selected[i], csv::format(sel.scores[i])});
                }
                csv::write_rows(dir / "selection.csv", {"step", "feature", "holdout_accuracy"}, rows);
                manifest.artifact("selection.csv");
            } else {
                result.selected_features = ranked;
            }

            const auto selected = labeled_rows(table, inputs.plots, result.selected_features);
            model = train_forest(selected.data, forest);
            model.save(dir / "model.txt");
            model.write_importance_csv(dir / "importance.csv");
            manifest.artifact("model.txt");
            manifest.artifact("importance.csv");
            manifest.doc()["selected_features"] = result.selected_features;
            if (model.oob_accuracy) manifest.doc()["oob_accuracy"] = *model.oob_accuracy;
        });
    }

    if (wants(Stage::Cv)) {
        run_stage(manifest, "cv", [&] {
            result.cv = cross_validate(table, inputs.plots, result.selected_features, forest, config.cv);
            result.warnings.insert(result.warnings.end(), result.cv.warnings.begin(), result.cv.warnings.end());
            write_cv_scores_csv(dir / "cv_scores.csv", result.cv);
            manifest.artifact("cv_scores.csv");
            manifest.doc()["cv"] = {{"mode", cv_mode_name(result.cv.mode)}, {"n_folds", result.cv.n_folds}};
        });
    }

    if (wants(Stage::Threshold)) {
        run_stage(manifest, "threshold", [&] {
            const auto scored = scored_from_cv(result.cv);
            write_thresholds(dir, scored, result.max_accuracy, result.balanced, manifest);
        });
    }

    if (wants(Stage::Report)) {
        run_stage(manifest, "report", [&] {
            std::map<std::string, std::size_t, std::less<>> cv_index;
            for (std::size_t i = 0; i < result.cv.plot_ids.size(); ++i) cv_index.emplace(result.cv.plot_ids[i], i);

            std::vector<std::string> unscored;
            for (const auto& p : inputs.plots) {
                const auto it = cv_index.find(p.id);
                if (it == cv_index.end() || std::isnan(result.cv.plot_mean[it->second])) unscored.push_back(p.id);
            }
            const FeatureTable rest = table.filter_plots(unscored);
            const auto rest_scores = rest.n_rows() ? model.predict_table(rest) : std::vector<double>{};
            std::map<std::string, std::pair<std::vector<double>, std::vector<double>>, std::less<>> by_plot;
            for (std::size_t r = 0; r < rest.n_rows(); ++r) {
                auto& slot = by_plot[rest.plot_id(r)];
                (rest.meta(r).border ? slot.second : slot.first).push_back(rest_scores[r]);
            }

            for (const auto& p : inputs.plots) {
                PlotPrediction pred;
                pred.plot_id = p.id;
                pred.label = p.label;
                pred.group = p.group;
                const auto it = cv_index.find(p.id);
                if (it != cv_index.end() && !std::isnan(result.cv.plot_mean[it->second])) {
                    pred.mean_score = result.cv.plot_mean[it->second];
                    pred.n_pixels = result.cv.pixel_scores[it->second].size();
                } else if (const auto bt = by_plot.find(p.id); bt != by_plot.end()) {
                    const auto& scores = bt->second.first.empty() ? bt->second.second : bt->second.first;
                    pred.mean_score = aggregate_plot(scores);
                    pred.n_pixels = scores.size();
                }
                result.predictions.push_back(std::move(pred));
            }
            apply_calls(result.predictions, result.max_accuracy.threshold, result.balanced.threshold);
            write_report(dir, result.predictions, manifest);
        });
    }

    manifest.warn(result.warnings);
    manifest.complete();
    return result;
}

namespace {

std::vector<ScoredPlot> read_cv_scores(const fs::path& path) {
    const auto t = csv::Table::read(path);
    const auto lc = t.column("label");
    const auto sc = t.column("mean_score");
    std::vector<ScoredPlot> out;
    for (const auto& row : t.rows()) {
        const Label label = parse_label(row[lc]);
        const double score = csv::parse_double(row[sc]);
        if (label == Label::Unlabeled || std::isnan(score)) continue;
        out.push_back({score, label == Label::Burned});
    }
    return out;
}

}  // namespace

fs::path threshold_from_scores(const fs::path& scores, const RunConfig& config) {
    RunConfig cfg = config;
    cfg.data_tag = "scores:" + scores.generic_string();
    const std::string hash = cfg.hash();
    const fs::path dir = create_run_directory(cfg.output_root, cfg.run_name, hash);
    RunManifest manifest(dir, cfg, hash, "threshold");
    run_stage(manifest, "threshold", [&] {
        const auto scored = read_cv_scores(scores);
        ThresholdChoice max_choice;
        ThresholdChoice balanced;
        write_thresholds(dir, scored, max_choice, balanced, manifest);
    });
    manifest.complete();
    return dir;
}

fs::path report_from_predictions(const fs::path& predictions, const RunConfig& config) {
    RunConfig cfg = config;
    cfg.data_tag = "predictions:" + predictions.generic_string();
    const std::string hash = cfg.hash();
    const fs::path dir = create_run_directory(cfg.output_root, cfg.run_name, hash);
    RunManifest manifest(dir, cfg, hash, "report");
    run_stage(manifest, "report", [&] {
        const auto preds = read_predictions_csv(predictions);
        write_report(dir, preds, manifest);
    });
    manifest.complete();
    return dir;
}

fs::path run_ablation(const RunConfig& config, const PipelineInputs& inputs) {
    const std::string hash = config.hash();
    const fs::path dir = create_run_directory(config.output_root, config.run_name + "-ablation", hash);
    RunManifest manifest(dir, config, hash, "ablate");
    std::vector<AblationRun> runs;
    json members = json::array();
    for (const auto mode : {SensorMode::Combined, SensorMode::AOnly, SensorMode::BOnly}) {
        RunConfig sub = config;
        sub.sensor_mode = mode;
        sub.last_stage = Stage::Report;
        sub.output_root = dir;
        sub.run_name = std::string(sensor_mode_name(mode));
        auto res = run_pipeline(sub, inputs);
        members.push_back(res.run_dir.filename().string());
        runs.push_back({sub.run_name, std::move(res.predictions)});
    }
    manifest.doc()["runs"] = members;
    run_stage(manifest, "compare", [&] {
        const auto rows = compare_ablations(runs);
        write_ablation_csv(dir / "ablation.csv", rows);
        manifest.artifact("ablation.csv");
    });
    manifest.complete();
    return dir;
}

ConfusionCounts prediction_counts(std::span<const PlotPrediction> predictions, bool balanced) {
    ConfusionCounts c;
    for (const auto& p : predictions) {
        const auto& call_opt = balanced ? p.call_balanced : p.call_max;
        if (p.label == Label::Unlabeled || !call_opt) continue;
        const bool call = *call_opt;
        const bool truth = p.label == Label::Burned;
        if (call && truth) ++c.true_burn;
        if (call && !truth) ++c.false_burn;
        if (!call && truth) ++c.false_no_burn;
        if (!call && !truth) ++c.true_no_burn;
    }
    return c;
}

std::vector<AblationRow> compare_ablations(std::span<const AblationRun> runs) {
    auto labeled_ids = [](const AblationRun& run) {
        std::set<std::string> ids;
        for (const auto& p : run.predictions) {
            if (p.label != Label::Unlabeled) ids.insert(p.plot_id);
        }
        return ids;
    };
    std::vector<AblationRow> rows;
    if (runs.empty()) return rows;
    const auto reference = labeled_ids(runs.front());
    for (const auto& run : runs) {
        if (labeled_ids(run) != reference) {
            throw ComparisonError("run '" + run.name + "' covers a different labeled plot set than '" +
                                  runs.front().name + "'");
        }
    }
    for (const auto& run : runs) {
        for (const bool balanced : {false, true}) {
            const auto c = prediction_counts(run.predictions, balanced);
            rows.push_back({run.name, balanced ? "balanced" : "max_accuracy", c.total(), c.accuracy(),
                            c.burn_accuracy(), c.no_burn_accuracy()});
        }
    }
    return rows;
}

void write_ablation_csv(const fs::path& path, std::span<const AblationRow> rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows) {
        out.push_back({r.run, r.policy, std::to_string(r.n_plots), csv::format(r.accuracy),
                       csv::format(r.burn_accuracy), csv::format(r.no_burn_accuracy)});
    }
    csv::write_rows(path, {"run", "policy", "n_plots", "accuracy", "burn_accuracy", "no_burn_accuracy"}, out);
}

std::vector<PlotPrediction> read_predictions_csv(const fs::path& path) {
    const auto t = csv::Table::read(path);
    const auto ic = t.column("plot_id");
    const auto sc = t.column("mean_score");
    const auto mc = t.column("call_max");
    const auto bc = t.column("call_balanced");
    const auto lc = t.column("label");
    const auto gc = t.column("group");
    auto call = [&](const std::string& text) -> std::optional<bool> {
        if (text == "1") return true;
        if (text == "0") return false;
        if (text.empty() || text == "NA") return std::nullopt;
        throw FormatError(path.string() + ": bad call value '" + text + "'");
    };
    std::vector<PlotPrediction> out;
    for (const auto& row : t.rows()) {
        PlotPrediction p;
        p.plot_id = row[ic];
        const double s = csv::parse_double(row[sc]);
        if (!std::isnan(s)) p.mean_score = s;
        p.call_max = call(row[mc]);
        p.call_balanced = call(row[bc]);
        p.label = parse_label(row[lc]);
        p.group = parse_group(row[gc]);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace burnscan
