#include "burnscan/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>
#include <unordered_map>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"
#include "burnscan/rng.hpp"
#include "burnscan/stats.hpp"

namespace burnscan {

namespace {

std::vector<std::size_t> resolve_columns(const FeatureTable& table, std::span<const std::string> columns) {
    std::vector<std::size_t> idx;
    if (columns.empty()) {
        idx.resize(table.n_features());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        return idx;
    }
    std::string missing;
    for (const auto& c : columns) {
        if (auto i = table.column(c)) {
            idx.push_back(*i);
        } else {
            missing += " " + c;
        }
    }
    if (!missing.empty()) throw SchemaError("feature table lacks columns:" + missing);
    return idx;
}

/// Label per table plot index; Unlabeled for plots the list does not know.
std::vector<Label> table_plot_labels(const FeatureTable& table, std::span<const Plot> plots) {
    std::unordered_map<std::string_view, Label> by_id;
    for (const auto& p : plots) by_id.emplace(p.id, p.label);
    std::vector<Label> out;
    out.reserve(table.plot_ids().size());
    for (const auto& id : table.plot_ids()) {
        auto it = by_id.find(id);
        out.push_back(it == by_id.end() ? Label::Unlabeled : it->second);
    }
    return out;
}

TrainingData design(const FeatureTable& table, std::span<const std::size_t> rows, std::span<const std::size_t> cols,
                    std::span<const Label> plot_labels) {
    TrainingData d;
    d.features.reserve(cols.size());
    for (auto c : cols) d.features.push_back(table.names()[c]);
    d.n_rows = rows.size();
    d.x.reserve(rows.size() * cols.size());
    d.y.reserve(rows.size());
    for (auto r : rows) {
        for (auto c : cols) d.x.push_back(table.at(r, c));
        d.y.push_back(plot_labels[table.meta(r).plot] == Label::Burned ? 1 : 0);
    }
    return d;
}

bool is_meta_column(std::string_view name) { return name == "A_n_obs" || name == "B_n_obs" || name == "border"; }

std::uint64_t fingerprint(const FeatureTable& table, std::size_t row, std::span<const std::size_t> cols) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto c : cols) {
        double v = table.at(row, c);
        if (std::isnan(v)) v = std::numeric_limits<double>::quiet_NaN();
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

bool same_values(const FeatureTable& table, std::size_t a, std::size_t b, std::span<const std::size_t> cols) {
    for (auto c : cols) {
        const double x = table.at(a, c);
        const double y = table.at(b, c);
        if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
    return true;
}

}  // namespace

LabeledRows labeled_rows(const FeatureTable& table, std::span<const Plot> plots, std::span<const std::string> columns) {
    const auto cols = resolve_columns(table, columns);
    const auto labels = table_plot_labels(table, plots);
    LabeledRows out;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (labels[table.meta(r).plot] != Label::Unlabeled) out.table_rows.push_back(r);
    }
    out.data = design(table, out.table_rows, cols, labels);
    return out;
}

std::vector<std::vector<std::size_t>> make_folds(std::span<const Label> labels, const FoldSpec& spec) {
    const std::size_t n = labels.size();
    if (n < 2) throw ParameterError("cross-validation needs at least two plots");
    CvMode mode = spec.mode;
    if (mode == CvMode::Auto) mode = n <= spec.loocv_max_plots ? CvMode::LeaveOnePlotOut : CvMode::GroupedKFold;
    std::vector<std::vector<std::size_t>> folds;
    if (mode == CvMode::LeaveOnePlotOut) {
        for (std::size_t i = 0; i < n; ++i) folds.push_back({i});
        return folds;
    }
    if (spec.k < 2) throw ParameterError("grouped k-fold needs k >= 2");
    const std::size_t k = std::min(spec.k, n);
    folds.resize(k);
    Rng rng(spec.seed);
    std::size_t dealt = 0;
    for (Label cls : {Label::Burned, Label::NotBurned, Label::Unlabeled}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == cls) members.push_back(i);
        }
        rng.shuffle(members.begin(), members.end());
        for (auto m : members) folds[dealt++ % k].push_back(m);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    std::erase_if(folds, [](const auto& f) { return f.empty(); });
    return folds;
}

void check_fold_leakage(const FeatureTable& table, std::span<const std::size_t> train_rows,
                        std::span<const std::size_t> holdout_rows, std::span<const std::size_t> columns) {
    std::set<std::uint32_t> train_plots;
    std::set<std::pair<std::uint32_t, std::uint32_t>> train_keys;
    for (auto r : train_rows) {
        train_plots.insert(table.meta(r).plot);
        train_keys.insert({table.meta(r).plot, table.meta(r).pixel});
    }
    for (auto r : holdout_rows) {
        const auto& m = table.meta(r);
        if (train_plots.count(m.plot)) {
            throw LeakageError("plot " + table.plot_id(r) + " is in both the training and holdout sets");
        }
        if (train_keys.count({m.plot, m.pixel})) {
            throw LeakageError("pixel " + std::to_string(m.pixel) + " of plot " + table.plot_id(r) +
                               " is in both the training and holdout sets");
        }
    }

    std::vector<std::size_t> value_cols;
    for (auto c : columns) {
        if (!is_meta_column(table.names()[c])) value_cols.push_back(c);
    }
    auto informative = [&](std::size_t r) {
        return std::any_of(value_cols.begin(), value_cols.end(),
                           [&](std::size_t c) { return std::isfinite(table.at(r, c)); });
    };
    std::unordered_multimap<std::uint64_t, std::size_t> seen;
    seen.reserve(train_rows.size());
    for (auto r : train_rows) {
        if (informative(r)) seen.emplace(fingerprint(table, r, columns), r);
    }
    for (auto r : holdout_rows) {
        if (!informative(r)) continue;
        auto [lo, hi] = seen.equal_range(fingerprint(table, r, columns));
        for (auto it = lo; it != hi; ++it) {
            if (same_values(table, r, it->second, columns)) {
                throw LeakageError("holdout row of plot " + table.plot_id(r) + " (pixel " +
                                   std::to_string(table.meta(r).pixel) +
                                   ") duplicates a training row of plot " + table.plot_id(it->second));
            }
        }
    }
}

CvResult cross_validate(const FeatureTable& table, std::span<const Plot> plots,
                        std::span<const std::string> columns, const ForestParams& params, const FoldSpec& spec) {
    const auto cols = resolve_columns(table, columns);
    const auto labels = table_plot_labels(table, plots);

    std::vector<std::vector<std::size_t>> rows_of(table.plot_ids().size());
    for (std::size_t r = 0; r < table.n_rows(); ++r) rows_of[table.meta(r).plot].push_back(r);

    CvResult res;
    std::vector<std::uint32_t> cv_plot;  // table plot index per CV position
    std::set<std::string_view> in_table(table.plot_ids().begin(), table.plot_ids().end());
    for (const auto& p : plots) {
        if (p.is_labeled() && !in_table.count(p.id)) {
            res.warnings.push_back("labeled plot " + p.id + " has no feature rows; excluded");
        }
    }
    for (std::uint32_t t = 0; t < table.plot_ids().size(); ++t) {
        if (labels[t] == Label::Unlabeled) continue;
        if (rows_of[t].empty()) {
            res.warnings.push_back("labeled plot " + table.plot_ids()[t] + " has no feature rows; excluded");
            continue;
        }
        cv_plot.push_back(t);
        res.plot_ids.push_back(table.plot_ids()[t]);
        res.labels.push_back(labels[t]);
    }

    const auto folds = make_folds(res.labels, spec);
    res.n_folds = folds.size();
    res.mode = spec.mode;
    if (res.mode == CvMode::Auto) {
        res.mode = res.plot_ids.size() <= spec.loocv_max_plots ? CvMode::LeaveOnePlotOut : CvMode::GroupedKFold;
    }
    res.pixel_scores.resize(cv_plot.size());
    res.plot_mean.assign(cv_plot.size(), std::numeric_limits<double>::quiet_NaN());
    res.fold.assign(cv_plot.size(), 0);

    std::vector<char> held(cv_plot.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::fill(held.begin(), held.end(), 0);
        for (auto i : folds[f]) held[i] = 1;
        std::vector<std::size_t> train, holdout;
        for (std::size_t i = 0; i < cv_plot.size(); ++i) {
            auto& dst = held[i] ? holdout : train;
            dst.insert(dst.end(), rows_of[cv_plot[i]].begin(), rows_of[cv_plot[i]].end());
        }
        check_fold_leakage(table, train, holdout, cols);

        ForestParams fp = params;
        fp.seed = derive_seed(params.seed, f);
        const auto model = train_forest(design(table, train, cols, labels), fp);

        std::vector<double> row(cols.size());
        for (auto i : folds[f]) {
            res.fold[i] = f;
            std::vector<double> kept;
            for (auto r : rows_of[cv_plot[i]]) {
                for (std::size_t c = 0; c < cols.size(); ++c) row[c] = table.at(r, cols[c]);
                const double s = model.predict_score(row);
                res.pixel_scores[i].push_back(s);
                if (!table.meta(r).border) kept.push_back(s);
            }
            if (!kept.empty()) res.plot_mean[i] = compensated_mean(kept);
        }
    }
    return res;
}

CvResult loocv_plot(const FeatureTable& table, std::span<const Plot> plots, std::span<const std::string> columns,
                    const ForestParams& params) {
    FoldSpec spec;
    spec.mode = CvMode::LeaveOnePlotOut;
    return cross_validate(table, plots, columns, params, spec);
}

void write_cv_scores_csv(const std::filesystem::path& path, const CvResult& result) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < result.plot_ids.size(); ++i) {
        rows.push_back({result.plot_ids[i], std::to_string(result.fold[i]),
                        std::string(label_name(result.labels[i])), std::to_string(result.pixel_scores[i].size()),
                        csv::format(result.plot_mean[i])});
    }
    csv::write_rows(path, {"plot_id", "fold", "label", "n_pixels", "mean_score"}, rows);
}

SelectionResult sequential_select(const FeatureTable& table, std::span<const Plot> plots,
                                  std::span<const std::string> candidates, std::size_t target_k,
                                  const SelectionOptions& options) {
    if (target_k == 0) throw ParameterError("target_k must be > 0");
    if (target_k > candidates.size()) throw ParameterError("target_k exceeds the number of candidate features");
    if (!(options.holdout_fraction > 0.0 && options.holdout_fraction < 1.0)) {
        throw ParameterError("holdout_fraction must be in (0, 1)");
    }
    const auto cols = resolve_columns(table, candidates);
    if (std::set<std::size_t>(cols.begin(), cols.end()).size() != cols.size()) {
        throw ParameterError("candidate features contain duplicates");
    }
    const auto labels = table_plot_labels(table, plots);

    std::vector<std::vector<std::size_t>> rows_of(table.plot_ids().size());
    for (std::size_t r = 0; r < table.n_rows(); ++r) rows_of[table.meta(r).plot].push_back(r);

    // Stratified plot split.
    Rng rng(options.seed);
    std::vector<char> is_val(table.plot_ids().size(), 0);
    for (Label cls : {Label::Burned, Label::NotBurned}) {
        std::vector<std::size_t> members;
        for (std::size_t t = 0; t < labels.size(); ++t) {
            if (labels[t] == cls && !rows_of[t].empty()) members.push_back(t);
        }
        rng.shuffle(members.begin(), members.end());
        auto n_val = static_cast<std::size_t>(std::lround(options.holdout_fraction * static_cast<double>(members.size())));
        if (members.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
        for (std::size_t i = 0; i < n_val && i < members.size(); ++i) is_val[members[i]] = 1;
    }
    std::vector<std::size_t> train, val;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (labels[t] == Label::Unlabeled) continue;
        auto& dst = is_val[t] ? val : train;
        dst.insert(dst.end(), rows_of[t].begin(), rows_of[t].end());
    }
    if (train.empty() || val.empty()) throw ParameterError("selection split leaves an empty side");
    check_fold_leakage(table, train, val, cols);

    std::vector<std::uint8_t> val_y;
    for (auto r : val) val_y.push_back(labels[table.meta(r).plot] == Label::Burned ? 1 : 0);

    SelectionResult out;
    std::vector<std::size_t> chosen;
    std::vector<char> used(cols.size(), 0);
    std::vector<double> row;
    while (chosen.size() < target_k) {
        double best = -1.0;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (used[j]) continue;
            std::vector<std::size_t> subset;
            for (auto c : chosen) subset.push_back(cols[c]);
            subset.push_back(cols[j]);
            const auto model = train_forest(design(table, train, subset, labels), options.params);
            std::size_t correct = 0;
            row.resize(subset.size());
            for (std::size_t v = 0; v < val.size(); ++v) {
                for (std::size_t c = 0; c < subset.size(); ++c) row[c] = table.at(val[v], subset[c]);
                const int call = model.predict_score(row) > 0.5 ? 1 : 0;
                correct += call == val_y[v] ? 1 : 0;
            }
            const double acc = static_cast<double>(correct) / static_cast<double>(val.size());
            if (acc > best) {
                best = acc;
                best_j = j;
            }
        }
        used[best_j] = 1;
        chosen.push_back(best_j);
        out.selected.push_back(candidates[best_j]);
        out.scores.push_back(best);
    }
    return out;
}

}  // namespace burnscan
