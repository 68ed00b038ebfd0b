#include "burnscan/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"
#include "burnscan/stats.hpp"

namespace burnscan {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<double> sorted_scores(std::span<const ScoredPlot> plots) {
    std::vector<double> s;
    s.reserve(plots.size());
    for (const auto& p : plots) {
        if (!std::isfinite(p.score)) throw ParameterError("plot scores must be finite");
        s.push_back(p.score);
    }
    std::sort(s.begin(), s.end());
    return s;
}

void require_both_labels(std::span<const ScoredPlot> plots) {
    const bool any_b = std::any_of(plots.begin(), plots.end(), [](const ScoredPlot& p) { return p.burned; });
    const bool any_u = std::any_of(plots.begin(), plots.end(), [](const ScoredPlot& p) { return !p.burned; });
    if (!any_b || !any_u) throw DegenerateModelError("threshold selection needs burned and unburned plots");
}

std::size_t grid_size() { return static_cast<std::size_t>(100.0 / kPercentileStep) + 1; }
double grid_percent(std::size_t j) { return static_cast<double>(j) * kPercentileStep; }

double percentile_in(const std::vector<double>& s, double t) {
    if (t < s.front()) return 0.0;
    if (t >= s.back()) return 100.0;
    const auto j = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), t) - s.begin()) - 1;
    const double frac = (t - s[j]) / (s[j + 1] - s[j]);
    return 100.0 * (static_cast<double>(j) + frac) / static_cast<double>(s.size() - 1);
}

std::vector<double> candidates(const std::vector<double>& s) {
    std::vector<double> c;
    c.push_back(std::nextafter(s.front(), -std::numeric_limits<double>::infinity()));
    std::unique_copy(s.begin(), s.end(), std::back_inserter(c));
    for (std::size_t j = 0; j < grid_size(); ++j) c.push_back(quantile_sorted(s, grid_percent(j)));
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
}

template <typename Objective>
ThresholdChoice best_candidate(std::span<const ScoredPlot> plots, Objective objective) {
    require_both_labels(plots);
    const auto s = sorted_scores(plots);
    ThresholdChoice best;
    double best_value = -std::numeric_limits<double>::infinity();
    for (double t : candidates(s)) {
        const auto counts = confusion_at(plots, t);
        const double v = objective(counts);
        if (v > best_value) {
            best_value = v;
            best.threshold = t;
            best.counts = counts;
        }
    }
    best.percentile = percentile_in(s, best.threshold);
    return best;
}

double gap(const ConfusionCounts& c) { return c.burn_accuracy() - c.no_burn_accuracy(); }

}  // namespace

double ConfusionCounts::accuracy() const noexcept { return ratio(true_burn + true_no_burn, total()); }
double ConfusionCounts::burn_accuracy() const noexcept { return ratio(true_burn, true_burn + false_no_burn); }
double ConfusionCounts::no_burn_accuracy() const noexcept { return ratio(true_no_burn, true_no_burn + false_burn); }

std::optional<double> aggregate_plot(std::span<const double> pixel_scores) {
    if (pixel_scores.empty()) return std::nullopt;
    return compensated_mean(pixel_scores);
}

std::optional<PlotScoreStats> plot_score_stats(std::span<const double> pixel_scores) {
    if (pixel_scores.empty()) return std::nullopt;
    std::vector<double> s(pixel_scores.begin(), pixel_scores.end());
    std::sort(s.begin(), s.end());
    return PlotScoreStats{compensated_mean(pixel_scores), quantile_sorted(s, 50.0), quantile_sorted(s, 25.0),
                          quantile_sorted(s, 75.0), quantile_sorted(s, 90.0)};
}

ConfusionCounts confusion_at(std::span<const ScoredPlot> plots, double threshold) {
    ConfusionCounts c;
    for (const auto& p : plots) {
        const bool call = p.score > threshold;
        if (call && p.burned) ++c.true_burn;
        else if (call) ++c.false_burn;
        else if (p.burned) ++c.false_no_burn;
        else ++c.true_no_burn;
    }
    return c;
}

double score_percentile(std::span<const ScoredPlot> plots, double threshold) {
    if (plots.empty()) throw ParameterError("no scores");
    return percentile_in(sorted_scores(plots), threshold);
}

double score_quantile(std::span<const ScoredPlot> plots, double percent) {
    if (plots.empty()) throw ParameterError("no scores");
    return quantile_sorted(sorted_scores(plots), percent);
}

ThresholdChoice max_accuracy_threshold(std::span<const ScoredPlot> plots) {
    return best_candidate(plots, [](const ConfusionCounts& c) { return c.accuracy(); });
}

ThresholdChoice max_kappa_threshold(std::span<const ScoredPlot> plots) {
    return best_candidate(plots, [](const ConfusionCounts& c) { return cohens_kappa(c).value; });
}

ThresholdChoice balanced_accuracy_threshold(std::span<const ScoredPlot> plots) {
    require_both_labels(plots);
    const auto s = sorted_scores(plots);
    const std::size_t m = grid_size();
    std::vector<double> t(m), d(m);
    std::vector<ConfusionCounts> cc(m);
    for (std::size_t j = 0; j < m; ++j) {
        t[j] = quantile_sorted(s, grid_percent(j));
        cc[j] = confusion_at(plots, t[j]);
        d[j] = gap(cc[j]);
    }

    ThresholdChoice out;
    auto take_grid = [&](std::size_t j) {
        out.threshold = t[j];
        out.percentile = grid_percent(j);
        out.counts = cc[j];
    };
    auto take_percent = [&](double q) {
        out.percentile = q;
        out.threshold = quantile_sorted(s, q);
        out.counts = confusion_at(plots, out.threshold);
    };

    for (std::size_t j = 0; j < m; ++j) {
        if (d[j] == 0.0) {
            std::size_t end = j;
            while (end + 1 < m && d[end + 1] == 0.0) ++end;
            take_percent((grid_percent(j) + grid_percent(end)) / 2.0);
            return out;
        }
        if (j + 1 < m && d[j] > 0.0 && d[j + 1] < 0.0) {
            const double w = d[j] / (d[j] - d[j + 1]);
            take_percent(grid_percent(j) + w * kPercentileStep);
            const double here = std::abs(gap(out.counts));
            const std::size_t better = std::abs(d[j]) <= std::abs(d[j + 1]) ? j : j + 1;
            if (here > std::abs(d[better])) take_grid(better);
            return out;
        }
    }

    std::size_t best = 0;
    for (std::size_t j = 1; j < m; ++j) {
        if (std::abs(d[j]) < std::abs(d[best])) best = j;
    }
    take_grid(best);
    out.fallback = true;
    out.warnings.push_back("burn and no-burn accuracy curves do not cross; using the smallest-gap grid point");
    return out;
}

Kappa cohens_kappa(const ConfusionCounts& c) {
    const double n = static_cast<double>(c.total());
    if (n == 0.0) throw ParameterError("kappa needs at least one plot");
    const double po = static_cast<double>(c.true_burn + c.true_no_burn) / n;
    const double pred_b = static_cast<double>(c.true_burn + c.false_burn);
    const double pred_u = static_cast<double>(c.true_no_burn + c.false_no_burn);
    const double true_b = static_cast<double>(c.true_burn + c.false_no_burn);
    const double true_u = static_cast<double>(c.true_no_burn + c.false_burn);
    const double pe = (pred_b * true_b + pred_u * true_u) / (n * n);
    if (pe >= 1.0) return {0.0, true};
    return {(po - pe) / (1.0 - pe), false};
}

std::vector<SweepPoint> threshold_sweep(std::span<const ScoredPlot> plots) {
    std::vector<SweepPoint> out;
    if (plots.empty()) return out;
    const auto s = sorted_scores(plots);
    for (std::size_t j = 0; j < grid_size(); ++j) {
        SweepPoint p;
        p.percentile = grid_percent(j);
        p.threshold = quantile_sorted(s, p.percentile);
        p.counts = confusion_at(plots, p.threshold);
        p.kappa = cohens_kappa(p.counts).value;
        out.push_back(p);
    }
    return out;
}

void apply_calls(std::span<PlotPrediction> predictions, double max_threshold, double balanced_threshold) {
    for (auto& p : predictions) {
        if (!p.mean_score) {
            p.call_max.reset();
            p.call_balanced.reset();
            continue;
        }
        p.call_max = *p.mean_score > max_threshold;
        p.call_balanced = *p.mean_score > balanced_threshold;
    }
}

PredictionSummary prediction_summary(std::span<const PlotPrediction> predictions, std::size_t n_bins) {
    if (n_bins == 0) throw ParameterError("n_bins must be > 0");
    PredictionSummary out;
    std::vector<double> max_calls, bal_calls, scores;
    for (const auto& p : predictions) {
        if (p.call_max) max_calls.push_back(*p.call_max ? 1.0 : 0.0);
        if (p.call_balanced) bal_calls.push_back(*p.call_balanced ? 1.0 : 0.0);
        if (p.mean_score) scores.push_back(*p.mean_score);
        if (p.call_max && p.call_balanced) ++out.cross_tab[*p.call_balanced ? 1 : 0][*p.call_max ? 1 : 0];
    }
    auto stat = [](std::string name, const std::vector<double>& v) {
        StatRow r;
        r.variable = std::move(name);
        r.n = v.size();
        if (v.empty()) {
            r.mean = r.sd = r.min = r.max = std::numeric_limits<double>::quiet_NaN();
            return r;
        }
        r.mean = compensated_mean(v);
        r.sd = v.size() >= 2 ? sample_sd(v) : std::numeric_limits<double>::quiet_NaN();
        r.min = *std::min_element(v.begin(), v.end());
        r.max = *std::max_element(v.begin(), v.end());
        return r;
    };
    if (predictions.empty()) return out;
    out.stats.push_back(stat("max_accuracy_call", max_calls));
    out.stats.push_back(stat("balanced_call", bal_calls));
    out.stats.push_back(stat("mean_score", scores));

    const double width = 1.0 / static_cast<double>(n_bins);
    auto histogram = [&](const std::string& split, const std::string& level, const std::vector<double>& v) {
        std::vector<std::size_t> counts(n_bins, 0);
        for (double x : v) {
            auto b = static_cast<std::size_t>(std::clamp(x, 0.0, 1.0) / width);
            counts[std::min(b, n_bins - 1)] += 1;
        }
        for (std::size_t b = 0; b < n_bins; ++b) {
            DensityBin bin;
            bin.split = split;
            bin.level = level;
            bin.lo = static_cast<double>(b) * width;
            bin.hi = static_cast<double>(b + 1) * width;
            bin.count = counts[b];
            bin.density = v.empty() ? 0.0 : static_cast<double>(counts[b]) / (static_cast<double>(v.size()) * width);
            out.densities.push_back(bin);
        }
    };
    std::map<std::string, std::vector<double>> by_max, by_bal, by_group;
    for (const auto& p : predictions) {
        if (!p.mean_score) continue;
        if (p.call_max) by_max[*p.call_max ? "1" : "0"].push_back(*p.mean_score);
        if (p.call_balanced) by_bal[*p.call_balanced ? "1" : "0"].push_back(*p.mean_score);
        by_group[std::string(group_name(p.group))].push_back(*p.mean_score);
    }
    for (const auto& [level, v] : by_max) histogram("max_call", level, v);
    for (const auto& [level, v] : by_bal) histogram("balanced_call", level, v);
    for (const auto& [level, v] : by_group) histogram("group", level, v);
    return out;
}

namespace {

std::string call_text(const std::optional<bool>& c) { return c ? (*c ? "1" : "0") : "NA"; }

}  // namespace

void write_predictions_csv(const std::filesystem::path& path, std::span<const PlotPrediction> predictions) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : predictions) {
        rows.push_back({p.plot_id, p.mean_score ? csv::format(*p.mean_score) : "NA",
                        call_text(p.call_max), call_text(p.call_balanced), std::string(label_name(p.label)),
                        std::string(group_name(p.group))});
    }
    csv::write_rows(path, {"plot_id", "mean_score", "call_max", "call_balanced", "label", "group"}, rows);
}

void write_confusion_csv(const std::filesystem::path& path, std::span<const PolicyResult> results) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : results) {
        const auto& c = r.choice.counts;
        rows.push_back({r.policy, csv::format(r.choice.threshold), csv::format(r.choice.percentile),
                        std::to_string(c.false_burn), std::to_string(c.false_no_burn), std::to_string(c.true_burn),
                        std::to_string(c.true_no_burn), csv::format(c.accuracy()), csv::format(c.burn_accuracy()),
                        csv::format(c.no_burn_accuracy()), csv::format(cohens_kappa(c).value)});
    }
    csv::write_rows(path,
                    {"policy", "threshold", "percentile", "false_burn", "false_no_burn", "true_burn", "true_no_burn",
                     "accuracy", "burn_accuracy", "no_burn_accuracy", "kappa"},
                    rows);
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> sweep) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : sweep) {
        rows.push_back({csv::format(p.percentile), csv::format(p.threshold), csv::format(p.counts.accuracy()),
                        csv::format(p.counts.burn_accuracy()), csv::format(p.counts.no_burn_accuracy()),
                        csv::format(p.kappa)});
    }
    csv::write_rows(path, {"percentile", "threshold", "accuracy", "burn_accuracy", "no_burn_accuracy", "kappa"},
                    rows);
}

void write_summary_csv(const std::filesystem::path& path, const PredictionSummary& summary) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : summary.stats) {
        rows.push_back({s.variable, std::to_string(s.n), csv::format(s.mean), csv::format(s.sd), csv::format(s.min),
                        csv::format(s.max)});
    }
    csv::write_rows(path, {"variable", "n", "mean", "sd", "min", "max"}, rows);
}

void write_crosstab_csv(const std::filesystem::path& path, const PredictionSummary& summary) {
    std::vector<std::vector<std::string>> rows;
    for (int b = 0; b < 2; ++b) {
        for (int m = 0; m < 2; ++m) {
            rows.push_back({std::to_string(b), std::to_string(m), std::to_string(summary.cross_tab[b][m])});
        }
    }
    csv::write_rows(path, {"call_balanced", "call_max", "n_plots"}, rows);
}

void write_density_csv(const std::filesystem::path& path, const PredictionSummary& summary) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& d : summary.densities) {
        rows.push_back({d.split, d.level, csv::format(d.lo), csv::format(d.hi), std::to_string(d.count),
                        csv::format(d.density)});
    }
    csv::write_rows(path, {"split", "level", "bin_lo", "bin_hi", "count", "density"}, rows);
}

}  // namespace burnscan
