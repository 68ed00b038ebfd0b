#include "burnscan/separability.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"
#include "burnscan/stats.hpp"

namespace burnscan {

SampleStats SampleStats::of(std::span<const double> values) {
    SampleStats s;
    s.n = values.size();
    if (s.n == 0) {
        s.mean = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    s.mean = compensated_mean(values);
    s.sd = s.n >= 2 ? sample_sd(values) : 0.0;
    return s;
}

double m_statistic(const SampleStats& burned, const SampleStats& unburned) {
    if (burned.n < 2 || unburned.n < 2) {
        throw ParameterError("M-statistic needs at least two samples per group");
    }
    const double spread = burned.sd + unburned.sd;
    const double diff = std::abs(burned.mean - unburned.mean);
    if (spread == 0.0) {
        return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return diff / spread;
}

std::string source_name(const SignalSource& source) {
    if (const auto* b = std::get_if<Band>(&source)) return std::string(band_name(*b));
    return std::string(index_name(std::get<IndexId>(source)));
}

SignalSource parse_source(std::string_view name) {
    try {
        return parse_index(name);
    } catch (const FormatError&) {
    }
    try {
        return parse_band(name);
    } catch (const FormatError&) {
    }
    throw FormatError("unknown band or index '" + std::string(name) + "'");
}

std::optional<double> plot_mean_value(const BandObservation& obs, const Plot& plot,
                                      const SignalSource& source, const IndexOptions& options) {
    if (plot.pixels.empty()) return std::nullopt;
    std::size_t n_valid = 0;
    for (auto px : plot.pixels) n_valid += obs.is_valid(px) ? 1 : 0;
    if (static_cast<double>(n_valid) < kPlotObservedFraction * static_cast<double>(plot.pixels.size())) {
        return std::nullopt;
    }
    std::vector<double> values;
    values.reserve(n_valid);
    const auto bands = sensor_bands(obs.sensor);
    for (auto px : plot.pixels) {
        if (!obs.is_valid(px)) continue;
        if (const auto* b = std::get_if<Band>(&source)) {
            values.push_back(obs.band(*b)[px]);
            continue;
        }
        BandValues bv;
        for (Band b : bands) bv.set(b, obs.bands[static_cast<std::size_t>(b)][px]);
        if (auto v = compute_index(std::get<IndexId>(source), bv, options)) values.push_back(*v);
    }
    if (values.empty()) return std::nullopt;
    return compensated_mean(values);
}

namespace {

/// Plot-mean values keyed by observation position, computed on demand.
class PlotValueCache {
public:
    PlotValueCache(const SceneCube& cube, std::span<const Plot> plots, const SignalSource& source,
                   const IndexOptions& options)
        : cube_(cube), plots_(plots), source_(source), options_(options) {}

    std::optional<double> get(std::size_t plot, std::size_t obs) {
        auto [it, inserted] = cache_.try_emplace({plot, obs});
        if (inserted) {
            it->second = plot_mean_value(cube_.observations()[obs], plots_[plot], source_, options_);
        }
        return it->second;
    }

private:
    const SceneCube& cube_;
    std::span<const Plot> plots_;
    const SignalSource& source_;
    const IndexOptions& options_;
    std::map<std::pair<std::size_t, std::size_t>, std::optional<double>> cache_;
};

void check_plot_index(std::size_t plot, std::size_t n) {
    if (plot >= n) throw ParameterError("event refers to an unknown plot");
}

}  // namespace

SeparabilityCurve separability_curve(std::span<const BurnEvent> events, std::span<const Plot> plots,
                                     const SceneCube& cube, const SignalSource& source,
                                     const SeparabilityOptions& options) {
    if (options.max_offset < 0) throw ParameterError("max_offset must be >= 0");
    const auto n_off = static_cast<std::size_t>(options.max_offset) + 1;
    std::vector<std::vector<double>> burned(n_off), unburned(n_off);
    std::vector<std::set<std::pair<std::size_t, std::size_t>>> reference_used(n_off);

    PlotValueCache cache(cube, plots, source, options.index_options);
    const auto obs = cube.observations();

    SeparabilityCurve curve;
    curve.source = source_name(source);
    for (const auto& ev : events) {
        check_plot_index(ev.plot, plots.size());
        std::optional<double> pre;
        for (std::size_t i = obs.size(); i-- > 0;) {
            if (obs[i].date >= ev.date) continue;
            if (auto v = cache.get(ev.plot, i)) {
                pre = v;
                break;
            }
        }
        std::vector<std::pair<std::size_t, double>> posts;  // (offset, value)
        std::vector<std::size_t> post_obs;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            const int d = obs[i].date - ev.date;
            if (d < 0 || d > options.max_offset) continue;
            if (auto v = cache.get(ev.plot, i)) {
                posts.emplace_back(static_cast<std::size_t>(d), *v);
                post_obs.push_back(i);
            }
        }
        if (!pre || posts.empty()) {
            ++curve.skipped_events;
            continue;
        }
        for (std::size_t k = 0; k < posts.size(); ++k) {
            const auto [d, value] = posts[k];
            burned[d].push_back(value);
            if (options.mode == SeparabilityMode::PrePost) {
                unburned[d].push_back(*pre);
                continue;
            }
            for (auto ref : options.reference_plots) {
                check_plot_index(ref, plots.size());
                if (!reference_used[d].insert({ref, post_obs[k]}).second) continue;
                if (auto v = cache.get(ref, post_obs[k])) unburned[d].push_back(*v);
            }
        }
    }

    for (std::size_t d = 0; d < n_off; ++d) {
        SeparabilityPoint p;
        p.offset_days = static_cast<int>(d);
        p.n_burn = burned[d].size();
        p.n_unburn = unburned[d].size();
        if (p.n_burn >= kMinSeparabilitySamples && p.n_unburn >= kMinSeparabilitySamples) {
            p.m = m_statistic(SampleStats::of(burned[d]), SampleStats::of(unburned[d]));
        }
        curve.points.push_back(p);
    }
    return curve;
}

SignatureProfile signature_profile(std::span<const BurnEvent> burn_events,
                                   std::span<const BurnEvent> till_events, std::span<const Plot> plots,
                                   const SceneCube& cube, const SignalSource& source, int window,
                                   const IndexOptions& options) {
    if (burn_events.empty() || till_events.empty()) {
        throw ParameterError("signature profile needs burned and unburned events");
    }
    if (window < 0) throw ParameterError("window must be >= 0");
    const auto width = static_cast<std::size_t>(2 * window + 1);
    PlotValueCache cache(cube, plots, source, options);
    const auto obs = cube.observations();

    auto collect = [&](std::span<const BurnEvent> events) {
        std::vector<std::vector<double>> buckets(width);
        for (const auto& ev : events) {
            check_plot_index(ev.plot, plots.size());
            for (std::size_t i = 0; i < obs.size(); ++i) {
                const int d = obs[i].date - ev.date;
                if (d < -window || d > window) continue;
                if (auto v = cache.get(ev.plot, i)) buckets[static_cast<std::size_t>(d + window)].push_back(*v);
            }
        }
        return buckets;
    };
    const auto b = collect(burn_events);
    const auto u = collect(till_events);

    SignatureProfile prof;
    prof.source = source_name(source);
    prof.n_burned_events = burn_events.size();
    prof.n_unburned_events = till_events.size();
    for (std::size_t k = 0; k < width; ++k) {
        ProfilePoint p;
        p.offset_days = static_cast<int>(k) - window;
        if (!b[k].empty()) p.burned = SampleStats::of(b[k]);
        if (!u[k].empty()) p.unburned = SampleStats::of(u[k]);
        prof.points.push_back(p);
    }
    return prof;
}

void write_separability_csv(const std::filesystem::path& path, std::span<const SeparabilityCurve> curves) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            rows.push_back({c.source, std::to_string(p.offset_days),
                            p.m ? csv::format(*p.m) : std::string("NA"), std::to_string(p.n_burn),
                            std::to_string(p.n_unburn)});
        }
    }
    csv::write_rows(path, {"index", "offset_days", "m_value", "n_burn", "n_unburn"}, rows);
}

void write_profile_csv(const std::filesystem::path& path, std::span<const SignatureProfile> profiles) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& prof : profiles) {
        for (const auto& p : prof.points) {
            for (const auto& [group, stats] : {std::pair{"burned", p.burned}, std::pair{"unburned", p.unburned}}) {
                if (!stats) continue;
                rows.push_back({prof.source, std::to_string(p.offset_days), group, std::to_string(stats->n),
                                csv::format(stats->mean), csv::format(stats->sd)});
            }
        }
    }
    csv::write_rows(path, {"source", "offset_days", "group", "n", "mean", "sd"}, rows);
}

}  // namespace burnscan
