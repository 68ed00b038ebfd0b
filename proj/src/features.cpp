#include "burnscan/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"
#include "burnscan/rng.hpp"
#include "burnscan/stats.hpp"

namespace burnscan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Source {
    bool is_band = true;
    Band band = Band::Blue;
    IndexId index = IndexId::SR;
    std::string_view name() const { return is_band ? band_name(band) : index_name(index); }
};

std::vector<Source> sources_for(Sensor sensor, const FeatureOptions& options) {
    std::vector<Source> out;
    for (Band b : sensor_bands(sensor)) {
        out.push_back({true, b, IndexId::SR});
    }
    for (IndexId id : options.indices) {
        if (!index_available(id, sensor)) continue;
        if (id == IndexId::BASMA && !options.endmembers) continue;
        out.push_back({false, Band::Blue, id});
    }
    return out;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Writes the 14 statistics of one series.
void series_features(std::span<const double> series, const std::optional<double>& threshold, double* out) {
    const auto st = temporal_stats(series);
    if (st) {
        const double vals[8] = {st->min, st->max, st->median, st->p10, st->p20, st->p80, st->p90, st->mean};
        std::copy(vals, vals + 8, out);
    } else {
        std::fill(out, out + 8, kNaN);
    }
    int k = 8;
    for (VdiffDirection dir : {VdiffDirection::Drop, VdiffDirection::Spike}) {
        for (int b = 0; b <= 2; ++b) {
            const auto v = vdiff(series, VdiffSpec{dir, b, threshold});
            out[k++] = v ? *v : kNaN;
        }
    }
}

}  // namespace

std::optional<TemporalStats> temporal_stats(std::span<const double> series) {
    if (series.empty()) {
        return std::nullopt;
    }
    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());
    TemporalStats s;
    s.min = sorted.front();
    s.max = sorted.back();
    s.median = quantile_sorted(sorted, 50.0);
    s.p10 = quantile_sorted(sorted, 10.0);
    s.p20 = quantile_sorted(sorted, 20.0);
    s.p80 = quantile_sorted(sorted, 80.0);
    s.p90 = quantile_sorted(sorted, 90.0);
    s.mean = compensated_mean(series);
    return s;
}

std::optional<double> vdiff(std::span<const double> series, const VdiffSpec& spec) {
    if (spec.buffer < 0) {
        throw ParameterError("vdiff buffer must be >= 0");
    }
    const std::size_t n = series.size();
    const auto need = static_cast<std::size_t>(spec.buffer) + 2;
    if (n < need) {
        return std::nullopt;
    }
    const double level = spec.threshold ? *spec.threshold : compensated_mean(series);
    const bool drop = spec.direction == VdiffDirection::Drop;

    // run[i]: consecutive values from i onward on the required side of the level.
    std::vector<std::size_t> run(n + 1, 0);
    for (std::size_t i = n; i-- > 0;) {
        const bool ok = drop ? series[i] < level : series[i] > level;
        run[i] = ok ? run[i + 1] + 1 : 0;
    }
    const auto hold = static_cast<std::size_t>(spec.buffer) + 1;
    double best = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        if (run[t + 1] < hold) continue;
        const double step = series[t + 1] - series[t];
        best = drop ? std::min(best, step) : std::max(best, step);
    }
    return best;
}

FeatureTable::FeatureTable(std::vector<std::string> names, std::vector<std::string> plot_ids)
    : names_(std::move(names)), plot_ids_(std::move(plot_ids)) {}

std::optional<std::size_t> FeatureTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    return std::nullopt;
}

void FeatureTable::add_row(const FeatureRowMeta& meta, std::span<const double> values) {
    if (values.size() != names_.size()) {
        throw SchemaError("row width does not match the feature schema");
    }
    meta_.push_back(meta);
    values_.insert(values_.end(), values.begin(), values.end());
}

FeatureTable FeatureTable::select(std::span<const std::string> columns) const {
    std::vector<std::size_t> idx;
    std::vector<std::string> missing;
    for (const auto& c : columns) {
        if (auto i = column(c)) {
            idx.push_back(*i);
        } else {
            missing.push_back(c);
        }
    }
    if (!missing.empty()) {
        std::string msg = "feature table lacks columns:";
        for (const auto& m : missing) msg += " " + m;
        throw SchemaError(msg);
    }
    FeatureTable out(std::vector<std::string>(columns.begin(), columns.end()), plot_ids_);
    out.meta_ = meta_;
    out.values_.reserve(meta_.size() * idx.size());
    for (std::size_t r = 0; r < meta_.size(); ++r) {
        for (auto i : idx) out.values_.push_back(at(r, i));
    }
    out.warnings = warnings;
    return out;
}

FeatureTable FeatureTable::filter_plots(std::span<const std::string> ids) const {
    std::vector<char> keep(plot_ids_.size(), 0);
    for (std::size_t p = 0; p < plot_ids_.size(); ++p) {
        keep[p] = std::find(ids.begin(), ids.end(), plot_ids_[p]) != ids.end();
    }
    FeatureTable out(names_, plot_ids_);
    for (std::size_t r = 0; r < meta_.size(); ++r) {
        if (keep[meta_[r].plot]) out.add_row(meta_[r], row(r));
    }
    return out;
}

void FeatureTable::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    out << "plot_id,pixel_id";
    for (const auto& n : names_) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < meta_.size(); ++r) {
        out << csv::escape(plot_id(r)) << ',' << meta_[r].pixel;
        for (double v : row(r)) out << ',' << csv::format(v);
        out << '\n';
    }
}

FeatureTable FeatureTable::read_csv(const std::filesystem::path& path) {
    const auto table = csv::Table::read(path);
    const auto& header = table.header();
    if (header.size() < 2 || header[0] != "plot_id" || header[1] != "pixel_id") {
        throw FormatError(path.string() + ": feature CSV must start with plot_id,pixel_id");
    }
    std::vector<std::string> names(header.begin() + 2, header.end());
    FeatureTable out(names, {});
    const auto c_border = out.column("border");
    const auto c_na = out.column("A_n_obs");
    const auto c_nb = out.column("B_n_obs");
    std::unordered_map<std::string, std::uint32_t> plot_index;
    std::vector<double> values(names.size());
    for (const auto& row : table.rows()) {
        FeatureRowMeta meta;
        auto [it, inserted] = plot_index.try_emplace(row[0], static_cast<std::uint32_t>(out.plot_ids_.size()));
        if (inserted) out.plot_ids_.push_back(row[0]);
        meta.plot = it->second;
        meta.pixel = static_cast<std::uint32_t>(csv::parse_int(row[1]));
        for (std::size_t c = 0; c < names.size(); ++c) values[c] = csv::parse_double(row[c + 2]);
        if (c_border) meta.border = values[*c_border] == 1.0;
        if (c_na && !std::isnan(values[*c_na])) meta.n_obs_a = static_cast<std::uint16_t>(values[*c_na]);
        if (c_nb && !std::isnan(values[*c_nb])) meta.n_obs_b = static_cast<std::uint16_t>(values[*c_nb]);
        out.add_row(meta, values);
    }
    return out;
}

std::vector<std::string> feature_names(bool has_a, bool has_b, const FeatureOptions& options) {
    std::vector<std::string> names;
    for (Sensor s : {Sensor::A, Sensor::B}) {
        if ((s == Sensor::A && !has_a) || (s == Sensor::B && !has_b)) continue;
        const std::string prefix(sensor_name(s));
        for (const auto& src : sources_for(s, options)) {
            for (auto stat : kStatNames) {
                names.push_back(prefix + "_" + std::string(src.name()) + "_" + std::string(stat));
            }
        }
    }
    if (has_a) names.emplace_back("A_n_obs");
    if (has_b) names.emplace_back("B_n_obs");
    names.emplace_back("border");
    return names;
}

FeatureTable build_feature_table(const SceneCube* cube_a, const SceneCube* cube_b,
                                 std::span<const Plot> plots, const FeatureOptions& options) {
    if (cube_a == nullptr && cube_b == nullptr) {
        throw ParameterError("feature table needs at least one sensor cube");
    }
    if (cube_a && cube_b && !cube_a->empty() && !cube_b->empty() &&
        !cube_a->geometry().same_grid(cube_b->geometry())) {
        throw AlignmentError("sensor cubes do not share a grid");
    }
    if (cube_a && cube_a->sensor() != Sensor::A) throw ParameterError("cube_a is not a sensor-A cube");
    if (cube_b && cube_b->sensor() != Sensor::B) throw ParameterError("cube_b is not a sensor-B cube");

    std::optional<Unmixer> unmixer;
    if (options.endmembers && cube_b) {
        unmixer.emplace(*options.endmembers);
    }
    IndexOptions idx_opts;
    idx_opts.bsi_exponent = options.bsi_exponent;
    idx_opts.unmixer = unmixer ? &*unmixer : nullptr;

    struct SensorPlan {
        const SceneCube* cube;
        std::vector<Source> sources;
    };
    std::vector<SensorPlan> plans;
    if (cube_a) plans.push_back({cube_a, sources_for(Sensor::A, options)});
    if (cube_b) {
        auto srcs = sources_for(Sensor::B, options);
        if (!unmixer) {
            std::erase_if(srcs, [](const Source& s) { return !s.is_band && s.index == IndexId::BASMA; });
        }
        plans.push_back({cube_b, std::move(srcs)});
    }

    std::vector<std::string> ids;
    ids.reserve(plots.size());
    for (const auto& p : plots) ids.push_back(p.id);
    FeatureTable table(feature_names(cube_a != nullptr, cube_b != nullptr, options), std::move(ids));
    const std::size_t width = table.n_features();

    std::vector<double> row(width);
    std::vector<std::vector<double>> series;

    for (std::size_t pi = 0; pi < plots.size(); ++pi) {
        const Plot& plot = plots[pi];
        std::vector<std::uint32_t> eligible;
        for (auto px : plot.pixels) {
            if (options.include_border || !plot.is_border(px)) eligible.push_back(px);
        }
        if (options.max_pixels_per_plot > 0 && eligible.size() > options.max_pixels_per_plot) {
            Rng rng(derive_seed(options.sample_seed, fnv1a(plot.id)));
            rng.shuffle(eligible.begin(), eligible.end());
            eligible.resize(options.max_pixels_per_plot);
            std::sort(eligible.begin(), eligible.end());
        }
        if (eligible.empty()) {
            table.warnings.push_back("plot " + plot.id + " has no eligible pixels");
            continue;
        }

        bool any_obs = false;
        for (auto px : eligible) {
            FeatureRowMeta meta;
            meta.plot = static_cast<std::uint32_t>(pi);
            meta.pixel = px;
            meta.border = plot.is_border(px);
            std::size_t col = 0;
            std::uint16_t n_obs[2] = {0, 0};
            for (const auto& plan : plans) {
                const Sensor sensor = plan.cube->sensor();
                series.assign(plan.sources.size(), {});
                std::uint16_t count = 0;
                for (const auto& obs : plan.cube->observations()) {
                    if (!obs.is_valid(px)) continue;
                    ++count;
                    BandValues bv;
                    for (Band b : sensor_bands(sensor)) {
                        const float v = obs.bands[static_cast<std::size_t>(b)][px];
                        if (v == kMaskedSentinel) {
                            throw std::logic_error("masked reflectance read at a valid pixel");
                        }
                        bv.set(b, v);
                    }
                    for (std::size_t s = 0; s < plan.sources.size(); ++s) {
                        const auto& src = plan.sources[s];
                        if (src.is_band) {
                            series[s].push_back(bv.get(src.band));
                        } else if (auto v = compute_index(src.index, bv, idx_opts)) {
                            series[s].push_back(*v);
                        }
                    }
                }
                n_obs[sensor == Sensor::A ? 0 : 1] = count;
                for (std::size_t s = 0; s < plan.sources.size(); ++s) {
                    series_features(series[s], options.vdiff_threshold, row.data() + col);
                    col += kStatNames.size();
                }
            }
            if (cube_a) row[col++] = n_obs[0];
            if (cube_b) row[col++] = n_obs[1];
            row[col++] = meta.border ? 1.0 : 0.0;
            meta.n_obs_a = n_obs[0];
            meta.n_obs_b = n_obs[1];
            any_obs = any_obs || n_obs[0] > 0 || n_obs[1] > 0;
            table.add_row(meta, row);
        }
        if (!any_obs) {
            table.warnings.push_back("plot " + plot.id + " has no valid observations; features missing");
        }
    }
    return table;
}

}  // namespace burnscan
