#include "burnscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"
#include "burnscan/rng.hpp"
#include "burnscan/scene_io.hpp"

namespace burnscan {

namespace fs = std::filesystem;

namespace {

// Stream ids for derive_seed.
enum Stream : std::uint64_t { kLayout = 1, kTruth = 2, kCloudA = 3, kCloudB = 4, kPlotOffset = 5, kPixels = 16 };

void check_prob(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
}

void check_cadence(const SensorCadence& c, const char* name) {
    if (!c.enabled) return;
    const std::string n(name);
    if (c.revisit_days <= 0) throw ConfigError(n + ".revisit_days must be > 0");
    check_prob(c.acquire_prob, (n + ".acquire_prob").c_str());
    check_prob(c.cloud_onset, (n + ".cloud_onset").c_str());
    check_prob(c.cloud_clear, (n + ".cloud_clear").c_str());
    check_prob(c.haze_prob, (n + ".haze_prob").c_str());
    if (c.cloud_onset > 0.0 && c.cloud_clear <= 0.0) throw ConfigError(n + ": clouds never clear");
    if (!(c.noise_sd >= 0.0)) throw ConfigError(n + ".noise_sd must be >= 0");
    if (!(c.char_visibility >= 0.0)) throw ConfigError(n + ".char_visibility must be >= 0");
}

struct PlotShape {
    int w = 0;
    int h = 0;
    int col = 0;
    int row = 0;
};

GridGeometry pack(std::vector<PlotShape>& shapes, const ScenarioConfig& cfg) {
    std::vector<std::size_t> order(shapes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return shapes[a].h > shapes[b].h; });

    double footprint = 0.0;
    int widest = 0;
    for (const auto& s : shapes) {
        footprint += static_cast<double>(s.w + 1) * static_cast<double>(s.h + 1);
        widest = std::max(widest, s.w);
    }
    int width = cfg.max_cols > 0 ? cfg.max_cols : std::max(widest + 2, static_cast<int>(std::ceil(std::sqrt(footprint))));
    if (widest + 2 > width) throw ConfigError("a plot is wider than the grid");

    int x = 1, y = 1, shelf = 0;
    for (auto i : order) {
        auto& s = shapes[i];
        if (x + s.w + 1 > width) {
            y += shelf + 1;
            x = 1;
            shelf = 0;
        }
        s.col = x;
        s.row = y;
        x += s.w + 1;
        shelf = std::max(shelf, s.h);
    }
    const int height = y + shelf + 1;
    if (cfg.max_rows > 0 && height > cfg.max_rows) {
        throw ConfigError("plots do not fit in the configured extent (" + std::to_string(height) + " rows needed)");
    }
    GridGeometry g;
    g.ncols = width;
    g.nrows = height;
    g.xll = 0.0;
    g.yll = 0.0;
    g.cellsize = cfg.cellsize;
    return g;
}

std::vector<Point> rectangle(const GridGeometry& g, const PlotShape& s) {
    const double x0 = g.xll + s.col * g.cellsize;
    const double x1 = x0 + s.w * g.cellsize;
    const double y1 = g.yll + (g.nrows - s.row) * g.cellsize;
    const double y0 = y1 - s.h * g.cellsize;
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

std::string plot_name(std::size_t i) {
    std::string digits = std::to_string(i + 1);
    return "P" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

struct Acquisitions {
    std::vector<Date> dates;
    std::vector<std::vector<std::uint8_t>> clear;  // [acquisition][plot]
};

Acquisitions schedule(const SensorCadence& c, const ScenarioConfig& cfg, std::size_t n_plots, std::uint64_t stream) {
    Acquisitions a;
    if (!c.enabled) return a;
    Rng rng(derive_seed(cfg.seed, stream));
    const double stationary = c.cloud_onset > 0.0 ? c.cloud_onset / (c.cloud_onset + c.cloud_clear) : 0.0;
    std::vector<std::uint8_t> cloudy(n_plots);
    for (auto& s : cloudy) s = rng.bernoulli(stationary) ? 1 : 0;
    for (Date d = cfg.season_start; d <= cfg.season_end; d = d + 1) {
        if (d != cfg.season_start) {
            for (auto& s : cloudy) s = s ? (rng.bernoulli(c.cloud_clear) ? 0 : 1) : (rng.bernoulli(c.cloud_onset) ? 1 : 0);
        }
        if ((d - cfg.season_start) % c.revisit_days != 0) continue;
        if (!rng.bernoulli(c.acquire_prob)) continue;
        std::vector<std::uint8_t> clear(n_plots);
        for (std::size_t p = 0; p < n_plots; ++p) {
            const bool hazy = rng.bernoulli(c.haze_prob);
            clear[p] = !cloudy[p] && !hazy ? 1 : 0;
        }
        a.dates.push_back(d);
        a.clear.push_back(std::move(clear));
    }
    return a;
}

/// Expected plot reflectance (before per-observation and pixel noise).
Spectrum plot_spectrum(const SignalModel& sig, const PlotTruth& t, Date d, double visibility) {
    Spectrum out{};
    const Date event = t.burned ? *t.burn_date : t.till_date;
    const Spectrum& base = d >= event ? sig.tilled : sig.stubble;
    double c = 0.0;
    if (t.burned && d >= *t.burn_date) {
        const double age = static_cast<double>(d - *t.burn_date);
        c = t.intensity * std::exp2(-age / sig.char_half_life_days) * visibility;
        if (d >= t.till_date) c *= sig.till_char_retention;
    }
    for (std::size_t b = 0; b < kBandCount; ++b) out[b] = base[b] + c * sig.char_delta[b];
    return out;
}

SceneCube render(Sensor sensor, const SensorCadence& c, const Acquisitions& acq, const ScenarioConfig& cfg,
                 const GridGeometry& grid, std::span<const Plot> plots, std::span<const PlotTruth> truth,
                 const std::vector<Spectrum>& plot_offsets) {
    const auto bands = sensor_bands(sensor);
    std::vector<BandObservation> observations;
    observations.reserve(acq.dates.size());
    const std::uint64_t sensor_stream = sensor == Sensor::A ? 0 : 1;
    for (std::size_t o = 0; o < acq.dates.size(); ++o) {
        BandObservation obs;
        obs.sensor = sensor;
        obs.date = acq.dates[o];
        obs.geometry = grid;
        obs.valid.assign(grid.cell_count(), 1);
        for (Band b : bands) {
            obs.bands[static_cast<std::size_t>(b)].assign(grid.cell_count(),
                                                          static_cast<float>(cfg.signal.stubble[static_cast<std::size_t>(b)]));
        }
        for (std::size_t p = 0; p < plots.size(); ++p) {
            const auto& pixels = plots[p].pixels;
            if (!acq.clear[o][p]) {
                for (auto px : pixels) {
                    obs.valid[px] = 0;
                    for (Band b : bands) obs.bands[static_cast<std::size_t>(b)][px] = kMaskedSentinel;
                }
                continue;
            }
            Rng rng(derive_seed(cfg.seed, kPixels + ((sensor_stream * 4096 + o) << 20) + p));
            const Spectrum mean = plot_spectrum(cfg.signal, truth[p], obs.date, c.char_visibility);
            Spectrum level{};
            for (Band b : bands) {
                const auto i = static_cast<std::size_t>(b);
                level[i] = mean[i] + plot_offsets[p][i] + rng.normal(0.0, cfg.signal.observation_offset_sd);
            }
            for (auto px : pixels) {
                for (Band b : bands) {
                    const auto i = static_cast<std::size_t>(b);
                    const double v = std::clamp(level[i] + rng.normal(0.0, c.noise_sd), 0.0, 1.0);
                    obs.bands[i][px] = static_cast<float>(v);
                }
            }
        }
        observations.push_back(std::move(obs));
    }
    return SceneCube(sensor, std::move(observations));
}

}  // namespace

void ScenarioConfig::validate() const {
    if (n_plots == 0) throw ConfigError("n_plots must be > 0");
    if (!(area_median_ha > 0.0) || !(area_mean_ha >= area_median_ha)) {
        throw ConfigError("plot areas need 0 < median <= mean");
    }
    if (!(area_min_ha > 0.0) || !(area_max_ha >= area_min_ha)) throw ConfigError("invalid plot area bounds");
    if (!(cellsize > 0.0)) throw ConfigError("cellsize must be > 0");
    check_prob(burn_prob, "burn_prob");
    check_prob(treatment_effect, "treatment_effect");
    check_prob(treatment_fraction, "treatment_fraction");
    check_prob(labeled_fraction, "labeled_fraction");
    if (season_end < season_start) throw ConfigError("season ends before it starts");
    if (event_window_end < event_window_start) throw ConfigError("event window ends before it starts");
    if (event_window_start < season_start || event_window_end > season_end) {
        throw ConfigError("event window must lie within the season");
    }
    if (till_lag_min < 0 || till_lag_max < till_lag_min) throw ConfigError("invalid till lag range");
    if (!(signal.char_half_life_days > 0.0)) throw ConfigError("char half-life must be > 0");
    if (!(signal.intensity_min >= 0.0 && signal.intensity_max >= signal.intensity_min)) {
        throw ConfigError("invalid burn intensity range");
    }
    check_prob(signal.till_char_retention, "till_char_retention");
    for (const auto* s : {&signal.stubble, &signal.tilled}) {
        for (double v : *s) {
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("band levels must be in [0, 1]");
        }
    }
    if (!(signal.plot_offset_sd >= 0.0 && signal.observation_offset_sd >= 0.0)) {
        throw ConfigError("offset sds must be >= 0");
    }
    check_cadence(sensor_a, "sensor_a");
    check_cadence(sensor_b, "sensor_b");
    if (!sensor_a.enabled && !sensor_b.enabled) throw ConfigError("at least one sensor must be enabled");
}

void GroundTruth::refresh_gaps(std::span<const Plot> plots_in) {
    gaps.sensors.clear();
    for (Sensor s : {Sensor::A, Sensor::B}) {
        const auto& per_plot = clear_dates[static_cast<std::size_t>(s)];
        if (per_plot.empty()) continue;
        SensorGapReport rep;
        rep.sensor = s;
        for (std::size_t p = 0; p < per_plot.size(); ++p) {
            rep.plots.push_back({plots_in[p].id, per_plot[p].size(), gaps_from_dates(per_plot[p])});
        }
        rep.summary = summarize_gaps(rep.plots);
        gaps.sensors.push_back(std::move(rep));
    }
}

Scenario generate(const ScenarioConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_plots;

    Rng layout(derive_seed(cfg.seed, kLayout));
    const double mu = std::log(cfg.area_median_ha);
    const double sigma = std::sqrt(2.0 * std::log(cfg.area_mean_ha / cfg.area_median_ha));
    const double cell_area_ha = cfg.cellsize * cfg.cellsize / 10000.0;
    std::vector<PlotShape> shapes(n);
    for (auto& s : shapes) {
        const double area = std::clamp(std::exp(layout.normal(mu, sigma)), cfg.area_min_ha, cfg.area_max_ha);
        const double cells = area / cell_area_ha;
        const double aspect = layout.uniform(1.0, 2.5);
        s.w = std::max(2, static_cast<int>(std::lround(std::sqrt(cells * aspect))));
        s.h = std::max(2, static_cast<int>(std::lround(cells / s.w)));
    }
    const GridGeometry grid = pack(shapes, cfg);

    Scenario sc;
    Rng truth_rng(derive_seed(cfg.seed, kTruth));
    const int window = cfg.event_window_end - cfg.event_window_start;
    for (std::size_t i = 0; i < n; ++i) {
        PlotTruth t;
        t.plot_id = plot_name(i);
        const bool treated = truth_rng.bernoulli(cfg.treatment_fraction);
        const double p_burn = cfg.burn_prob * (treated ? 1.0 - cfg.treatment_effect : 1.0);
        t.burned = truth_rng.bernoulli(p_burn);
        const Date event = cfg.event_window_start + static_cast<int>(truth_rng.below(static_cast<std::uint64_t>(window) + 1));
        const int lag = cfg.till_lag_min +
                        static_cast<int>(truth_rng.below(static_cast<std::uint64_t>(cfg.till_lag_max - cfg.till_lag_min) + 1));
        const double intensity = truth_rng.uniform(cfg.signal.intensity_min, cfg.signal.intensity_max);
        const bool labeled = truth_rng.bernoulli(cfg.labeled_fraction);
        if (t.burned) {
            t.burn_date = event;
            t.till_date = event + lag;
            t.intensity = intensity;
        } else {
            t.till_date = event;
        }
        t.true_label = t.burned ? Label::Burned : Label::NotBurned;
        sc.plots.push_back(make_plot(t.plot_id, rectangle(grid, shapes[i]), grid, labeled ? t.true_label : Label::Unlabeled,
                                     treated ? Group::Treatment : Group::Control));
        sc.truth.plots.push_back(std::move(t));
    }

    std::vector<Spectrum> offsets(n);
    Rng offset_rng(derive_seed(cfg.seed, kPlotOffset));
    for (auto& o : offsets) {
        for (auto& v : o) v = offset_rng.normal(0.0, cfg.signal.plot_offset_sd);
    }

    for (Sensor s : {Sensor::A, Sensor::B}) {
        const auto& cad = s == Sensor::A ? cfg.sensor_a : cfg.sensor_b;
        if (!cad.enabled) continue;
        const auto acq = schedule(cad, cfg, n, s == Sensor::A ? kCloudA : kCloudB);
        auto& clear = sc.truth.clear_dates[static_cast<std::size_t>(s)];
        clear.assign(n, {});
        for (std::size_t o = 0; o < acq.dates.size(); ++o) {
            for (std::size_t p = 0; p < n; ++p) {
                if (acq.clear[o][p]) clear[p].push_back(acq.dates[o]);
            }
        }
        auto cube = render(s, cad, acq, cfg, grid, sc.plots, sc.truth.plots, offsets);
        (s == Sensor::A ? sc.cube_a : sc.cube_b) = std::move(cube);
    }
    sc.truth.refresh_gaps(sc.plots);
    return sc;
}

SceneCube inject_gaps(const SceneCube& cube, std::span<const GapWindow> schedule, std::span<const Plot> plots,
                      GroundTruth* truth) {
    for (const auto& w : schedule) {
        if (w.to < w.from) throw ParameterError("gap window ends before it starts");
        if (w.plot && *w.plot >= plots.size()) throw ParameterError("gap window refers to an unknown plot");
    }
    const auto bands = sensor_bands(cube.sensor());
    std::vector<BandObservation> kept;
    for (const auto& obs : cube.observations()) {
        const bool dropped = std::any_of(schedule.begin(), schedule.end(), [&](const GapWindow& w) {
            return !w.plot && obs.date >= w.from && obs.date <= w.to;
        });
        if (dropped) continue;
        BandObservation copy = obs;
        for (const auto& w : schedule) {
            if (!w.plot || obs.date < w.from || obs.date > w.to) continue;
            for (auto px : plots[*w.plot].pixels) {
                copy.valid[px] = 0;
                for (Band b : bands) copy.bands[static_cast<std::size_t>(b)][px] = kMaskedSentinel;
            }
        }
        kept.push_back(std::move(copy));
    }

    if (truth) {
        auto& clear = truth->clear_dates[static_cast<std::size_t>(cube.sensor())];
        for (std::size_t p = 0; p < clear.size(); ++p) {
            std::erase_if(clear[p], [&](Date d) {
                return std::any_of(schedule.begin(), schedule.end(), [&](const GapWindow& w) {
                    return d >= w.from && d <= w.to && (!w.plot || *w.plot == p);
                });
            });
        }
        truth->refresh_gaps(plots);
    }
    return SceneCube(cube.sensor(), std::move(kept));
}

std::vector<GapWindow> post_event_windows(const GroundTruth& truth, int days) {
    if (days < 0) throw ParameterError("days must be >= 0");
    std::vector<GapWindow> out;
    for (std::size_t p = 0; p < truth.plots.size(); ++p) {
        const auto& t = truth.plots[p];
        const Date event = t.burned ? *t.burn_date : t.till_date;
        out.push_back({p, event, event + days});
    }
    return out;
}

void write_truth_csv(const fs::path& path, const GroundTruth& truth) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& t : truth.plots) {
        rows.push_back({t.plot_id, t.burned ? "1" : "0", t.burn_date ? t.burn_date->to_string() : "NA",
                        t.till_date.to_string(), csv::format(t.intensity)});
    }
    csv::write_rows(path, {"plot_id", "burned", "burn_date", "till_date", "intensity"}, rows);
}

std::vector<PlotTruth> read_truth_csv(const fs::path& path) {
    const auto table = csv::Table::read(path);
    const auto c_id = table.column("plot_id");
    const auto c_burned = table.column("burned");
    const auto c_burn = table.column("burn_date");
    const auto c_till = table.find_column("till_date");
    const auto c_int = table.find_column("intensity");
    std::vector<PlotTruth> out;
    for (const auto& row : table.rows()) {
        PlotTruth t;
        t.plot_id = row[c_id];
        t.burned = csv::parse_int(row[c_burned]) != 0;
        if (row[c_burn] != "NA" && !row[c_burn].empty()) t.burn_date = Date::parse(row[c_burn]);
        if (t.burned && !t.burn_date) throw FormatError(path.string() + ": burned plot " + t.plot_id + " lacks a burn_date");
        if (c_till && row[*c_till] != "NA" && !row[*c_till].empty()) {
            t.till_date = Date::parse(row[*c_till]);
        } else if (t.burn_date) {
            t.till_date = *t.burn_date;
        }
        if (c_int) {
            const double v = csv::parse_double(row[*c_int]);
            t.intensity = std::isnan(v) ? 0.0 : v;
        }
        t.true_label = t.burned ? Label::Burned : Label::NotBurned;
        out.push_back(std::move(t));
    }
    return out;
}

void write_scenario(const fs::path& dir, const Scenario& scenario) {
    fs::create_directories(dir / "grids");
    fs::create_directories(dir / "masks");
    Manifest manifest;
    for (const auto* cube : {scenario.cube_a ? &*scenario.cube_a : nullptr, scenario.cube_b ? &*scenario.cube_b : nullptr}) {
        if (!cube) continue;
        const std::string sensor(sensor_name(cube->sensor()));
        for (const auto& obs : cube->observations()) {
            const std::string stem = sensor + "_" + obs.date.to_string();
            const fs::path mask_path = dir / "masks" / (stem + ".asc");
            std::vector<double> prob(obs.valid.size());
            for (std::size_t i = 0; i < prob.size(); ++i) prob[i] = obs.valid[i] ? 0.0 : 1.0;
            write_ascii_grid(mask_path, obs.geometry, prob, -1.0);
            for (Band b : sensor_bands(cube->sensor())) {
                const auto src = obs.band(b);
                std::vector<double> dn(src.size());
                for (std::size_t i = 0; i < dn.size(); ++i) {
                    dn[i] = obs.valid[i] ? std::round(static_cast<double>(src[i]) * manifest.scale) : -9999.0;
                }
                const fs::path grid_path = dir / "grids" / (stem + "_" + std::string(band_name(b)) + ".asc");
                write_ascii_grid(grid_path, obs.geometry, dn, -9999.0);
                manifest.entries.push_back({cube->sensor(), obs.date, b, grid_path, mask_path});
            }
        }
    }
    write_manifest(dir / "manifest.json", manifest);
    write_plots(dir / "plots.csv", scenario.plots);
    write_truth_csv(dir / "truth.csv", scenario.truth);
    write_gap_report(dir / "gap_truth.csv", scenario.truth.gaps);
}

}  // namespace burnscan
