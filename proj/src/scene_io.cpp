#include "burnscan/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include "json.hpp"
#include <sstream>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"

namespace burnscan {

namespace fs = std::filesystem;
using json = nlohmann::json;

AsciiGrid read_ascii_grid(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open grid " + path.string());
    }
    AsciiGrid g;
    std::string header;
    if (!std::getline(in, header)) {
        throw FormatError(path.string() + ": missing header");
    }
    std::istringstream hs(header);
    if (!(hs >> g.geometry.ncols >> g.geometry.nrows >> g.geometry.xll >> g.geometry.yll >>
          g.geometry.cellsize >> g.nodata)) {
        throw FormatError(path.string() + ": header must be 'ncols nrows xll yll cellsize nodata'");
    }
    if (g.geometry.ncols <= 0 || g.geometry.nrows <= 0 || !(g.geometry.cellsize > 0.0)) {
        throw FormatError(path.string() + ": invalid grid dimensions");
    }
    const std::size_t n = g.geometry.cell_count();
    g.values.resize(n);
    std::string token;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> token)) {
            throw FormatError(path.string() + ": expected " + std::to_string(n) + " values, got " +
                              std::to_string(i));
        }
        g.values[i] = csv::parse_double(token);
    }
    if (in >> token) {
        throw FormatError(path.string() + ": trailing values after grid");
    }
    return g;
}

void write_ascii_grid(const fs::path& path, const GridGeometry& geometry, std::span<const double> values,
                      double nodata, int digits) {
    if (values.size() != geometry.cell_count()) {
        throw AlignmentError("grid values do not match geometry");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    out << geometry.ncols << ' ' << geometry.nrows << ' ' << csv::format(geometry.xll) << ' '
        << csv::format(geometry.yll) << ' ' << csv::format(geometry.cellsize) << ' '
        << csv::format(nodata) << '\n';
    for (int r = 0; r < geometry.nrows; ++r) {
        for (int c = 0; c < geometry.ncols; ++c) {
            const double v = values[geometry.index(c, r)];
            if (c) out << ' ';
            out << (digits < 0 ? csv::format(v) : csv::format_fixed(v, digits));
        }
        out << '\n';
    }
}

Manifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open manifest " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    Manifest m;
    const json* list = &doc;
    if (doc.is_object()) {
        if (!doc.contains("observations")) {
            throw FormatError(path.string() + ": missing 'observations'");
        }
        list = &doc["observations"];
        m.scale = doc.value("scale", m.scale);
        m.mask_threshold = doc.value("mask_threshold", m.mask_threshold);
        if (doc.contains("resolution")) m.resolution = doc["resolution"].get<double>();
    }
    if (!list->is_array()) {
        throw FormatError(path.string() + ": observations must be an array");
    }
    const fs::path base = path.parent_path();
    auto resolve = [&base](const std::string& p) {
        fs::path q(p);
        return q.is_absolute() ? q : base / q;
    };
    for (const auto& item : *list) {
        try {
            ManifestEntry e;
            e.sensor = parse_sensor(item.at("sensor").get<std::string>());
            e.date = Date::parse(item.at("date").get<std::string>());
            e.band = parse_band(item.at("band").get<std::string>());
            e.grid = resolve(item.at("grid").get<std::string>());
            if (item.contains("mask") && !item["mask"].is_null()) {
                e.mask = resolve(item["mask"].get<std::string>());
            }
            m.entries.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw FormatError(path.string() + ": bad observation entry: " + ex.what());
        }
    }
    if (!(m.scale > 0.0)) {
        throw FormatError(path.string() + ": scale must be positive");
    }
    return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
    json doc;
    doc["scale"] = manifest.scale;
    doc["mask_threshold"] = manifest.mask_threshold;
    if (manifest.resolution) doc["resolution"] = *manifest.resolution;
    json list = json::array();
    const fs::path base = path.parent_path();
    for (const auto& e : manifest.entries) {
        json item;
        item["sensor"] = std::string(sensor_name(e.sensor));
        item["date"] = e.date.to_string();
        item["band"] = std::string(band_name(e.band));
        item["grid"] = e.grid.lexically_proximate(base).generic_string();
        if (e.mask) item["mask"] = e.mask->lexically_proximate(base).generic_string();
        list.push_back(std::move(item));
    }
    doc["observations"] = std::move(list);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    out << doc.dump(2) << '\n';
}

const SceneCube* IngestResult::cube(Sensor s) const {
    const auto& c = (s == Sensor::A) ? cube_a : cube_b;
    return c ? &*c : nullptr;
}

namespace {

// Loads a grid and brings it onto the common cell size.
MaskedRaster load_on_grid(const fs::path& path, double resolution, bool is_mask, double scale) {
    const AsciiGrid g = read_ascii_grid(path);
    MaskedRaster r;
    r.geometry = g.geometry;
    r.values.resize(g.values.size());
    r.valid.resize(g.values.size());
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        const double raw = g.values[i];
        const bool ok = !std::isnan(raw) && raw != g.nodata;
        r.valid[i] = ok ? 1 : 0;
        r.values[i] = ok ? (is_mask ? raw : raw / scale) : 0.0;
    }
    const double ratio = g.geometry.cellsize / resolution;
    const int factor = static_cast<int>(std::lround(ratio));
    if (factor < 1 || std::abs(ratio - factor) > 1e-9 * ratio) {
        throw AlignmentError(path.string() + ": cell size is not an integer multiple of the common grid");
    }
    if (factor > 1) {
        r = upsample_cubic(r, factor);
    }
    return r;
}

}  // namespace

IngestResult ingest(const Manifest& manifest) {
    if (manifest.entries.empty()) {
        throw FormatError("manifest lists no observations");
    }
    double resolution = 0.0;
    if (manifest.resolution) {
        resolution = *manifest.resolution;
    } else {
        resolution = std::numeric_limits<double>::infinity();
        for (const auto& e : manifest.entries) {
            std::ifstream in(e.grid);
            GridGeometry g;
            double nodata;
            if (!(in >> g.ncols >> g.nrows >> g.xll >> g.yll >> g.cellsize >> nodata)) {
                throw FormatError("cannot read grid header " + e.grid.string());
            }
            resolution = std::min(resolution, g.cellsize);
        }
    }

    // (sensor, date) -> entries
    std::map<std::pair<int, Date>, std::vector<const ManifestEntry*>> groups;
    for (const auto& e : manifest.entries) {
        groups[{static_cast<int>(e.sensor), e.date}].push_back(&e);
    }

    std::map<fs::path, MaskedRaster> mask_cache;
    std::vector<BandObservation> by_sensor[2];
    std::optional<GridGeometry> common;
    for (const auto& [key, entries] : groups) {
        BandObservation obs;
        obs.sensor = static_cast<Sensor>(key.first);
        obs.date = key.second;
        std::vector<double> cloud;
        for (const auto* e : entries) {
            if (obs.has_band(e->band)) {
                throw FormatError("band " + std::string(band_name(e->band)) + " listed twice for " +
                                  std::string(sensor_name(obs.sensor)) + " " + obs.date.to_string());
            }
            MaskedRaster r = load_on_grid(e->grid, resolution, false, manifest.scale);
            if (!common) {
                common = r.geometry;
            } else if (!r.geometry.same_grid(*common, 1e-6 * resolution)) {
                throw AlignmentError(e->grid.string() + " does not align with the common grid");
            }
            if (obs.valid.empty()) {
                obs.geometry = *common;
                obs.valid.assign(common->cell_count(), 1);
                cloud.assign(common->cell_count(), 0.0);
            }
            auto& band = obs.bands[static_cast<std::size_t>(e->band)];
            band.resize(r.values.size());
            for (std::size_t i = 0; i < r.values.size(); ++i) {
                const double v = r.values[i];
                if (!r.valid[i] || !(v >= 0.0 && v <= 1.0)) {
                    obs.valid[i] = 0;
                }
                band[i] = static_cast<float>(v);
            }
            if (e->mask) {
                auto it = mask_cache.find(*e->mask);
                if (it == mask_cache.end()) {
                    it = mask_cache.emplace(*e->mask, load_on_grid(*e->mask, resolution, true, 1.0)).first;
                }
                const MaskedRaster& m = it->second;
                if (!m.geometry.same_grid(*common, 1e-6 * resolution)) {
                    throw AlignmentError(e->mask->string() + " does not align with the common grid");
                }
                for (std::size_t i = 0; i < cloud.size(); ++i) {
                    // Missing mask values count as fully cloudy.
                    cloud[i] = std::max(cloud[i], m.valid[i] ? m.values[i] : 1.0);
                }
            }
        }
        obs = apply_mask(obs, cloud, obs.geometry, manifest.mask_threshold);
        obs.validate();
        by_sensor[key.first].push_back(std::move(obs));
    }

    IngestResult result;
    if (!by_sensor[0].empty()) result.cube_a.emplace(Sensor::A, std::move(by_sensor[0]));
    if (!by_sensor[1].empty()) result.cube_b.emplace(Sensor::B, std::move(by_sensor[1]));
    return result;
}

std::vector<Point> parse_wkt_polygon(std::string_view wkt) {
    auto fail = [&wkt]() { return FormatError("unsupported WKT polygon: '" + std::string(wkt) + "'"); };
    std::string upper;
    for (char c : wkt) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    const auto kw = upper.find("POLYGON");
    if (kw == std::string::npos) throw fail();
    const auto open1 = wkt.find('(', kw);
    if (open1 == std::string_view::npos) throw fail();
    const auto open2 = wkt.find('(', open1 + 1);
    if (open2 == std::string_view::npos) throw fail();
    const auto close = wkt.find(')', open2);
    if (close == std::string_view::npos) throw fail();
    if (wkt.find('(', close) != std::string_view::npos) {
        throw FormatError("polygons with holes are not supported");
    }
    std::vector<Point> ring;
    std::string_view body = wkt.substr(open2 + 1, close - open2 - 1);
    while (!body.empty()) {
        const auto comma = body.find(',');
        std::string pair(body.substr(0, comma));
        std::istringstream ps(pair);
        Point p;
        if (!(ps >> p.x >> p.y)) throw fail();
        ring.push_back(p);
        if (comma == std::string_view::npos) break;
        body.remove_prefix(comma + 1);
    }
    if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
    if (ring.size() < 3) throw fail();
    return ring;
}

std::string format_wkt_polygon(std::span<const Point> polygon) {
    std::string out = "POLYGON ((";
    for (std::size_t i = 0; i <= polygon.size(); ++i) {
        const Point& p = polygon[i % polygon.size()];
        if (i) out += ", ";
        out += csv::format(p.x) + " " + csv::format(p.y);
    }
    out += "))";
    return out;
}

std::vector<Plot> read_plots(const fs::path& path, const GridGeometry& grid) {
    const auto table = csv::Table::read(path);
    const auto c_id = table.column("plot_id");
    const auto c_label = table.column("label");
    const auto c_group = table.column("group");
    const auto c_wkt = table.column("wkt_polygon");
    std::vector<Plot> plots;
    plots.reserve(table.rows().size());
    for (const auto& row : table.rows()) {
        try {
            plots.push_back(make_plot(row[c_id], parse_wkt_polygon(row[c_wkt]), grid,
                                      parse_label(row[c_label]), parse_group(row[c_group])));
        } catch (const Error& e) {
            throw FormatError(path.string() + ": plot " + row[c_id] + ": " + e.what());
        }
    }
    return plots;
}

void write_plots(const fs::path& path, std::span<const Plot> plots) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(plots.size());
    for (const auto& p : plots) {
        rows.push_back({p.id, std::string(label_name(p.label)), std::string(group_name(p.group)),
                        format_wkt_polygon(p.polygon)});
    }
    csv::write_rows(path, {"plot_id", "label", "group", "wkt_polygon"}, rows);
}

void write_gap_report(const fs::path& path, const GapReport& report) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : report.sensors) {
        const std::string sensor(sensor_name(s.sensor));
        for (const auto& e : s.plots) {
            rows.push_back({sensor, "plot", e.plot_id, std::to_string(e.n_observations),
                            e.gaps ? csv::format(e.gaps->mean_gap) : "NA",
                            e.gaps ? csv::format(e.gaps->max_gap) : "NA"});
        }
        const auto& m = s.summary;
        const std::string n = std::to_string(m.n_plots);
        rows.push_back({sensor, "summary", "mean_across_plots", n, csv::format(m.mean_of_means),
                        csv::format(m.mean_of_maxes)});
        rows.push_back({sensor, "summary", "max_across_plots", n, csv::format(m.max_of_means),
                        csv::format(m.max_of_maxes)});
    }
    csv::write_rows(path, {"sensor", "kind", "id", "n_observations", "mean_gap_days", "max_gap_days"}, rows);
}

}  // namespace burnscan
