#include "burnscan/indices.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"

namespace burnscan {

namespace {

constexpr std::array<std::string_view, 11> kIndexNames = {
    "SR", "NDVI", "CI", "BAI", "BSoI", "NBR", "NBR2", "MIRBI", "BSI", "BASMA", "MSAVI"};

constexpr std::array<Band, 2> kRedNir = {Band::Red, Band::NIR};
constexpr std::array<Band, 3> kVisible = {Band::Blue, Band::Green, Band::Red};
constexpr std::array<Band, 4> kVisNir = {Band::Blue, Band::Green, Band::Red, Band::NIR};
constexpr std::array<Band, 2> kNirSwir2 = {Band::NIR, Band::SWIR2};
constexpr std::array<Band, 2> kSwir = {Band::SWIR1, Band::SWIR2};
constexpr std::array<Band, 4> kBsiBands = {Band::Green, Band::Red, Band::NIR, Band::SWIR2};

std::optional<double> ratio(double num, double den) {
    if (den == 0.0) {
        return std::nullopt;
    }
    return num / den;
}

}  // namespace

std::string_view index_name(IndexId id) { return kIndexNames[static_cast<std::size_t>(id)]; }

IndexId parse_index(std::string_view name) {
    for (std::size_t i = 0; i < kIndexNames.size(); ++i) {
        if (kIndexNames[i].size() == name.size() &&
            std::equal(name.begin(), name.end(), kIndexNames[i].begin(),
                       [](char a, char b) {
                           return std::toupper(static_cast<unsigned char>(a)) ==
                                  std::toupper(static_cast<unsigned char>(b));
                       })) {
            return static_cast<IndexId>(i);
        }
    }
    throw FormatError("unknown index '" + std::string(name) + "'");
}

std::span<const Band> index_bands(IndexId id) {
    switch (id) {
        case IndexId::SR:
        case IndexId::NDVI:
        case IndexId::BAI:
        case IndexId::MSAVI: return kRedNir;
        case IndexId::CI: return kVisible;
        case IndexId::BSoI: return kVisNir;
        case IndexId::NBR: return kNirSwir2;
        case IndexId::NBR2:
        case IndexId::MIRBI: return kSwir;
        case IndexId::BSI: return kBsiBands;
        case IndexId::BASMA: return {};
    }
    return {};
}

bool index_available(IndexId id, Sensor sensor) {
    if (sensor == Sensor::B) {
        return true;
    }
    switch (id) {
        case IndexId::NBR:
        case IndexId::NBR2:
        case IndexId::MIRBI:
        case IndexId::BSI:
        case IndexId::BASMA: return false;
        default: return true;
    }
}

double BandValues::get(Band b) const {
    if (!has(b)) {
        throw MissingBandError(std::string(band_name(b)));
    }
    return values_[static_cast<std::size_t>(b)];
}

std::optional<double> compute_index(IndexId id, const BandValues& px, const IndexOptions& options) {
    switch (id) {
        case IndexId::SR: {
            const double nir = px.get(Band::NIR), red = px.get(Band::Red);
            return ratio(nir, red);
        }
        case IndexId::NDVI: {
            const double nir = px.get(Band::NIR), red = px.get(Band::Red);
            return ratio(nir - red, nir + red);
        }
        case IndexId::CI: {
            const double blue = px.get(Band::Blue), green = px.get(Band::Green), red = px.get(Band::Red);
            const double spread =
                std::max({std::abs(blue - green), std::abs(blue - red), std::abs(red - green)});
            return (blue + green + red) + spread * 15.0;
        }
        case IndexId::BAI: {
            // Reference point (0.06, 0.1) is in unit reflectance.
            const double nir = px.get(Band::NIR), red = px.get(Band::Red);
            const double dn = 0.06 - nir, dr = 0.1 - red;
            return ratio(1.0, dn * dn + dr * dr);
        }
        case IndexId::BSoI: {
            const double blue = px.get(Band::Blue), green = px.get(Band::Green), red = px.get(Band::Red),
                         nir = px.get(Band::NIR);
            const auto core = ratio((nir + green) - (red + blue), nir + green + red + blue);
            if (!core) return std::nullopt;
            return *core * 100.0 + 100.0;
        }
        case IndexId::NBR: {
            const double nir = px.get(Band::NIR), swir2 = px.get(Band::SWIR2);
            return ratio(nir - swir2, nir + swir2);
        }
        case IndexId::NBR2: {
            const double swir1 = px.get(Band::SWIR1), swir2 = px.get(Band::SWIR2);
            return ratio(swir1 - swir2, swir1 + swir2);
        }
        case IndexId::MIRBI: {
            const double swir1 = px.get(Band::SWIR1), swir2 = px.get(Band::SWIR2);
            return 10.0 * swir2 - 9.8 * swir1 + 2.0;
        }
        case IndexId::BSI: {
            const double green = px.get(Band::Green), red = px.get(Band::Red), nir = px.get(Band::NIR),
                         swir2 = px.get(Band::SWIR2);
            const double m = options.bsi_exponent;
            const double brightness = std::pow(green, m) + std::pow(red, m) + std::pow(nir, m);
            return ratio(swir2 - red, (swir2 + red) * brightness);
        }
        case IndexId::BASMA: {
            if (options.unmixer == nullptr) {
                throw ConfigError("BASMA requires an endmember set");
            }
            return options.unmixer->unmix(px).char_;
        }
        case IndexId::MSAVI: {
            const double nir = px.get(Band::NIR), red = px.get(Band::Red);
            const double a = 2.0 * nir + 1.0;
            const double disc = a * a - 8.0 * (nir - red);
            if (disc < 0.0) return std::nullopt;
            return (a - std::sqrt(disc)) / 2.0;
        }
    }
    return std::nullopt;
}

Unmixer::Unmixer(EndmemberSet endmembers) : set_(std::move(endmembers)) {
    const std::size_t n = set_.bands.size();
    if (n < 3) {
        throw ParameterError("unmixing needs at least three bands");
    }
    if (set_.vegetation.size() != n || set_.soil.size() != n || set_.char_.size() != n) {
        throw ParameterError("endmember spectra must match the band list");
    }
    e_.resize(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double col[3] = {set_.vegetation[i], set_.soil[i], set_.char_[i]};
        for (int k = 0; k < 3; ++k) {
            if (!(col[k] >= 0.0 && col[k] <= 1.0)) {
                throw ParameterError("endmember reflectance outside [0,1]");
            }
            e_(static_cast<Eigen::Index>(i), k) = col[k];
        }
    }
    const Eigen::Matrix3d gram = e_.transpose() * e_;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(gram);
    const double lmin = eig.eigenvalues()(0);
    const double lmax = eig.eigenvalues()(2);
    condition_ = lmin > 0.0 ? std::sqrt(lmax / lmin) : std::numeric_limits<double>::infinity();
    if (!(condition_ <= kMaxCondition)) {
        throw IllConditionedError("endmember matrix condition number exceeds 1e8");
    }
    Eigen::MatrixXd d(static_cast<Eigen::Index>(n), 2);
    d.col(0) = e_.col(0) - e_.col(2);
    d.col(1) = e_.col(1) - e_.col(2);
    reduced_inv_ = (d.transpose() * d).inverse();
}

Fractions Unmixer::unmix(std::span<const double> spectrum) const {
    const auto n = e_.rows();
    if (static_cast<Eigen::Index>(spectrum.size()) != n) {
        throw ParameterError("spectrum length does not match the endmember bands");
    }
    const Eigen::Map<const Eigen::VectorXd> s(spectrum.data(), n);

    auto residual = [&](const Eigen::Vector3d& f) { return (e_ * f - s).squaredNorm(); };

    Eigen::Vector3d best(0.0, 0.0, 1.0);
    double best_res = std::numeric_limits<double>::infinity();

    // Interior: substitute f3 = 1 - f1 - f2.
    {
        const Eigen::VectorXd r = s - e_.col(2);
        Eigen::Vector2d rhs;
        rhs(0) = (e_.col(0) - e_.col(2)).dot(r);
        rhs(1) = (e_.col(1) - e_.col(2)).dot(r);
        const Eigen::Vector2d g = reduced_inv_ * rhs;
        Eigen::Vector3d f(g(0), g(1), 1.0 - g(0) - g(1));
        constexpr double kSlack = 1e-12;
        if (f.minCoeff() >= -kSlack) {
            f = f.cwiseMax(0.0);
            f /= f.sum();
            best = f;
            best_res = residual(f);
        }
    }
    // Edges (i, j): f_i = t, f_j = 1 - t.
    constexpr int kEdges[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& edge : kEdges) {
        const int i = edge[0], j = edge[1];
        const Eigen::VectorXd dir = e_.col(i) - e_.col(j);
        const double denom = dir.squaredNorm();
        double t = denom > 0.0 ? dir.dot(s - e_.col(j)) / denom : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        Eigen::Vector3d f = Eigen::Vector3d::Zero();
        f(i) = t;
        f(j) = 1.0 - t;
        const double res = residual(f);
        if (res < best_res) {
            best_res = res;
            best = f;
        }
    }
    return {best(0), best(1), best(2)};
}

Fractions Unmixer::unmix(const BandValues& pixel) const {
    std::array<double, kBandCount> buf{};
    for (std::size_t i = 0; i < set_.bands.size(); ++i) {
        buf[i] = pixel.get(set_.bands[i]);
    }
    return unmix(std::span<const double>(buf.data(), set_.bands.size()));
}

Fractions unmix_char_fraction(std::span<const double> spectrum, const EndmemberSet& endmembers) {
    return Unmixer(endmembers).unmix(spectrum);
}

EndmemberSet read_endmembers(const std::filesystem::path& path) {
    const auto table = csv::Table::read(path);
    const auto& header = table.header();
    if (header.size() < 4 || header[0] != "endmember") {
        throw FormatError(path.string() + ": header must be 'endmember,<band>,...'");
    }
    EndmemberSet set;
    for (std::size_t c = 1; c < header.size(); ++c) {
        set.bands.push_back(parse_band(header[c]));
    }
    bool seen[3] = {false, false, false};
    for (const auto& row : table.rows()) {
        std::vector<double> spectrum;
        for (std::size_t c = 1; c < row.size(); ++c) spectrum.push_back(csv::parse_double(row[c]));
        const std::string& name = row[0];
        if (name == "vegetation" || name == "veg") {
            set.vegetation = std::move(spectrum);
            seen[0] = true;
        } else if (name == "soil") {
            set.soil = std::move(spectrum);
            seen[1] = true;
        } else if (name == "char") {
            set.char_ = std::move(spectrum);
            seen[2] = true;
        } else {
            throw FormatError(path.string() + ": unknown endmember '" + name + "'");
        }
    }
    if (!seen[0] || !seen[1] || !seen[2]) {
        throw FormatError(path.string() + ": need vegetation, soil and char rows");
    }
    return set;
}

void write_endmembers(const std::filesystem::path& path, const EndmemberSet& set) {
    std::vector<std::string> header{"endmember"};
    for (Band b : set.bands) header.emplace_back(band_name(b));
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const char* name, const std::vector<double>& s) {
        std::vector<std::string> r{name};
        for (double v : s) r.push_back(csv::format(v));
        rows.push_back(std::move(r));
    };
    add("vegetation", set.vegetation);
    add("soil", set.soil);
    add("char", set.char_);
    csv::write_rows(path, header, rows);
}

EndmemberSet default_endmembers() {
    EndmemberSet set;
    set.bands.assign(kAllBands.begin(), kAllBands.end());
    //                Blue  Green Red   RE1   RE2   RE3   NIR   SWIR1 SWIR2
    set.vegetation = {0.04, 0.08, 0.05, 0.12, 0.30, 0.38, 0.42, 0.22, 0.11};
    set.soil = {0.08, 0.11, 0.14, 0.17, 0.21, 0.24, 0.27, 0.34, 0.28};
    set.char_ = {0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.12, 0.11};
    return set;
}

}  // namespace burnscan
