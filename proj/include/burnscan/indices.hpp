#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "burnscan/scene.hpp"

namespace burnscan {

enum class IndexId : std::uint8_t { SR, NDVI, CI, BAI, BSoI, NBR, NBR2, MIRBI, BSI, BASMA, MSAVI };

inline constexpr std::array<IndexId, 11> kAllIndices = {
    IndexId::SR,  IndexId::NDVI,  IndexId::CI,  IndexId::BAI,   IndexId::BSoI, IndexId::NBR,
    IndexId::NBR2, IndexId::MIRBI, IndexId::BSI, IndexId::BASMA, IndexId::MSAVI};

std::string_view index_name(IndexId id);
IndexId parse_index(std::string_view name);

/// Bands the formula reads. BASMA reads the bands of its endmember set and
/// returns an empty span here.
std::span<const Band> index_bands(IndexId id);

/// Whether a sensor carries every band the index needs.
bool index_available(IndexId id, Sensor sensor);

/// Unit reflectance per band for one pixel.
class BandValues {
public:
    void set(Band b, double value) noexcept {
        values_[static_cast<std::size_t>(b)] = value;
        present_ |= static_cast<std::uint16_t>(1u << static_cast<unsigned>(b));
    }
    bool has(Band b) const noexcept { return (present_ >> static_cast<unsigned>(b)) & 1u; }
    /// Throws MissingBandError.
    double get(Band b) const;
    void clear() noexcept { present_ = 0; }

private:
    std::array<double, kBandCount> values_{};
    std::uint16_t present_ = 0;
};

/// Three reference spectra over a common band list.
struct EndmemberSet {
    std::vector<Band> bands;
    std::vector<double> vegetation;
    std::vector<double> soil;
    std::vector<double> char_;
};

struct Fractions {
    double vegetation = 0.0;
    double soil = 0.0;
    double char_ = 0.0;
};

/// Fully constrained (sum-to-one, non-negative) linear unmixing against a fixed
/// endmember set. With three endmembers the feasible set is a triangle, so the
/// solver evaluates the interior stationary point and the optimum on each edge
/// and keeps the feasible candidate with the smallest residual.
class Unmixer {
public:
    /// Throws IllConditionedError when cond(E) > kMaxCondition, ParameterError
    /// on malformed spectra.
    explicit Unmixer(EndmemberSet endmembers);

    static constexpr double kMaxCondition = 1e8;

    Fractions unmix(std::span<const double> spectrum) const;
    /// Reads the endmember bands from a pixel.
    Fractions unmix(const BandValues& pixel) const;

    const EndmemberSet& endmembers() const noexcept { return set_; }
    double condition_number() const noexcept { return condition_; }

private:
    EndmemberSet set_;
    Eigen::MatrixXd e_;           // n x 3
    Eigen::Matrix2d reduced_inv_;  // (D^T D)^-1, D = [e1-e3, e2-e3]
    double condition_ = 0.0;
};

Fractions unmix_char_fraction(std::span<const double> spectrum, const EndmemberSet& endmembers);

struct IndexOptions {
    /// Exponent m of the Green/Red/NIR term in BSI.
    double bsi_exponent = 1.0;
    /// Required for BASMA.
    const Unmixer* unmixer = nullptr;
};

/// Evaluates one index on unit reflectance. Returns nullopt where the formula
/// is undefined (zero denominator). Throws MissingBandError.
std::optional<double> compute_index(IndexId id, const BandValues& bands, const IndexOptions& options = {});

/// CSV with header "endmember,<band>,..." and rows vegetation, soil, char.
EndmemberSet read_endmembers(const std::filesystem::path& path);
void write_endmembers(const std::filesystem::path& path, const EndmemberSet& set);

/// Generic dry-season spectra over all sensor-B bands.
EndmemberSet default_endmembers();

}  // namespace burnscan
