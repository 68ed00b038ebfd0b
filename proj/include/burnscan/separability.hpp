#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "burnscan/indices.hpp"
#include "burnscan/scene.hpp"

namespace burnscan {

struct SampleStats {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample sd; 0 when n < 2

    static SampleStats of(std::span<const double> values);
};

/// M = |mean_b - mean_u| / (sd_b + sd_u). Returns 0 when both sds are zero
/// and the means agree, +infinity when the means differ. Throws
/// ParameterError when either group has fewer than two samples.
double m_statistic(const SampleStats& burned, const SampleStats& unburned);

/// A band or an index.
using SignalSource = std::variant<Band, IndexId>;

std::string source_name(const SignalSource& source);
/// Index names take precedence over band names.
SignalSource parse_source(std::string_view name);

/// Mean of the source over the plot's valid pixels on one observation, or
/// nullopt when the plot is not observed (fewer than half its pixels valid)
/// or the source is undefined on every valid pixel.
std::optional<double> plot_mean_value(const BandObservation& obs, const Plot& plot,
                                      const SignalSource& source, const IndexOptions& options = {});

struct BurnEvent {
    std::size_t plot = 0;  // index into the plot list
    Date date;
};

enum class SeparabilityMode {
    /// Post-event values against the same plots' nearest pre-event value.
    PrePost,
    /// Post-event values against reference plots observed on the same date.
    SameImage,
};

struct SeparabilityPoint {
    int offset_days = 0;
    std::optional<double> m;  // missing when either side has n < 3
    std::size_t n_burn = 0;
    std::size_t n_unburn = 0;
};

struct SeparabilityCurve {
    std::string source;
    std::vector<SeparabilityPoint> points;  // offsets 0 .. max_offset
    std::size_t skipped_events = 0;         // no pre-event or no post-event observation
};

struct SeparabilityOptions {
    int max_offset = 10;
    SeparabilityMode mode = SeparabilityMode::PrePost;
    /// Reference plots for SameImage mode.
    std::vector<std::size_t> reference_plots;
    IndexOptions index_options;
};

inline constexpr std::size_t kMinSeparabilitySamples = 3;

SeparabilityCurve separability_curve(std::span<const BurnEvent> events, std::span<const Plot> plots,
                                     const SceneCube& cube, const SignalSource& source,
                                     const SeparabilityOptions& options = {});

struct ProfilePoint {
    int offset_days = 0;
    std::optional<SampleStats> burned;
    std::optional<SampleStats> unburned;
};

struct SignatureProfile {
    std::string source;
    std::size_t n_burned_events = 0;
    std::size_t n_unburned_events = 0;
    std::vector<ProfilePoint> points;  // offsets -window .. window
};

/// Time-aligned plot-mean series around burn events and around till events
/// of unburned plots. Throws ParameterError when either group is empty.
SignatureProfile signature_profile(std::span<const BurnEvent> burn_events,
                                   std::span<const BurnEvent> till_events, std::span<const Plot> plots,
                                   const SceneCube& cube, const SignalSource& source, int window,
                                   const IndexOptions& options = {});

/// Columns: index, offset_days, m_value, n_burn, n_unburn.
void write_separability_csv(const std::filesystem::path& path, std::span<const SeparabilityCurve> curves);

/// Columns: source, offset_days, group, n, mean, sd.
void write_profile_csv(const std::filesystem::path& path, std::span<const SignatureProfile> profiles);

}  // namespace burnscan
