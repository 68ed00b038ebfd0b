#pragma once

#include <stdexcept>
#include <string>

namespace burnscan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

/// Two rasters that must share a grid do not.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// A polygon covers no cell center or has less than one cell of area.
class EmptyPlotError : public Error {
public:
    using Error::Error;
};

class MissingBandError : public Error {
public:
    explicit MissingBandError(std::string band)
        : Error("required band missing: " + band), band_(std::move(band)) {}
    const std::string& band() const noexcept { return band_; }

private:
    std::string band_;
};

class IllConditionedError : public Error {
public:
    using Error::Error;
};

/// Training data with a single class.
class DegenerateModelError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

/// A cross-validation fold shares plots, pixels or feature vectors between
/// its training and holdout sets.
class LeakageError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Runs being compared do not cover the same plots.
class ComparisonError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; what() names the stage and the cause.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace burnscan
