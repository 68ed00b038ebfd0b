#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "burnscan/scene.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Observation carrying every band of the sensor, filled from `value(band, pixel)`.
burnscan::BandObservation make_obs(burnscan::Sensor sensor, burnscan::Date date, const burnscan::GridGeometry& grid,
                                   const std::function<double(burnscan::Band, std::size_t)>& value);

/// Axis-aligned rectangle in cell units starting at cell (col, row) from the top.
std::vector<burnscan::Point> cell_rect(const burnscan::GridGeometry& grid, int col, int row, int w, int h);

std::string read_file(const std::filesystem::path& path);

}  // namespace fixtures
