#include "fixtures.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace fixtures {

TempDir::TempDir(const std::string& name) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("burnscan-test-" + name + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

burnscan::BandObservation make_obs(burnscan::Sensor sensor, burnscan::Date date, const burnscan::GridGeometry& grid,
                                   const std::function<double(burnscan::Band, std::size_t)>& value) {
    burnscan::BandObservation obs;
    obs.sensor = sensor;
    obs.date = date;
    obs.geometry = grid;
    obs.valid.assign(grid.cell_count(), 1);
    for (const auto b : burnscan::sensor_bands(sensor)) {
        auto& v = obs.bands[static_cast<std::size_t>(b)];
        v.resize(grid.cell_count());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(value(b, i));
    }
    return obs;
}

std::vector<burnscan::Point> cell_rect(const burnscan::GridGeometry& grid, int col, int row, int w, int h) {
    const double x0 = grid.xll + col * grid.cellsize;
    const double y1 = grid.yll + (grid.nrows - row) * grid.cellsize;
    const double x1 = x0 + w * grid.cellsize;
    const double y0 = y1 - h * grid.cellsize;
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fixtures
