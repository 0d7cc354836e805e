#pragma once
// Desk-scale experiment configurations shipped under configs/ and written by `mobsense fixtures`.

#include "mobsense/io.hpp"
#include "mobsense/scenarios/gridded.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mobsense::cli {

inline const std::vector<std::pair<std::string, std::string>>& fixture_configs() {
    static const std::vector<std::pair<std::string, std::string>> configs = {
        {"torus_stationary.json", R"({
  "name": "torus_stationary",
  "scenario": {
    "kind": "torus",
    "rows": 32,
    "cols": 32,
    "n_fourier": 2,
    "n_gauss": 3,
    "gauss_width": 1.5,
    "freq_range": [0.5, 2.5],
    "damp_range": [-0.01, -0.001],
    "seed": 1
  },
  "model": {"kind": "known"},
  "sensors": 1,
  "mode": {"kind": "stationary"},
  "sampling_dt": 0.1,
  "noise": {"q": 0.001, "rho": 0.01},
  "steps": 600,
  "seed": 7,
  "outputs": "out/torus_stationary",
  "sweep": {"sensors": [1, 2, 3]}
}
)"},
        {"torus_mobile.json", R"({
  "name": "torus_mobile",
  "scenario": {
    "kind": "torus",
    "rows": 32,
    "cols": 32,
    "n_fourier": 2,
    "n_gauss": 3,
    "gauss_width": 1.5,
    "freq_range": [0.5, 2.5],
    "damp_range": [-0.01, -0.001],
    "seed": 1
  },
  "model": {"kind": "known"},
  "sensors": 1,
  "mode": {"kind": "mobile", "speed": "inf", "period": 12},
  "sampling_dt": 0.1,
  "noise": {"q": 0.001, "rho": 0.01},
  "steps": 600,
  "seed": 7,
  "outputs": "out/torus_mobile",
  "sweep": {"speed": ["inf", 16, 4, 1]}
}
)"},
        {"ks_sampling_sweep.json", R"({
  "name": "ks_sampling_sweep",
  "scenario": {
    "kind": "ks",
    "n_grid": 256,
    "domain_length": 22,
    "dt_solver": 0.01,
    "t_final": 250,
    "t_discard": 100,
    "seed": 0
  },
  "model": {"kind": "dmd", "rank": 20},
  "sensors": 4,
  "mode": {"kind": "mobile", "speed": 8, "period": 10},
  "sampling_dt": 0.1,
  "noise": {"q": 0.1, "rho": 0.1},
  "seed": 3,
  "outputs": "out/ks_sampling_sweep",
  "sweep": {"sampling_dt": [0.4, 0.2, 0.1]}
}
)"},
        {"ks_multiscale.json", R"({
  "name": "ks_multiscale",
  "scenario": {
    "kind": "ks",
    "n_grid": 256,
    "domain_length": 22,
    "dt_solver": 0.01,
    "t_final": 250,
    "t_discard": 100,
    "seed": 0
  },
  "model": {"kind": "dmd", "rank": 20},
  "sensors": 4,
  "mode": {"kind": "mobile", "speed": 2, "period": 80, "refine_factor": 8},
  "sampling_dt": 0.05,
  "noise": {"q": 0.1, "rho": 0.1},
  "seed": 3,
  "outputs": "out/ks_multiscale"
}
)"},
        {"basins.json", R"({
  "name": "basins",
  "scenario": {"kind": "gridded", "path": "data/two_basins.msgrid", "format": "binary_grid", "wrap_longitude": true},
  "model": {"kind": "dmd", "rank": 8},
  "sensors": 2,
  "mode": {"kind": "mobile", "speed": 2, "period": 12},
  "sampling_dt": 1,
  "noise": {"q": 0.01, "rho": 0.01},
  "seed": 5,
  "outputs": "out/basins",
  "sweep": {"speed": [1, 2, 4]}
}
)"},
    };
    return configs;
}

/// Data set referenced by basins.json.
inline GriddedDataset fixture_basins() { return make_two_basin_dataset(BasinSpec{}); }

/// Writes the fixture configs (and their data) below `dir`.
inline std::vector<std::filesystem::path> write_fixtures(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> written;
    for (const auto& [name, text] : fixture_configs()) {
        io::write_atomic(dir / name, text);
        written.push_back(dir / name);
    }
    io::write_atomic(dir / "data" / "two_basins.msgrid", encode_binary_grid(fixture_basins()));
    written.push_back(dir / "data" / "two_basins.msgrid");
    return written;
}

}  // namespace mobsense::cli
