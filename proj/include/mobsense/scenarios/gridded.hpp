#pragma once
// Masked lat/lon grids (water = valid) with two on-disk formats:
//
// binary_grid, little-endian:
//   offset 0   8 bytes  magic "MSGRID01"
//   offset 8   uint32   rows
//   offset 12  uint32   cols
//   offset 16  uint32   T (snapshots)
//   offset 20  float64  dt
//   offset 28  rows*cols mask bytes, row-major, 1 = valid, 0 = masked
//   then       T * n_valid float32 values, snapshot-major, valid cells in row-major order
//
// csv_grid: see docs/formats.md.

#include "mobsense/errors.hpp"
#include "mobsense/geometry.hpp"
#include "mobsense/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mobsense {

enum class GridFormat { binary_grid, csv_grid };

inline constexpr char kGridMagic[8] = {'M', 'S', 'G', 'R', 'I', 'D', '0', '1'};

class GriddedDataset {
public:
    GriddedDataset() = default;

    /// `snapshots` is n_valid x T over valid cells in row-major order.
    GriddedDataset(Index rows, Index cols, std::vector<std::uint8_t> mask, MatrixXd snapshots, double dt)
        : rows_(rows), cols_(cols), mask_(std::move(mask)), snapshots_(std::move(snapshots)), dt_(dt) {
        if (rows_ < 1 || cols_ < 1) throw FormatError("gridded: rows and cols must be >= 1");
        if (static_cast<Index>(mask_.size()) != rows_ * cols_) throw FormatError("gridded: mask size mismatch");
        if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw FormatError("gridded: dt must be finite and > 0");
        state_of_cell_.assign(mask_.size(), -1);
        for (Index cell = 0; cell < rows_ * cols_; ++cell) {
            const auto v = mask_[static_cast<std::size_t>(cell)];
            if (v > 1) throw FormatError("gridded: mask values must be 0 or 1");
            if (v == 1) {
                state_of_cell_[static_cast<std::size_t>(cell)] = static_cast<Index>(cell_of_state_.size());
                cell_of_state_.push_back(cell);
            }
        }
        if (cell_of_state_.empty()) throw FormatError("gridded: empty mask (no valid cells)");
        if (snapshots_.rows() != n_valid())
            throw FormatError("gridded: snapshot length " + std::to_string(snapshots_.rows()) +
                              " does not match valid cell count " + std::to_string(n_valid()));
        if (snapshots_.cols() < 2) throw FormatError("gridded: need at least 2 snapshots");
        if (!snapshots_.allFinite()) throw FormatError("gridded: non-finite value in a valid cell");
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index n_valid() const { return static_cast<Index>(cell_of_state_.size()); }
    Index steps() const { return snapshots_.cols(); }
    double dt() const { return dt_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }
    const MatrixXd& snapshots() const { return snapshots_; }
    bool valid(Index r, Index c) const { return mask_[static_cast<std::size_t>(r * cols_ + c)] != 0; }

    /// Row-major cell index of state i.
    Index cell_of_state(Index i) const { return cell_of_state_[static_cast<std::size_t>(i)]; }
    /// State index of a cell, -1 when masked.
    Index state_of_cell(Index cell) const { return state_of_cell_[static_cast<std::size_t>(cell)]; }

    /// Cell-centre latitude/longitude (degrees) on a regular global grid.
    std::array<double, 2> lat_lon(Index state) const {
        const Index cell = cell_of_state(state);
        const double r = static_cast<double>(cell / cols_), c = static_cast<double>(cell % cols_);
        return {90.0 - (r + 0.5) * 180.0 / static_cast<double>(rows_),
                -180.0 + (c + 0.5) * 360.0 / static_cast<double>(cols_)};
    }

    bool operator==(const GriddedDataset& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && mask_ == o.mask_ && dt_ == o.dt_ && snapshots_ == o.snapshots_;
    }

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<std::uint8_t> mask_;
    MatrixXd snapshots_;
    double dt_ = 1.0;
    std::vector<Index> cell_of_state_;
    std::vector<Index> state_of_cell_;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::string& in, std::size_t offset) {
    if (offset + sizeof(U) > in.size())
        throw FormatError("binary_grid: truncated file", static_cast<std::int64_t>(offset));
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        value |= static_cast<U>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
    return value;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path.string());
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& text, Index line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw FormatError("csv_grid: bad number '" + text + "'", line);
    }
    if (used != text.size()) throw FormatError("csv_grid: bad number '" + text + "'", line);
    return v;
}

}  // namespace detail

/// Serializes to binary_grid. Values are stored as float32.
inline std::string encode_binary_grid(const GriddedDataset& ds) {
    std::string out(kGridMagic, sizeof(kGridMagic));
    detail::put_le(out, static_cast<std::uint32_t>(ds.rows()));
    detail::put_le(out, static_cast<std::uint32_t>(ds.cols()));
    detail::put_le(out, static_cast<std::uint32_t>(ds.steps()));
    detail::put_le(out, std::bit_cast<std::uint64_t>(ds.dt()));
    for (auto b : ds.mask()) out.push_back(static_cast<char>(b));
    for (Index t = 0; t < ds.steps(); ++t)
        for (Index i = 0; i < ds.n_valid(); ++i)
            detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(ds.snapshots()(i, t))));
    return out;
}

inline GriddedDataset decode_binary_grid(const std::string& bytes) {
    if (bytes.size() < 28 || bytes.compare(0, 8, std::string(kGridMagic, 8)) != 0)
        throw FormatError("binary_grid: bad magic", 0);
    const auto rows = detail::get_le<std::uint32_t>(bytes, 8);
    const auto cols = detail::get_le<std::uint32_t>(bytes, 12);
    const auto T = detail::get_le<std::uint32_t>(bytes, 16);
    const double dt = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, 20));
    if (rows == 0 || cols == 0) throw FormatError("binary_grid: zero grid dimension", 8);
    if (!(dt > 0.0) || !std::isfinite(dt)) throw FormatError("binary_grid: dt must be finite and > 0", 20);
    std::size_t offset = 28;
    const std::size_t cells = static_cast<std::size_t>(rows) * cols;
    if (bytes.size() < offset + cells) throw FormatError("binary_grid: truncated mask", static_cast<std::int64_t>(bytes.size()));
    std::vector<std::uint8_t> mask(cells);
    std::size_t valid = 0;
    for (std::size_t i = 0; i < cells; ++i) {
        mask[i] = static_cast<std::uint8_t>(bytes[offset + i]);
        if (mask[i] > 1) throw FormatError("binary_grid: mask byte must be 0 or 1", static_cast<std::int64_t>(offset + i));
        valid += mask[i];
    }
    if (valid == 0) throw FormatError("binary_grid: empty mask (no valid cells)", static_cast<std::int64_t>(offset));
    offset += cells;
    const std::size_t expected = offset + static_cast<std::size_t>(T) * valid * 4;
    if (bytes.size() != expected)
        throw FormatError("binary_grid: shape mismatch, expected " + std::to_string(expected) + " bytes, found " +
                              std::to_string(bytes.size()),
                          static_cast<std::int64_t>(std::min(bytes.size(), expected)));
    MatrixXd snaps(static_cast<Index>(valid), static_cast<Index>(T));
    for (Index t = 0; t < static_cast<Index>(T); ++t)
        for (Index i = 0; i < static_cast<Index>(valid); ++i) {
            const float v = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, offset));
            if (!std::isfinite(v)) throw FormatError("binary_grid: non-finite value in a valid cell", static_cast<std::int64_t>(offset));
            snaps(i, t) = v;
            offset += 4;
        }
    if (T < 2) throw FormatError("binary_grid: need at least 2 snapshots", 16);
    return GriddedDataset(rows, cols, std::move(mask), std::move(snaps), dt);
}

inline std::string encode_csv_grid(const GriddedDataset& ds) {
    std::string out = "mobsense_csv_grid,1\nrows,cols,T,dt\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", ds.dt());
    out += std::to_string(ds.rows()) + "," + std::to_string(ds.cols()) + "," + std::to_string(ds.steps()) + "," + buf + "\n";
    out += "mask\n";
    for (Index r = 0; r < ds.rows(); ++r) {
        for (Index c = 0; c < ds.cols(); ++c) out += (c ? "," : "") + std::string(ds.valid(r, c) ? "1" : "0");
        out += "\n";
    }
    for (Index t = 0; t < ds.steps(); ++t) {
        out += "snapshot," + std::to_string(t) + "\n";
        for (Index r = 0; r < ds.rows(); ++r) {
            for (Index c = 0; c < ds.cols(); ++c) {
                if (c) out += ",";
                const Index s = ds.state_of_cell(r * ds.cols() + c);
                if (s >= 0) {
                    std::snprintf(buf, sizeof buf, "%.17g", ds.snapshots()(s, t));
                    out += buf;
                }
            }
            out += "\n";
        }
    }
    return out;
}

inline GriddedDataset decode_csv_grid(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    Index line_no = 0;
    auto next = [&]() {
        if (!std::getline(in, line)) throw FormatError("csv_grid: unexpected end of file", line_no + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return detail::split_csv(line);
    };
    auto fail = [&](const std::string& what) { throw FormatError("csv_grid: " + what, line_no); };

    if (auto f = next(); f.size() != 2 || f[0] != "mobsense_csv_grid" || f[1] != "1") fail("bad header");
    if (auto f = next(); f != std::vector<std::string>{"rows", "cols", "T", "dt"}) fail("expected 'rows,cols,T,dt'");
    auto dims = next();
    if (dims.size() != 4) fail("expected 4 header values");
    const double rows_d = detail::parse_double(dims[0], line_no), cols_d = detail::parse_double(dims[1], line_no);
    const double steps_d = detail::parse_double(dims[2], line_no), dt = detail::parse_double(dims[3], line_no);
    if (rows_d < 1 || cols_d < 1 || steps_d < 0 || rows_d != std::floor(rows_d) || cols_d != std::floor(cols_d) ||
        steps_d != std::floor(steps_d))
        fail("invalid dimensions");
    const auto rows = static_cast<Index>(rows_d), cols = static_cast<Index>(cols_d), T = static_cast<Index>(steps_d);
    if (auto f = next(); f.size() != 1 || f[0] != "mask") fail("expected 'mask'");
    std::vector<std::uint8_t> mask;
    for (Index r = 0; r < rows; ++r) {
        auto f = next();
        if (static_cast<Index>(f.size()) != cols) fail("mask row has " + std::to_string(f.size()) + " fields");
        for (const auto& v : f) {
            if (v != "0" && v != "1") fail("mask values must be 0 or 1");
            mask.push_back(v == "1" ? 1 : 0);
        }
    }
    Index valid = 0;
    for (auto b : mask) valid += b;
    if (valid == 0) fail("empty mask (no valid cells)");
    MatrixXd snaps(valid, T);
    for (Index t = 0; t < T; ++t) {
        if (auto f = next(); f.size() != 2 || f[0] != "snapshot" || f[1] != std::to_string(t))
            fail("expected 'snapshot," + std::to_string(t) + "'");
        Index s = 0;
        for (Index r = 0; r < rows; ++r) {
            auto f = next();
            if (static_cast<Index>(f.size()) != cols) fail("snapshot row has " + std::to_string(f.size()) + " fields");
            for (Index c = 0; c < cols; ++c) {
                const bool is_valid = mask[static_cast<std::size_t>(r * cols + c)] != 0;
                const auto& v = f[static_cast<std::size_t>(c)];
                if (!is_valid) {
                    if (!v.empty()) fail("value given for masked cell");
                    continue;
                }
                if (v.empty()) fail("missing value for valid cell");
                const double x = detail::parse_double(v, line_no);
                if (!std::isfinite(x)) fail("non-finite value in a valid cell");
                snaps(s++, t) = x;
            }
        }
    }
    if (std::getline(in, line) && !line.empty()) fail("trailing content");
    return GriddedDataset(rows, cols, std::move(mask), std::move(snaps), dt);
}

inline GriddedDataset load_gridded(const std::filesystem::path& path, GridFormat format) {
    const std::string bytes = detail::read_file(path);
    return format == GridFormat::binary_grid ? decode_binary_grid(bytes) : decode_csv_grid(bytes);
}

inline void save_gridded(const GriddedDataset& ds, const std::filesystem::path& path, GridFormat format) {
    detail::write_file(path, format == GridFormat::binary_grid ? encode_binary_grid(ds) : encode_csv_grid(ds));
}

/// Graph over valid cells (state order) with 4-neighbour edges; `wrap_longitude`
/// joins column cols-1 to column 0.
inline Geometry mask_geometry(const GriddedDataset& ds, bool wrap_longitude = true) {
    std::vector<std::vector<Index>> adj(static_cast<std::size_t>(ds.n_valid()));
    std::vector<std::array<double, 2>> coords(adj.size());
    const Index rows = ds.rows(), cols = ds.cols();
    for (Index s = 0; s < ds.n_valid(); ++s) {
        const Index cell = ds.cell_of_state(s), r = cell / cols, c = cell % cols;
        coords[static_cast<std::size_t>(s)] = {static_cast<double>(r), static_cast<double>(c)};
        auto link = [&](Index rr, Index cc) {
            if (rr < 0 || rr >= rows) return;
            if (cc < 0 || cc >= cols) {
                if (!wrap_longitude || cols < 3) return;
                cc = (cc + cols) % cols;
            }
            const Index other = ds.state_of_cell(rr * cols + cc);
            if (other >= 0) adj[static_cast<std::size_t>(s)].push_back(other);
        };
        link(r - 1, c);
        link(r + 1, c);
        link(r, c - 1);
        link(r, c + 1);
        std::sort(adj[static_cast<std::size_t>(s)].begin(), adj[static_cast<std::size_t>(s)].end());
    }
    return Geometry::graph(std::move(adj), std::move(coords));
}

inline SnapshotMatrix to_snapshots(const GriddedDataset& ds, bool wrap_longitude = true) {
    SnapshotMatrix out{ds.snapshots(), ds.dt(), std::make_shared<const Geometry>(mask_geometry(ds, wrap_longitude))};
    return out;
}

struct BasinSpec {
    Index rows = 12;
    Index cols = 24;
    Index steps = 240;
    double dt = 1.0;
    double q = 1e-4;
    std::uint64_t seed = 1;
};

/// Synthetic ocean with two basins separated by two full-height land walls
/// (so the basins stay apart under longitude wrap), plus a small island in
/// each basin. Fields follow a random stable linear model with modes local to
/// one basin or spanning both.
inline GriddedDataset make_two_basin_dataset(const BasinSpec& spec) {
    if (spec.rows < 4 || spec.cols < 12) throw ArgumentError("basins: grid must be at least 4x12");
    if (spec.steps < 2) throw ArgumentError("basins: need at least 2 steps");
    const Index rows = spec.rows, cols = spec.cols;
    const Index wall_a = cols / 4, wall_b = 3 * cols / 4;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows * cols), 1);
    for (Index r = 0; r < rows; ++r) {
        mask[static_cast<std::size_t>(r * cols + wall_a)] = 0;
        mask[static_cast<std::size_t>(r * cols + wall_b)] = 0;
    }
    mask[static_cast<std::size_t>((rows / 2) * cols + cols / 2)] = 0;
    mask[static_cast<std::size_t>((rows / 3) * cols + (wall_b + 2) % cols)] = 0;

    std::vector<Index> cells;
    for (Index cell = 0; cell < rows * cols; ++cell)
        if (mask[static_cast<std::size_t>(cell)]) cells.push_back(cell);
    const auto n = static_cast<Index>(cells.size());

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr Index pairs = 4;
    MatrixXcd modes(n, 2 * pairs);
    VectorXcd eig(2 * pairs);
    for (Index j = 0; j < pairs; ++j) {
        const double cr = unit(rng) * rows, cc = unit(rng) * cols;
        const double width = (j == 0 ? 0.6 : 0.2) * static_cast<double>(cols);
        const double kr = 2.0 * M_PI * unit(rng) / rows, kc = 2.0 * M_PI * (1.0 + unit(rng)) / cols;
        for (Index s = 0; s < n; ++s) {
            const double r = static_cast<double>(cells[static_cast<std::size_t>(s)] / cols);
            const double c = static_cast<double>(cells[static_cast<std::size_t>(s)] % cols);
            double dc = c - cc;
            dc -= cols * std::round(dc / cols);
            const double amp = std::exp(-((r - cr) * (r - cr) + dc * dc) / (2.0 * width * width));
            modes(s, 2 * j) = std::polar(amp, kr * r + kc * c);
        }
        modes.col(2 * j).normalize();
        modes.col(2 * j + 1) = modes.col(2 * j).conjugate();
        const double omega = 0.1 + 0.5 * unit(rng), delta = -0.02 * unit(rng);
        eig(2 * j) = std::exp(Complex(delta, omega) * spec.dt);
        eig(2 * j + 1) = std::conj(eig(2 * j));
    }
    const ReducedModel model = ReducedModel::from_spectrum(eig, modes);
    VectorXcd z0(2 * pairs);
    for (Index j = 0; j < 2 * pairs; ++j) {
        const PairTag tag = model.pair_map()[static_cast<std::size_t>(j)];
        if (tag.role == PairRole::follow) continue;
        z0(j) = std::polar(5.0, 2.0 * M_PI * unit(rng));
        z0(tag.partner) = std::conj(z0(j));
    }
    const SnapshotMatrix sim = simulate(model, z0, spec.steps, NoiseSpec{spec.q, 1.0}, spec.seed + 1, spec.dt);
    // Values are stored as float32 on disk; round here so datasets survive a round trip unchanged.
    MatrixXd data = sim.data.cast<float>().cast<double>();
    return GriddedDataset(rows, cols, std::move(mask), std::move(data), spec.dt);
}

}  // namespace mobsense
