#pragma once
// Sensor motion spaces: lines, 2-D grids (optionally periodic per axis) and
// graphs. Index layout for grids is row-major, index = row * cols + col.

#include "mobsense/errors.hpp"
#include "mobsense/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace mobsense {

inline constexpr Index kUnreachable = std::numeric_limits<Index>::max();

class Geometry {
public:
    enum class Kind { line, grid2d, graph };

    static Geometry line(Index n, bool periodic = false) {
        if (n < 1) throw ArgumentError("line geometry: n must be >= 1");
        Geometry g;
        g.kind_ = Kind::line;
        g.rows_ = 1;
        g.cols_ = n;
        g.periodic_cols_ = periodic;
        return g;
    }

    static Geometry grid2d(Index rows, Index cols, bool periodic_rows = false, bool periodic_cols = false) {
        if (rows < 1 || cols < 1) throw ArgumentError("grid geometry: rows and cols must be >= 1");
        Geometry g;
        g.kind_ = Kind::grid2d;
        g.rows_ = rows;
        g.cols_ = cols;
        g.periodic_rows_ = periodic_rows;
        g.periodic_cols_ = periodic_cols;
        return g;
    }

    /// Adjacency must be symmetric; `coords` (optional) are per-node plot coordinates.
    static Geometry graph(std::vector<std::vector<Index>> adjacency, std::vector<std::array<double, 2>> coords = {}) {
        const auto n = static_cast<Index>(adjacency.size());
        if (n < 1) throw ArgumentError("graph geometry: needs at least one node");
        if (!coords.empty() && static_cast<Index>(coords.size()) != n)
            throw ArgumentError("graph geometry: coords size mismatch");
        for (Index u = 0; u < n; ++u) {
            auto& nb = adjacency[static_cast<std::size_t>(u)];
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
            for (Index v : nb) {
                if (v < 0 || v >= n || v == u) throw ArgumentError("graph geometry: invalid edge " + std::to_string(u));
                const auto& back = adjacency[static_cast<std::size_t>(v)];
                if (std::find(back.begin(), back.end(), u) == back.end())
                    throw ArgumentError("graph geometry: adjacency is not symmetric at " + std::to_string(u) + "-" +
                                        std::to_string(v));
            }
        }
        Geometry g;
        g.kind_ = Kind::graph;
        g.rows_ = 1;
        g.cols_ = n;
        g.adjacency_ = std::move(adjacency);
        g.coords_ = std::move(coords);
        g.label_components();
        return g;
    }

    Kind kind() const { return kind_; }
    Index size() const { return kind_ == Kind::graph ? static_cast<Index>(adjacency_.size()) : rows_ * cols_; }
    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    bool periodic_rows() const { return periodic_rows_; }
    bool periodic_cols() const { return periodic_cols_; }
    const std::vector<std::vector<Index>>& adjacency() const { return adjacency_; }

    void check_index(Index i) const {
        if (i < 0 || i >= size()) throw ArgumentError("index " + std::to_string(i) + " out of range for geometry");
    }

    std::array<double, 2> coords(Index i) const {
        check_index(i);
        if (kind_ == Kind::graph)
            return coords_.empty() ? std::array<double, 2>{0.0, static_cast<double>(i)} : coords_[static_cast<std::size_t>(i)];
        return {static_cast<double>(i / cols_), static_cast<double>(i % cols_)};
    }

    /// Graph nodes without neighbors cannot be visited by a moving sensor.
    bool isolated(Index i) const {
        return kind_ == Kind::graph && size() > 1 && adjacency_[static_cast<std::size_t>(i)].empty();
    }

    /// Connected component label; grids and lines are a single component.
    Index component(Index i) const { return kind_ == Kind::graph ? component_[static_cast<std::size_t>(i)] : 0; }

    /// Euclidean distance (with declared periodic wrap) or hop distance on graphs.
    double distance(Index a, Index b) const {
        check_index(a);
        check_index(b);
        if (kind_ == Kind::graph) {
            if (a == b) return 0.0;
            const auto d = hops_from(a);
            const Index h = d[static_cast<std::size_t>(b)];
            return h == kUnreachable ? kInfinity : static_cast<double>(h);
        }
        return grid_distance(a, b);
    }

    std::vector<double> distances_from(Index a) const {
        check_index(a);
        std::vector<double> out(static_cast<std::size_t>(size()));
        if (kind_ == Kind::graph) {
            const auto h = hops_from(a);
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = h[i] == kUnreachable ? kInfinity : static_cast<double>(h[i]);
        } else {
            for (Index b = 0; b < size(); ++b) out[static_cast<std::size_t>(b)] = grid_distance(a, b);
        }
        return out;
    }

    /// Minimum number of moves, each covering distance <= speed, between every
    /// node and `target`. kUnreachable where no such path exists.
    std::vector<Index> move_counts(Index target, double speed) const {
        check_index(target);
        const auto n = static_cast<std::size_t>(size());
        std::vector<Index> moves(n, kUnreachable);
        moves[static_cast<std::size_t>(target)] = 0;
        if (kind_ == Kind::graph) {
            if (!(speed >= 1.0)) return moves;
            const auto h = hops_from(target);
            for (std::size_t i = 0; i < n; ++i) {
                if (h[i] == kUnreachable || h[i] == 0) continue;
                if (std::isinf(speed)) moves[i] = 1;
                else {
                    const auto per = static_cast<Index>(std::floor(speed));
                    moves[i] = (h[i] + per - 1) / per;
                }
            }
            return moves;
        }
        if (std::isinf(speed) || speed >= diameter()) {
            for (std::size_t i = 0; i < n; ++i)
                if (static_cast<Index>(i) != target) moves[i] = 1;
            return moves;
        }
        if (!(speed >= 1.0)) return moves;
        const auto stencil = offsets_within(speed);
        std::deque<Index> queue{target};
        while (!queue.empty()) {
            const Index u = queue.front();
            queue.pop_front();
            const Index ur = u / cols_, uc = u % cols_;
            for (const auto& [dr, dc] : stencil) {
                const Index v = shifted(ur, uc, dr, dc);
                if (v < 0 || moves[static_cast<std::size_t>(v)] != kUnreachable) continue;
                moves[static_cast<std::size_t>(v)] = moves[static_cast<std::size_t>(u)] + 1;
                queue.push_back(v);
            }
        }
        return moves;
    }

private:
    Geometry() = default;

    double grid_distance(Index a, Index b) const {
        Index dr = std::abs(a / cols_ - b / cols_);
        Index dc = std::abs(a % cols_ - b % cols_);
        if (periodic_rows_) dr = std::min(dr, rows_ - dr);
        if (periodic_cols_) dc = std::min(dc, cols_ - dc);
        return std::hypot(static_cast<double>(dr), static_cast<double>(dc));
    }

    double diameter() const {
        const double r = static_cast<double>(periodic_rows_ ? rows_ / 2 : rows_ - 1);
        const double c = static_cast<double>(periodic_cols_ ? cols_ / 2 : cols_ - 1);
        return std::hypot(r, c);
    }

    std::vector<std::pair<Index, Index>> offsets_within(double speed) const {
        const auto reach = static_cast<Index>(std::floor(speed));
        const Index rmax = std::min(reach, rows_ - 1), cmax = std::min(reach, cols_ - 1);
        std::vector<std::pair<Index, Index>> out;
        for (Index dr = -rmax; dr <= rmax; ++dr)
            for (Index dc = -cmax; dc <= cmax; ++dc) {
                if (dr == 0 && dc == 0) continue;
                if (static_cast<double>(dr * dr + dc * dc) <= speed * speed * (1.0 + 1e-12)) out.emplace_back(dr, dc);
            }
        return out;
    }

    Index shifted(Index r, Index c, Index dr, Index dc) const {
        Index nr = r + dr, nc = c + dc;
        if (periodic_rows_) nr = ((nr % rows_) + rows_) % rows_;
        else if (nr < 0 || nr >= rows_) return -1;
        if (periodic_cols_) nc = ((nc % cols_) + cols_) % cols_;
        else if (nc < 0 || nc >= cols_) return -1;
        return nr * cols_ + nc;
    }

    std::vector<Index> hops_from(Index source) const {
        std::vector<Index> dist(adjacency_.size(), kUnreachable);
        dist[static_cast<std::size_t>(source)] = 0;
        std::deque<Index> queue{source};
        while (!queue.empty()) {
            const Index u = queue.front();
            queue.pop_front();
            for (Index v : adjacency_[static_cast<std::size_t>(u)]) {
                if (dist[static_cast<std::size_t>(v)] != kUnreachable) continue;
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                queue.push_back(v);
            }
        }
        return dist;
    }

    void label_components() {
        component_.assign(adjacency_.size(), -1);
        Index label = 0;
        for (std::size_t s = 0; s < adjacency_.size(); ++s) {
            if (component_[s] >= 0) continue;
            std::deque<Index> queue{static_cast<Index>(s)};
            component_[s] = label;
            while (!queue.empty()) {
                const Index u = queue.front();
                queue.pop_front();
                for (Index v : adjacency_[static_cast<std::size_t>(u)])
                    if (component_[static_cast<std::size_t>(v)] < 0) {
                        component_[static_cast<std::size_t>(v)] = label;
                        queue.push_back(v);
                    }
            }
            ++label;
        }
    }

    Kind kind_ = Kind::line;
    Index rows_ = 1;
    Index cols_ = 1;
    bool periodic_rows_ = false;
    bool periodic_cols_ = false;
    std::vector<std::vector<Index>> adjacency_;
    std::vector<std::array<double, 2>> coords_;
    std::vector<Index> component_;
};

/// Per-step speed limit in geometry distance units; +inf means unconstrained.
struct MotionConstraint {
    double speed = kInfinity;

    bool unconstrained() const { return std::isinf(speed); }

    void validate() const {
        if (!(speed >= 0.0)) throw ArgumentError("motion constraint: speed must be >= 0");
    }

    /// Whether a single move between two points at distance `d` is allowed.
    bool allows(double d) const { return std::isfinite(d) && d <= speed * (1.0 + 1e-12); }
};

}  // namespace mobsense
