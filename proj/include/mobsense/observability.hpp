#pragma once

#include "mobsense/errors.hpp"
#include "mobsense/linalg.hpp"
#include "mobsense/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace mobsense {

/// Periodic schedule sigma_1..sigma_l of k sensors. Entry j of each step is sensor j's location.
class Trajectory {
public:
    Trajectory() = default;

    Trajectory(Index period, Index sensors, std::vector<Index> locations)
        : period_(period), sensors_(sensors), locations_(std::move(locations)) {
        if (period_ < 1 || sensors_ < 1) throw ArgumentError("trajectory: period and sensors must be >= 1");
        if (static_cast<Index>(locations_.size()) != period_ * sensors_)
            throw ArgumentError("trajectory: expected period*sensors locations");
        for (Index t = 0; t < period_; ++t) {
            const auto s = step(t);
            for (std::size_t a = 0; a < s.size(); ++a) {
                if (s[a] < 0) throw ArgumentError("trajectory: negative index");
                for (std::size_t b = a + 1; b < s.size(); ++b)
                    if (s[a] == s[b])
                        throw ArgumentError("trajectory: duplicate location " + std::to_string(s[a]) + " at step " +
                                            std::to_string(t));
            }
        }
    }

    static Trajectory from_steps(const std::vector<std::vector<Index>>& steps) {
        if (steps.empty()) throw ArgumentError("trajectory: no steps");
        std::vector<Index> flat;
        for (const auto& s : steps) {
            if (s.size() != steps.front().size()) throw ArgumentError("trajectory: ragged steps");
            flat.insert(flat.end(), s.begin(), s.end());
        }
        return Trajectory(static_cast<Index>(steps.size()), static_cast<Index>(steps.front().size()), std::move(flat));
    }

    Index period() const { return period_; }
    Index sensors() const { return sensors_; }
    const std::vector<Index>& locations() const { return locations_; }

    /// Locations at cycle step t (0-based).
    std::span<const Index> step(Index t) const {
        return {locations_.data() + t * sensors_, static_cast<std::size_t>(sensors_)};
    }

    /// Locations used at absolute time t under periodic repetition.
    std::span<const Index> at_time(Index t) const { return step(t % period_); }

    Index location(Index t, Index sensor) const { return locations_[static_cast<std::size_t>(t * sensors_ + sensor)]; }

    void check_range(Index n) const {
        for (Index loc : locations_)
            if (loc >= n) throw ArgumentError("trajectory: index " + std::to_string(loc) + " out of range [0, " +
                                              std::to_string(n) + ")");
    }

    bool operator==(const Trajectory&) const = default;

private:
    Index period_ = 0;
    Index sensors_ = 0;
    std::vector<Index> locations_;
};

struct ObservabilityMatrix {
    MatrixXd matrix;  ///< (l*k) x m, real-block coordinates
    Trajectory source;
};

/// Psi_real * Lambda_real^t by repeated right-multiplication.
inline MatrixXd projected_block(const RealBlockModel& model, Index t) {
    if (t < 0) throw ArgumentError("projected_block: power must be >= 0");
    MatrixXd block = model.modes;
    for (Index i = 0; i < t; ++i) block = block * model.dynamics;
    return block;
}

inline ObservabilityMatrix assemble(const RealBlockModel& model, const Trajectory& traj) {
    traj.check_range(model.n());
    ObservabilityMatrix out{MatrixXd(traj.period() * traj.sensors(), model.m()), traj};
    MatrixXd block = model.modes;
    Index row = 0;
    for (Index t = 0; t < traj.period(); ++t) {
        if (t > 0) block = block * model.dynamics;
        for (Index loc : traj.step(t)) out.matrix.row(row++) = block.row(loc);
    }
    return out;
}

/// sigma_max / sigma_min, or +inf when rows < m or sigma_min < 1e-12 sigma_max.
inline double condition_number(const MatrixXd& matrix) {
    if (matrix.rows() < matrix.cols() || matrix.cols() == 0) return kInfinity;
    const VectorXd sv = linalg::singular_values(matrix);
    const double smax = sv(0), smin = sv(sv.size() - 1);
    if (!(smax > 0.0) || smin < 1e-12 * smax) return kInfinity;
    return smax / smin;
}

inline double condition_number(const ObservabilityMatrix& obs) { return condition_number(obs.matrix); }

struct ObservabilityReport {
    bool observable = false;
    Index rank = 0;
    VectorXd singular_values;
};

inline ObservabilityReport is_observable(const RealBlockModel& model, const Trajectory& traj) {
    const auto obs = assemble(model, traj);
    ObservabilityReport report;
    report.singular_values = linalg::singular_values(obs.matrix);
    report.rank = linalg::numerical_rank(report.singular_values, 1e-10);
    report.observable = report.rank == model.m();
    return report;
}

}  // namespace mobsense
