#pragma once
// Greedy time-forwarding path planning on the projected observability matrix.
//
// Rows of X = Psi_real Lambda_real^i are picked one sensor at a time. While the
// stacked matrix is rank deficient the residual (QR column pivoting) rule is
// used; once it reaches full column rank the GappyPOD+E rule takes over.

#include "mobsense/errors.hpp"
#include "mobsense/geometry.hpp"
#include "mobsense/linalg.hpp"
#include "mobsense/model.hpp"
#include "mobsense/observability.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mobsense {

enum class ScoreRule { qrcp, gappy_e };

inline const char* to_string(ScoreRule rule) { return rule == ScoreRule::qrcp ? "qrcp" : "gappy_e"; }

struct PlanConfig {
    Index sensors = 1;
    Index period = 1;
    bool enforce_cycle = true;

    void validate() const {
        if (sensors < 1) throw ArgumentError("plan config: sensors must be >= 1");
        if (period < 1) throw ArgumentError("plan config: period must be >= 1");
    }

    /// More rows than model rank: the GappyPOD+E regime will be reached.
    bool oversampling(Index rank) const { return period * sensors > rank; }
};

/// One greedy selection (or pinned waypoint) of a plan.
struct PlanStepRecord {
    Index step = 0;
    Index sensor = 0;
    Index location = 0;
    double score = std::numeric_limits<double>::quiet_NaN();
    Index candidates = 0;
    double running_condition = kInfinity;
    ScoreRule rule = ScoreRule::qrcp;
    bool pinned = false;
    bool relaxed = false;  ///< sensor held in place because its candidate set was empty
};

struct PlanResult {
    Trajectory trajectory;
    MatrixXd observability;  ///< stacked rows, identical to assemble(model, trajectory).matrix
    std::vector<PlanStepRecord> report;
    std::vector<std::string> events;
    Index gappy_fallbacks = 0;
};

class InfeasiblePlanError : public Error {
public:
    InfeasiblePlanError(const std::string& what, Index sensor, Index step, std::vector<std::vector<Index>> partial)
        : Error(Category::infeasible, what), sensor_(sensor), step_(step), partial_(std::move(partial)) {}

    Index sensor() const noexcept { return sensor_; }
    Index step() const noexcept { return step_; }
    /// Steps completed before the failure.
    const std::vector<std::vector<Index>>& partial_plan() const noexcept { return partial_; }

private:
    Index sensor_;
    Index step_;
    std::vector<std::vector<Index>> partial_;
};

struct ScoreResult {
    VectorXd scores;
    std::vector<Index> fallback_rows;  ///< gappy_e rows whose radicand went negative
};

/// Per-row selection scores for appending a row of X to `observed`. Larger is better.
///
/// qrcp: squared norm of each row's component orthogonal to the row space of
/// `observed` (from a pivoted QR of its transpose); requires rank(observed) < m.
/// gappy_e: GappyPOD+E lower bound on the growth of the smallest squared
/// singular value; requires rank(observed) == m.
inline ScoreResult selection_score(const MatrixXd& X, const MatrixXd& observed, ScoreRule rule) {
    const Index m = X.cols();
    if (observed.rows() > 0 && observed.cols() != m) throw ArgumentError("selection_score: column mismatch");
    ScoreResult out;
    if (rule == ScoreRule::qrcp) {
        if (observed.rows() == 0) {
            out.scores = X.rowwise().squaredNorm();
            return out;
        }
        Eigen::ColPivHouseholderQR<MatrixXd> qr(observed.transpose());
        qr.setThreshold(1e-10);
        const Index rank = qr.rank();
        if (rank >= m) throw ArgumentError("selection_score: qrcp rule needs a rank-deficient observed matrix");
        const MatrixXd Q = qr.householderQ();
        const MatrixXd U = Q.transpose() * X.transpose();
        out.scores = U.bottomRows(m - rank).colwise().squaredNorm().transpose();
        return out;
    }

    if (observed.rows() < m) throw ArgumentError("selection_score: gappy_e rule needs at least m observed rows");
    Eigen::JacobiSVD<MatrixXd> svd(observed, Eigen::ComputeFullV);
    const VectorXd& sv = svd.singularValues();
    if (linalg::numerical_rank(sv, 1e-10) < m)
        throw DegenerateRankError("selection_score: observed matrix is rank deficient in gappy_e mode",
                                  linalg::numerical_rank(sv, 1e-10));
    const MatrixXd U = svd.matrixV().transpose() * X.transpose();
    out.scores.resize(X.rows());
    if (m == 1) {
        // no second singular value: the limit of the bound as the gap grows
        out.scores = 2.0 * U.row(0).array().square().transpose();
        return out;
    }
    const double gap = sv(m - 2) * sv(m - 2) - sv(m - 1) * sv(m - 1);
    for (Index i = 0; i < X.rows(); ++i) {
        const double norm2 = U.col(i).squaredNorm();
        const double weak2 = U(m - 1, i) * U(m - 1, i);
        const double r = gap + norm2;
        const double radicand = r * r - 4.0 * gap * weak2;
        if (radicand < 0.0) {
            out.fallback_rows.push_back(i);
            out.scores(i) = std::max(0.0, X.row(i).squaredNorm() - norm2);
            continue;
        }
        const double root = std::sqrt(radicand);
        // r - sqrt(r^2 - d) written without cancellation
        out.scores(i) = r + root > 0.0 ? 4.0 * gap * weak2 / (r + root) : 0.0;
    }
    return out;
}

namespace detail {

/// Candidate mask for one sensor. `anchor_moves` (optional) are move counts to the
/// location that must remain reachable within `remaining` moves.
inline std::vector<char> candidate_mask(const Geometry& geom, const MotionConstraint& mc,
                                        const std::vector<double>& dist_from_current,
                                        const std::vector<Index>* anchor_moves, Index remaining,
                                        const std::vector<char>& occupied) {
    const auto n = static_cast<std::size_t>(geom.size());
    std::vector<char> mask(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        if (occupied[s] || geom.isolated(static_cast<Index>(s))) continue;
        if (!mc.allows(dist_from_current[s])) continue;
        if (anchor_moves && (*anchor_moves)[s] > remaining) continue;
        mask[s] = 1;
    }
    return mask;
}

inline std::vector<char> open_mask(const Geometry& geom, const std::vector<char>& occupied) {
    std::vector<char> mask(occupied.size(), 0);
    for (std::size_t s = 0; s < mask.size(); ++s) mask[s] = !occupied[s] && !geom.isolated(static_cast<Index>(s));
    return mask;
}

/// Shared machinery of plan() and multiscale_refine().
class GreedyEngine {
public:
    GreedyEngine(const RealBlockModel& model, const Geometry& geom, const MotionConstraint& mc)
        : model_(model), geom_(geom), mc_(mc), X_(model.modes), observed_(0, model.m()) {}

    const MatrixXd& observed() const { return observed_; }
    std::vector<PlanStepRecord>& report() { return report_; }
    std::vector<std::string>& events() { return events_; }
    Index fallbacks() const { return fallbacks_; }

    void advance() { X_ = X_ * model_.dynamics; }

    /// Picks the best row among `allowed` and appends it. Returns -1 when nothing is allowed.
    Index select(const std::vector<char>& allowed, PlanStepRecord& rec) {
        Index count = 0;
        for (char a : allowed) count += a ? 1 : 0;
        rec.candidates = count;
        if (count == 0) return -1;
        rec.rule = current_rule();
        const ScoreResult scored = selection_score(X_, observed_, rec.rule);
        if (!scored.fallback_rows.empty()) {
            fallbacks_ += static_cast<Index>(scored.fallback_rows.size());
            events_.push_back("step " + std::to_string(rec.step) + ": gappy_e radicand negative for " +
                              std::to_string(scored.fallback_rows.size()) + " rows, residual score used");
        }
        Index best = -1;
        for (Index s = 0; s < static_cast<Index>(allowed.size()); ++s) {
            if (!allowed[static_cast<std::size_t>(s)]) continue;
            if (best < 0 || scored.scores(s) > scored.scores(best)) best = s;
        }
        rec.score = scored.scores(best);
        append(best, rec);
        return best;
    }

    void append(Index location, PlanStepRecord& rec) {
        observed_.conservativeResize(observed_.rows() + 1, Eigen::NoChange);
        observed_.row(observed_.rows() - 1) = X_.row(location);
        rec.location = location;
        const VectorXd sv = linalg::singular_values(observed_);
        rank_ = linalg::numerical_rank(sv, 1e-10);
        rec.running_condition = condition_number(observed_);
        report_.push_back(rec);
    }

    /// Fills one time step with constrained, sequential selections.
    /// `masks[q]` is sensor q's candidate mask builder given the occupied set.
    template <class MaskFn>
    std::vector<Index> constrained_step(Index step, const std::vector<Index>& current, MaskFn&& mask_for,
                                        const std::vector<std::vector<Index>>& done) {
        const auto k = static_cast<Index>(current.size());
        const auto n = static_cast<std::size_t>(geom_.size());
        std::vector<Index> placed(static_cast<std::size_t>(k), -1);
        std::vector<char> occupied(n, 0);
        std::vector<std::vector<double>> dist(static_cast<std::size_t>(k));
        for (Index q = 0; q < k; ++q) dist[static_cast<std::size_t>(q)] = geom_.distances_from(current[static_cast<std::size_t>(q)]);

        for (Index pick = 0; pick < k; ++pick) {
            std::vector<std::vector<char>> masks(static_cast<std::size_t>(k));
            std::vector<char> relaxed(static_cast<std::size_t>(k), 0);
            std::vector<char> uni(n, 0);
            for (Index q = 0; q < k; ++q) {
                if (placed[static_cast<std::size_t>(q)] >= 0) continue;
                auto& mask = masks[static_cast<std::size_t>(q)];
                mask = mask_for(q, dist[static_cast<std::size_t>(q)], occupied);
                bool any = false;
                for (char c : mask) any = any || c;
                const Index cur = current[static_cast<std::size_t>(q)];
                if (!any && !occupied[static_cast<std::size_t>(cur)]) {
                    mask[static_cast<std::size_t>(cur)] = 1;
                    relaxed[static_cast<std::size_t>(q)] = 1;
                }
                for (std::size_t s = 0; s < n; ++s) uni[s] = uni[s] || mask[s];
            }
            PlanStepRecord rec;
            rec.step = step;
            const Index s = select(uni, rec);
            if (s < 0) {
                Index stuck = 0;
                while (placed[static_cast<std::size_t>(stuck)] >= 0) ++stuck;
                throw InfeasiblePlanError("plan infeasible: sensor " + std::to_string(stuck) + " has no candidate at step " +
                                              std::to_string(step),
                                          stuck, step, done);
            }
            // closest unassigned sensor that can reach s; ties by lowest id
            Index owner = -1;
            for (Index q = 0; q < k; ++q) {
                if (placed[static_cast<std::size_t>(q)] >= 0 || !masks[static_cast<std::size_t>(q)][static_cast<std::size_t>(s)]) continue;
                if (owner < 0 || dist[static_cast<std::size_t>(q)][static_cast<std::size_t>(s)] <
                                     dist[static_cast<std::size_t>(owner)][static_cast<std::size_t>(s)])
                    owner = q;
            }
            placed[static_cast<std::size_t>(owner)] = s;
            occupied[static_cast<std::size_t>(s)] = 1;
            auto& last = report_.back();
            last.sensor = owner;
            last.relaxed = relaxed[static_cast<std::size_t>(owner)] != 0;
            if (last.relaxed)
                events_.push_back("step " + std::to_string(step) + ": sensor " + std::to_string(owner) +
                                  " held in place (empty candidate set)");
        }
        return placed;
    }

private:
    ScoreRule current_rule() const {
        return (observed_.rows() >= model_.m() && rank_ == model_.m()) ? ScoreRule::gappy_e : ScoreRule::qrcp;
    }

    const RealBlockModel& model_;
    const Geometry& geom_;
    const MotionConstraint& mc_;
    MatrixXd X_;
    MatrixXd observed_;
    Index rank_ = 0;
    Index fallbacks_ = 0;
    std::vector<PlanStepRecord> report_;
    std::vector<std::string> events_;
};

}  // namespace detail

/// Feasible next locations for one sensor.
///
/// `step` is the 0-based cycle step being filled. Step 0 has no history and
/// admits every unoccupied location. Later steps admit s with
/// distance(current, s) <= v and, when `enforce_cycle`, at most (period - step)
/// moves of length <= v back to `start`, which keeps the wrap to step 0 feasible.
/// If nothing qualifies the sensor may stay at `current` (when unoccupied).
inline std::vector<Index> candidate_set(const Geometry& geom, const MotionConstraint& mc, Index current, Index step,
                                        Index period, Index start, const std::vector<Index>& occupied,
                                        bool enforce_cycle = true) {
    mc.validate();
    geom.check_index(current);
    geom.check_index(start);
    if (step < 0 || step >= period) throw ArgumentError("candidate_set: step outside [0, period)");
    std::vector<char> occ(static_cast<std::size_t>(geom.size()), 0);
    for (Index o : occupied) {
        geom.check_index(o);
        occ[static_cast<std::size_t>(o)] = 1;
    }
    std::vector<char> mask;
    if (step == 0) {
        mask = detail::open_mask(geom, occ);
    } else {
        const auto moves = enforce_cycle ? geom.move_counts(start, mc.speed) : std::vector<Index>{};
        mask = detail::candidate_mask(geom, mc, geom.distances_from(current), enforce_cycle ? &moves : nullptr,
                                      period - step, occ);
    }
    std::vector<Index> out;
    for (Index s = 0; s < geom.size(); ++s)
        if (mask[static_cast<std::size_t>(s)]) out.push_back(s);
    if (out.empty() && !occ[static_cast<std::size_t>(current)]) out.push_back(current);
    if (out.empty())
        throw InfeasiblePlanError("candidate_set: no feasible location from " + std::to_string(current) + " at step " +
                                      std::to_string(step),
                                  -1, step, {});
    return out;
}

/// Greedy time-forwarding observability path planning.
inline PlanResult plan(const RealBlockModel& model, const Geometry& geom, const MotionConstraint& mc,
                       const PlanConfig& cfg) {
    cfg.validate();
    mc.validate();
    if (geom.size() != model.n()) throw ArgumentError("plan: geometry and model disagree on n");
    const Index k = cfg.sensors, l = cfg.period;
    const auto n = static_cast<std::size_t>(geom.size());
    Index open = 0;
    for (Index s = 0; s < geom.size(); ++s) open += geom.isolated(s) ? 0 : 1;
    if (k > open) throw ArgumentError("plan: more sensors than reachable locations");

    detail::GreedyEngine engine(model, geom, mc);
    std::vector<std::vector<Index>> steps;

    // first step: unconstrained, sensors assigned in selection order
    std::vector<char> occupied(n, 0);
    std::vector<Index> first;
    for (Index j = 0; j < k; ++j) {
        PlanStepRecord rec;
        rec.step = 0;
        rec.sensor = j;
        const Index s = engine.select(detail::open_mask(geom, occupied), rec);
        occupied[static_cast<std::size_t>(s)] = 1;
        first.push_back(s);
    }
    steps.push_back(first);
    engine.advance();

    std::vector<std::vector<Index>> home_moves;
    if (cfg.enforce_cycle)
        for (Index q = 0; q < k; ++q) home_moves.push_back(geom.move_counts(first[static_cast<std::size_t>(q)], mc.speed));

    for (Index i = 1; i < l; ++i) {
        auto mask_for = [&](Index q, const std::vector<double>& dist, const std::vector<char>& occ) {
            return detail::candidate_mask(geom, mc, dist, cfg.enforce_cycle ? &home_moves[static_cast<std::size_t>(q)] : nullptr,
                                          l - i, occ);
        };
        steps.push_back(engine.constrained_step(i, steps.back(), mask_for, steps));
        engine.advance();
    }

    PlanResult result;
    result.trajectory = Trajectory::from_steps(steps);
    result.observability = engine.observed();
    result.report = std::move(engine.report());
    result.events = std::move(engine.events());
    result.gappy_fallbacks = engine.fallbacks();
    return result;
}

/// Multiscale path completion: pins `coarse` at every `factor`-th fine step and
/// fills the gaps greedily while keeping the next waypoint reachable.
inline PlanResult multiscale_refine(const RealBlockModel& fine_model, const Trajectory& coarse, Index factor,
                                    const Geometry& geom, const MotionConstraint& fine_mc, PlanConfig fine_cfg) {
    if (factor < 2) throw ArgumentError("multiscale_refine: refine factor must be >= 2");
    fine_mc.validate();
    if (geom.size() != fine_model.n()) throw ArgumentError("multiscale_refine: geometry and model disagree on n");
    coarse.check_range(geom.size());
    const Index k = coarse.sensors(), lc = coarse.period(), lf = lc * factor;
    if (fine_cfg.sensors != k) throw ArgumentError("multiscale_refine: sensor count differs from coarse plan");
    if (fine_cfg.period != lf)
        throw ArgumentError("multiscale_refine: fine period must equal coarse period * factor (" + std::to_string(lf) + ")");

    // waypoint moves, cached per (sensor, coarse step)
    std::vector<std::vector<std::vector<Index>>> to_waypoint(static_cast<std::size_t>(k));
    for (Index q = 0; q < k; ++q) {
        for (Index c = 0; c < lc; ++c) {
            to_waypoint[static_cast<std::size_t>(q)].push_back(geom.move_counts(coarse.location(c, q), fine_mc.speed));
        }
        for (Index c = 0; c < lc; ++c) {
            const Index from = coarse.location(c, q);
            const Index next = (c + 1) % lc;
            if (lc == 1) break;
            if (to_waypoint[static_cast<std::size_t>(q)][static_cast<std::size_t>(next)][static_cast<std::size_t>(from)] > factor)
                throw InfeasiblePlanError("multiscale_refine: sensor " + std::to_string(q) + " cannot reach waypoint " +
                                              std::to_string(next) + " from waypoint " + std::to_string(c) + " within " +
                                              std::to_string(factor) + " fine steps",
                                          q, c * factor, {});
        }
    }

    detail::GreedyEngine engine(fine_model, geom, fine_mc);
    std::vector<std::vector<Index>> steps;
    for (Index i = 0; i < lf; ++i) {
        if (i % factor == 0) {
            const auto wp = coarse.step(i / factor);
            for (Index q = 0; q < k; ++q) {
                PlanStepRecord rec;
                rec.step = i;
                rec.sensor = q;
                rec.pinned = true;
                rec.candidates = 1;
                rec.rule = ScoreRule::qrcp;
                engine.append(wp[static_cast<std::size_t>(q)], rec);
            }
            steps.emplace_back(wp.begin(), wp.end());
        } else {
            const Index next_pin = (i / factor + 1) * factor;
            const auto next_wp = static_cast<std::size_t>((i / factor + 1) % lc);
            auto mask_for = [&](Index q, const std::vector<double>& dist, const std::vector<char>& occ) {
                return detail::candidate_mask(geom, fine_mc, dist, &to_waypoint[static_cast<std::size_t>(q)][next_wp],
                                              next_pin - i, occ);
            };
            steps.push_back(engine.constrained_step(i, steps.back(), mask_for, steps));
        }
        engine.advance();
    }

    PlanResult result;
    result.trajectory = Trajectory::from_steps(steps);
    result.observability = engine.observed();
    result.report = std::move(engine.report());
    result.events = std::move(engine.events());
    result.gappy_fallbacks = engine.fallbacks();
    return result;
}

/// Checks every move of every sensor, including the wrap from the last step to
/// the first, against the speed limit. Returns a description of the first violation.
inline std::optional<std::string> find_motion_violation(const Trajectory& traj, const Geometry& geom,
                                                        const MotionConstraint& mc) {
    for (Index q = 0; q < traj.sensors(); ++q) {
        for (Index t = 0; t < traj.period(); ++t) {
            const Index a = traj.location(t, q), b = traj.location((t + 1) % traj.period(), q);
            const double d = geom.distance(a, b);
            if (!mc.allows(d))
                return "sensor " + std::to_string(q) + " moves " + std::to_string(a) + " -> " + std::to_string(b) +
                       " (distance " + std::to_string(d) + ") at step " + std::to_string(t);
        }
    }
    return std::nullopt;
}

}  // namespace mobsense
