#pragma once
// Kalman filtering in reduced real-block coordinates, DARE fixed points and
// analytic trace bounds.
//
// KfState always holds the *prior* (predicted) estimate and covariance at the
// current time. kf_step absorbs the measurement at that time and predicts one
// step ahead, so covariances follow
//     S_{t+1} = A S A' - A S C'(C S C' + R)^{-1} C S A' + Q.

#include "mobsense/errors.hpp"
#include "mobsense/linalg.hpp"
#include "mobsense/model.hpp"
#include "mobsense/observability.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mobsense {

struct KfState {
    VectorXd estimate;
    MatrixXd covariance;

    static KfState diffuse(Index m, double variance = 10.0) {
        return {VectorXd::Zero(m), variance * MatrixXd::Identity(m, m)};
    }
};

/// Posterior (filtered) estimate and covariance after absorbing one measurement.
struct KfPosterior {
    VectorXd estimate;
    MatrixXd covariance;
};

namespace detail {

inline MatrixXd select_rows(const MatrixXd& modes, std::span<const Index> sel) {
    MatrixXd C(static_cast<Index>(sel.size()), modes.cols());
    for (std::size_t i = 0; i < sel.size(); ++i) {
        if (sel[i] < 0 || sel[i] >= modes.rows()) throw ArgumentError("kalman: measurement index out of range");
        C.row(static_cast<Index>(i)) = modes.row(sel[i]);
    }
    return C;
}

}  // namespace detail

/// Measurement update with C = rows `sel` of the real modes and R = rho I.
inline KfPosterior kf_update(const RealBlockModel& model, const KfState& prior, std::span<const Index> sel,
                             const VectorXd& y, const NoiseSpec& noise) {
    const Index m = model.m();
    if (prior.estimate.size() != m || prior.covariance.rows() != m || prior.covariance.cols() != m)
        throw ArgumentError("kf_update: state dimension mismatch");
    if (y.size() != static_cast<Index>(sel.size())) throw ArgumentError("kf_update: measurement size mismatch");
    if (sel.empty()) return {prior.estimate, prior.covariance};

    const MatrixXd C = detail::select_rows(model.modes, sel);
    const Index k = C.rows();
    const MatrixXd PCt = prior.covariance * C.transpose();
    MatrixXd S = C * PCt;
    S.diagonal().array() += noise.rho;
    linalg::symmetrize(S);
    const VectorXd ev = linalg::sym_eigenvalues(S);
    if (!(ev(0) > 0.0) || ev(k - 1) / ev(0) > 1e14)
        throw ConditioningError("kf_update: innovation covariance is numerically singular (condition " +
                                std::to_string(ev(k - 1) / ev(0)) + ")");
    const Eigen::LDLT<MatrixXd> ldlt(S);
    const MatrixXd K = ldlt.solve(PCt.transpose()).transpose();  // m x k

    KfPosterior post;
    post.estimate = prior.estimate + K * (y - C * prior.estimate);
    if (noise.rho < 1e-6) {
        // Joseph form
        MatrixXd IKC = MatrixXd::Identity(m, m) - K * C;
        post.covariance = IKC * prior.covariance * IKC.transpose() + noise.rho * K * K.transpose();
    } else {
        post.covariance = prior.covariance - K * PCt.transpose();
    }
    linalg::symmetrize(post.covariance);
    return post;
}

inline KfState kf_predict(const RealBlockModel& model, const KfPosterior& post, const NoiseSpec& noise) {
    KfState next{model.dynamics * post.estimate, model.dynamics * post.covariance * model.dynamics.transpose()};
    next.covariance.diagonal().array() += noise.q;
    linalg::symmetrize(next.covariance);
    return next;
}

/// Update with the measurement at the current time, then predict one step.
inline KfState kf_step(const RealBlockModel& model, const KfState& state, std::span<const Index> sel,
                       const VectorXd& y, const NoiseSpec& noise) {
    noise.validate();
    return kf_predict(model, kf_update(model, state, sel, y, noise), noise);
}

struct KfRun {
    double dt = 1.0;
    std::vector<double> trace_series;        ///< trace of the prior covariance at each step
    std::vector<double> recon_error_series;  ///< ||x_hat_t - x_t||^2 / n with x_hat from the posterior
    std::vector<VectorXd> estimate_series;   ///< posterior estimates, when requested

    Index steps() const { return static_cast<Index>(trace_series.size()); }
};

/// Truth comes from the model itself, with disturbances and measurement noise drawn from `seed`.
struct SimulatedTruth {
    VectorXd initial;  ///< real-block initial coefficients; zero when empty
};

/// Truth is a recorded data set; measurements are its rows (plus optional noise).
struct DataTruth {
    const SnapshotMatrix* data = nullptr;
    bool add_measurement_noise = true;
};

struct FilterOptions {
    Index steps = 1;
    double initial_variance = 10.0;
    VectorXd initial_estimate;  ///< zero when empty
    std::uint64_t seed = 0;
    bool store_estimates = false;
    double dt = 1.0;
};

/// Runs the filter along a periodic schedule; step t uses sigma_{t mod l}.
inline KfRun run_filter(const RealBlockModel& model, const Trajectory& traj,
                        const std::variant<SimulatedTruth, DataTruth>& truth, const NoiseSpec& noise,
                        const FilterOptions& opts) {
    noise.validate();
    if (opts.steps < 1) throw ArgumentError("run_filter: steps must be >= 1");
    traj.check_range(model.n());
    const Index m = model.m(), n = model.n();

    const auto* data = std::get_if<DataTruth>(&truth);
    if (data) {
        if (!data->data) throw ArgumentError("run_filter: missing data");
        if (data->data->n() != n) throw ArgumentError("run_filter: data and model disagree on n");
        if (data->data->steps() < opts.steps) throw ArgumentError("run_filter: data shorter than requested steps");
    }

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double meas_sd = std::sqrt(noise.rho), dist_sd = std::sqrt(noise.q);

    VectorXd coeff = VectorXd::Zero(m);
    if (const auto* sim = std::get_if<SimulatedTruth>(&truth); sim && sim->initial.size() > 0) {
        if (sim->initial.size() != m) throw ArgumentError("run_filter: initial truth size mismatch");
        coeff = sim->initial;
    }

    KfState state = KfState::diffuse(m, opts.initial_variance);
    if (opts.initial_estimate.size() > 0) {
        if (opts.initial_estimate.size() != m) throw ArgumentError("run_filter: initial estimate size mismatch");
        state.estimate = opts.initial_estimate;
    }

    KfRun run;
    run.dt = opts.dt;
    run.trace_series.reserve(static_cast<std::size_t>(opts.steps));
    run.recon_error_series.reserve(static_cast<std::size_t>(opts.steps));
    VectorXd field(n);
    for (Index t = 0; t < opts.steps; ++t) {
        const auto sel = traj.at_time(t);
        if (data) field = data->data->data.col(t);
        else field = model.modes * coeff;

        VectorXd y(static_cast<Index>(sel.size()));
        for (std::size_t i = 0; i < sel.size(); ++i) {
            y(static_cast<Index>(i)) = field(sel[i]);
            if (!data || data->add_measurement_noise) y(static_cast<Index>(i)) += meas_sd * normal(rng);
        }

        run.trace_series.push_back(state.covariance.trace());
        KfPosterior post;
        try {
            post = kf_update(model, state, sel, y, noise);
        } catch (const ConditioningError& e) {
            throw ConditioningError(std::string(e.what()) + " at step " + std::to_string(t));
        }
        run.recon_error_series.push_back((model.modes * post.estimate - field).squaredNorm() / static_cast<double>(n));
        if (opts.store_estimates) run.estimate_series.push_back(post.estimate);
        state = kf_predict(model, post, noise);

        if (!data) {
            VectorXd next = model.dynamics * coeff;
            if (dist_sd > 0.0)
                for (Index i = 0; i < m; ++i) next(i) += dist_sd * normal(rng);
            coeff = std::move(next);
        }
    }
    return run;
}

struct DareResult {
    MatrixXd sigma;
    double residual = 0.0;  ///< ||DARE(sigma) - sigma||_F
    Index iterations = 0;
};

namespace detail {

inline MatrixXd riccati_map(const MatrixXd& A, const MatrixXd& C, const MatrixXd& Q, const MatrixXd& R,
                            const MatrixXd& S) {
    MatrixXd next;
    if (C.rows() == 0) {
        next = A * S * A.transpose() + Q;
    } else {
        const MatrixXd SCt = S * C.transpose();
        MatrixXd inn = C * SCt + R;
        linalg::symmetrize(inn);
        const MatrixXd gain_part = SCt * Eigen::LDLT<MatrixXd>(inn).solve(SCt.transpose());
        next = A * (S - gain_part) * A.transpose() + Q;
    }
    linalg::symmetrize(next);
    return next;
}

inline bool observable_pair(const MatrixXd& A, const MatrixXd& C) {
    const Index m = A.rows();
    if (C.rows() == 0) return false;
    MatrixXd stacked(C.rows() * m, m);
    MatrixXd block = C;
    for (Index i = 0; i < m; ++i) {
        stacked.middleRows(i * C.rows(), C.rows()) = block;
        block = block * A;
    }
    return linalg::numerical_rank(stacked, 1e-10) == m;
}

}  // namespace detail

/// Fixed-point iteration of the filter Riccati recurrence from Sigma = Q.
///
/// Requires (A, C) observable or A Schur stable (which covers C = 0); stops when
/// the relative Frobenius step falls below `tol`.
inline DareResult dare_iterate(const MatrixXd& A, const MatrixXd& C, const MatrixXd& Q, const MatrixXd& R,
                               double tol = 1e-10, Index max_iter = 100000) {
    const Index m = A.rows();
    if (A.cols() != m || Q.rows() != m || Q.cols() != m) throw ArgumentError("dare_iterate: A and Q must be m x m");
    if (C.rows() > 0 && (C.cols() != m || R.rows() != C.rows() || R.cols() != C.rows()))
        throw ArgumentError("dare_iterate: C must be p x m and R p x p");
    if (!(tol > 0.0)) throw ArgumentError("dare_iterate: tol must be > 0");
    if (!detail::observable_pair(A, C) && !(linalg::spectral_radius(A) < 1.0))
        throw ArgumentError("dare_iterate: (A, C) is neither observable nor stable");

    DareResult out;
    MatrixXd S = Q;
    for (Index it = 1; it <= max_iter; ++it) {
        MatrixXd next = detail::riccati_map(A, C, Q, R, S);
        const double step = (next - S).norm();
        const double scale = S.norm();
        S = std::move(next);
        out.iterations = it;
        if (step < tol * scale || step == 0.0) {
            out.sigma = S;
            out.residual = (detail::riccati_map(A, C, Q, R, S) - S).norm();
            return out;
        }
        if (!S.allFinite()) throw NonConvergenceError("dare_iterate: iteration diverged", kInfinity);
    }
    throw NonConvergenceError("dare_iterate: no convergence in " + std::to_string(max_iter) + " iterations",
                              (detail::riccati_map(A, C, Q, R, S) - S).norm());
}

/// Komaroff-type bounds on tr(Sigma*) of the filter DARE.
struct DareBounds {
    double lower = 0.0;
    double upper = kInfinity;
    double a1 = 0.0;
    double a2 = 0.0;
    bool lower_applicable = false;
    bool upper_applicable = false;

    bool applicable() const { return lower_applicable && upper_applicable; }
};

/// Upper:  tr S <= 2 tr Q / (a1 + sqrt(a1^2 + 4 l_n(C'R^-1C) tr Q / n)),
///         a1 = 1 - l_1(A'A) - l_1(Q) l_n(C'R^-1C).
/// Lower:  tr S >= 2 tr(Q^1/2)^2 / (a2 + sqrt(a2^2 + 4 n l_1(C'R^-1C) tr(Q^1/2)^2)),
///         a2 = n - sum_i |l_i(A)|^2 - tr(Q^1/2)^2 l_1(C'R^-1C).
/// Both require C'R^-1C > 0 and Q > 0; otherwise the flags are false.
inline DareBounds dare_trace_bounds(const MatrixXd& A, const MatrixXd& C, const MatrixXd& Q, const MatrixXd& R) {
    const Index n = A.rows();
    if (A.cols() != n || Q.rows() != n || Q.cols() != n || C.cols() != n || R.rows() != C.rows() || R.cols() != C.rows())
        throw ArgumentError("dare_trace_bounds: dimension mismatch");
    DareBounds b;
    const double dn = static_cast<double>(n);

    MatrixXd info = C.rows() > 0 ? MatrixXd(C.transpose() * R.ldlt().solve(C)) : MatrixXd::Zero(n, n);
    linalg::symmetrize(info);
    const VectorXd info_ev = linalg::sym_eigenvalues(info);
    const VectorXd q_ev = linalg::sym_eigenvalues(Q);
    const double info_max = info_ev(n - 1), info_min = info_ev(0);
    const double q_max = q_ev(n - 1);
    const double trQ = Q.trace();
    const double trQh = linalg::sym_sqrt(Q).trace();
    const double trQh2 = trQh * trQh;
    const double ata_max = linalg::sym_eigenvalues(A.transpose() * A)(n - 1);
    const double sum_abs2 = Eigen::EigenSolver<MatrixXd>(A, false).eigenvalues().cwiseAbs2().sum();

    const bool info_pd = info_min > 1e-12 * std::max(1.0, info_max);
    const bool q_pd = q_ev(0) > 1e-12 * std::max(1.0, q_max);

    b.a1 = 1.0 - ata_max - q_max * info_min;
    b.a2 = dn - sum_abs2 - trQh2 * info_max;
    b.upper_applicable = info_pd && q_pd;
    b.lower_applicable = info_pd && q_pd;
    if (b.upper_applicable) b.upper = 2.0 * trQ / (b.a1 + std::sqrt(b.a1 * b.a1 + 4.0 * info_min * trQ / dn));
    if (b.lower_applicable) b.lower = 2.0 * trQh2 / (b.a2 + std::sqrt(b.a2 * b.a2 + 4.0 * dn * info_max * trQh2));
    return b;
}

struct LiftedSystem {
    MatrixXd dynamics;     ///< Lambda_real^l
    MatrixXd measurement;  ///< identical to assemble(model, traj).matrix
};

/// Time-invariant lifting of a periodic schedule over one period.
inline LiftedSystem lift_system(const RealBlockModel& model, const Trajectory& traj) {
    LiftedSystem out;
    out.measurement = assemble(model, traj).matrix;
    out.dynamics = MatrixXd::Identity(model.m(), model.m());
    for (Index i = 0; i < traj.period(); ++i) out.dynamics = out.dynamics * model.dynamics;
    return out;
}

}  // namespace mobsense
