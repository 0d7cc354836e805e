#pragma once
// Shared helpers for the test suites: random models, trajectories, comparisons.

#include "mobsense/geometry.hpp"
#include "mobsense/model.hpp"
#include "mobsense/observability.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace testing_support {

using namespace mobsense;

/// Random canonical model: `pairs` conjugate pairs plus `reals` real eigenvalues,
/// moduli in [lo, hi], Gaussian modes.
inline ReducedModel random_model(Index n, Index pairs, Index reals, std::uint64_t seed, double lo = 0.5,
                                 double hi = 0.98) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> radius(lo, hi), angle(0.05, 3.0), unit(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index m = 2 * pairs + reals;
    VectorXcd lam(m);
    MatrixXcd modes(n, m);
    Index c = 0;
    for (Index p = 0; p < pairs; ++p, c += 2) {
        lam(c) = std::polar(radius(rng), angle(rng));
        lam(c + 1) = std::conj(lam(c));
        for (Index i = 0; i < n; ++i) modes(i, c) = Complex(normal(rng), normal(rng));
        modes.col(c + 1) = modes.col(c).conjugate();
    }
    for (Index r = 0; r < reals; ++r, ++c) {
        lam(c) = radius(rng) * (unit(rng) < 0 ? -1.0 : 1.0);
        for (Index i = 0; i < n; ++i) modes(i, c) = normal(rng);
    }
    return ReducedModel::from_spectrum(lam, modes);
}

/// Random trajectory with distinct locations per step (no motion constraint).
inline Trajectory random_trajectory(Index n, Index period, Index sensors, std::mt19937_64& rng) {
    std::vector<Index> flat;
    std::vector<Index> cells(static_cast<std::size_t>(n));
    std::iota(cells.begin(), cells.end(), Index{0});
    for (Index t = 0; t < period; ++t) {
        std::shuffle(cells.begin(), cells.end(), rng);
        flat.insert(flat.end(), cells.begin(), cells.begin() + sensors);
    }
    return Trajectory(period, sensors, flat);
}

/// Max distance of a greedy nearest-neighbour matching between two eigenvalue multisets.
inline double multiset_distance(const VectorXcd& a, const VectorXcd& b) {
    if (a.size() != b.size()) return INFINITY;
    std::vector<bool> used(static_cast<std::size_t>(b.size()), false);
    double worst = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        double best = INFINITY;
        Index pick = -1;
        for (Index j = 0; j < b.size(); ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double d = std::abs(a(i) - b(j));
            if (d < best) best = d, pick = j;
        }
        used[static_cast<std::size_t>(pick)] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

/// First `count` column pivots of a Householder QR with column pivoting of Psi^T.
inline std::vector<Index> qr_pivots(const MatrixXd& modes, Index count) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(modes.transpose());
    std::vector<Index> out;
    for (Index j = 0; j < count; ++j) out.push_back(qr.colsPermutation().indices()(j));
    return out;
}

/// Smallest singular value of `observed` with row i of X appended, for every i.
inline VectorXd augmented_sigma_min(const MatrixXd& X, const MatrixXd& observed) {
    VectorXd out(X.rows());
    MatrixXd aug(observed.rows() + 1, observed.cols());
    aug.topRows(observed.rows()) = observed;
    for (Index i = 0; i < X.rows(); ++i) {
        aug.row(observed.rows()) = X.row(i);
        const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(aug).singularValues();
        out(i) = sv(sv.size() - 1);
    }
    return out;
}

/// 0-based rank of entry `i` when `v` is sorted descending (ties count in i's favor).
inline Index descending_rank(const VectorXd& v, Index i) {
    Index r = 0;
    for (Index j = 0; j < v.size(); ++j) r += v(j) > v(i) ? 1 : 0;
    return r;
}

/// Random Schur-stable system with generic C, dense positive definite Q and diagonal R.
struct RandomSystem {
    MatrixXd A, C, Q, R;
};

inline RandomSystem random_stable_system(Index m, Index p, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> radius(0.2, 0.95), var(0.1, 2.0);
    RandomSystem s{MatrixXd(m, m), MatrixXd(p, m), MatrixXd::Zero(m, m), MatrixXd::Zero(p, p)};
    for (Index i = 0; i < s.A.size(); ++i) s.A.data()[i] = normal(rng);
    s.A *= radius(rng) / linalg::spectral_radius(s.A);
    for (Index i = 0; i < s.C.size(); ++i) s.C.data()[i] = normal(rng);
    MatrixXd B(m, m);
    for (Index i = 0; i < B.size(); ++i) B.data()[i] = normal(rng);
    s.Q = 0.2 * B * B.transpose() / static_cast<double>(m);
    for (Index i = 0; i < m; ++i) s.Q(i, i) += var(rng);
    for (Index i = 0; i < p; ++i) s.R(i, i) = var(rng);
    return s;
}

/// Real-block model from explicit real dynamics and modes (block_map all real).
inline RealBlockModel real_model(MatrixXd dynamics, MatrixXd modes) {
    RealBlockModel out{std::move(dynamics), std::move(modes), {}};
    for (Index j = 0; j < out.m(); ++j) out.block_map.push_back(BlockTag{j, BlockPart::real});
    return out;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing_support
