#pragma once
// Reduced-order linear models x_t = Psi z_t, z_{t+1} = Lambda z_t + w_t.
//
// The complex diagonal form (ReducedModel) is canonical. Conjugate pairs are
// stored adjacently, lead (positive imaginary part) first. The real-block form
// (RealBlockModel) maps each pair (lambda, psi), (conj lambda, conj psi) with
// lead coefficient z = a + ib onto real coordinates c = sqrt(2) (a, b):
//
//     dynamics block  [[Re lambda, -Im lambda], [Im lambda, Re lambda]]
//     mode columns    sqrt(2) Re psi,  -sqrt(2) Im psi
//
// so that modes_real * c == Psi z for every conjugate-symmetric z. Disturbance
// and filter covariances are expressed in these real coordinates.

#include "mobsense/errors.hpp"
#include "mobsense/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace mobsense {

class Geometry;

using Complex = std::complex<double>;

struct NoiseSpec {
    double q = 0.0;    ///< disturbance variance, Q = qI in reduced real coordinates
    double rho = 1.0;  ///< measurement variance, R = rho I

    void validate() const {
        if (!(q >= 0.0) || !std::isfinite(q)) throw ArgumentError("noise: q must be finite and >= 0");
        if (!(rho > 0.0) || !std::isfinite(rho)) throw ArgumentError("noise: rho must be finite and > 0");
    }
};

struct FullModel {
    MatrixXd A;
    double q_scale = 0.0;
    double r_scale = 1.0;

    Index n() const { return A.rows(); }

    void validate() const {
        if (A.rows() < 1 || A.rows() != A.cols()) throw ArgumentError("full model: A must be square with n >= 1");
        NoiseSpec{q_scale, r_scale}.validate();
    }
};

enum class PairRole { real, lead, follow };

struct PairTag {
    PairRole role = PairRole::real;
    Index partner = 0;  ///< own index for real columns, the conjugate column otherwise
};

namespace detail {

inline double phase_key(Complex lambda) {
    // arg in [0, pi]: leads and real eigenvalues only reach here
    return std::abs(lambda.imag()) == 0.0 ? (lambda.real() < 0.0 ? M_PI : 0.0) : std::arg(lambda);
}

/// Scale to unit norm and rotate so the largest-modulus entry is real positive.
inline VectorXcd canonical_mode(VectorXcd v) {
    const double norm = v.norm();
    if (!(norm > 0.0)) throw StructuralError("mode column has zero norm");
    v /= norm;
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const Complex phase = std::conj(v(imax)) / std::abs(v(imax));
    return v * phase;
}

}  // namespace detail

class ReducedModel {
public:
    ReducedModel() = default;

    /// Takes ownership of an already canonical model and validates its invariants.
    ReducedModel(VectorXcd eigenvalues, MatrixXcd modes, std::vector<PairTag> pair_map)
        : eigenvalues_(std::move(eigenvalues)), modes_(std::move(modes)), pair_map_(std::move(pair_map)) {
        validate();
    }

    /// Builds a canonical model from an arbitrary real-system spectrum: pairs
    /// conjugates, orders by descending modulus (ties by descending argument),
    /// normalizes modes to unit 2-norm and enforces exact conjugacy of partners.
    static ReducedModel from_spectrum(const VectorXcd& eigenvalues, const MatrixXcd& modes,
                                      double real_tol = 1e-12) {
        const Index m = eigenvalues.size();
        if (modes.cols() != m) throw ArgumentError("from_spectrum: modes/eigenvalues size mismatch");

        struct Group { Complex lambda; VectorXcd mode; bool pair; };
        std::vector<Group> groups;
        std::vector<Index> followers;
        for (Index j = 0; j < m; ++j) {
            const Complex lam = eigenvalues(j);
            const double scale = std::max(std::abs(lam), 1e-300);
            if (std::abs(lam.imag()) <= real_tol * scale) {
                VectorXcd v = modes.col(j);
                // A real eigenvalue of a real matrix has a real eigenvector up to a phase.
                Index imax = 0;
                v.cwiseAbs().maxCoeff(&imax);
                v *= std::conj(v(imax)) / std::abs(v(imax));
                groups.push_back({Complex(lam.real(), 0.0), VectorXcd(v.real().cast<Complex>()), false});
            } else if (lam.imag() > 0.0) {
                groups.push_back({lam, modes.col(j), true});
            } else {
                followers.push_back(j);
            }
        }
        // every lead needs a conjugate partner
        std::vector<bool> used(followers.size(), false);
        for (auto& g : groups) {
            if (!g.pair) continue;
            double best = kInfinity;
            std::size_t pick = followers.size();
            for (std::size_t f = 0; f < followers.size(); ++f) {
                if (used[f]) continue;
                const double d = std::abs(std::conj(eigenvalues(followers[f])) - g.lambda);
                if (d < best) { best = d; pick = f; }
            }
            if (pick == followers.size() || best > 1e-8 * std::max(1.0, std::abs(g.lambda)))
                throw StructuralError("from_spectrum: complex eigenvalue without conjugate partner");
            used[pick] = true;
        }
        if (std::find(used.begin(), used.end(), false) != used.end())
            throw StructuralError("from_spectrum: unpaired eigenvalue with negative imaginary part");

        std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
            const double ma = std::abs(a.lambda), mb = std::abs(b.lambda);
            if (std::abs(ma - mb) > 1e-12 * std::max(ma, mb)) return ma > mb;
            return detail::phase_key(a.lambda) > detail::phase_key(b.lambda);
        });

        VectorXcd lam(m);
        MatrixXcd psi(modes.rows(), m);
        std::vector<PairTag> tags(static_cast<std::size_t>(m));
        Index col = 0;
        for (const auto& g : groups) {
            const VectorXcd v = detail::canonical_mode(g.mode);
            lam(col) = g.lambda;
            psi.col(col) = v;
            if (!g.pair) {
                tags[col] = {PairRole::real, col};
                ++col;
            } else {
                tags[col] = {PairRole::lead, col + 1};
                lam(col + 1) = std::conj(g.lambda);
                psi.col(col + 1) = v.conjugate();
                tags[col + 1] = {PairRole::follow, col};
                col += 2;
            }
        }
        return ReducedModel(std::move(lam), std::move(psi), std::move(tags));
    }

    Index n() const { return modes_.rows(); }
    Index m() const { return eigenvalues_.size(); }
    const VectorXcd& eigenvalues() const { return eigenvalues_; }
    const MatrixXcd& modes() const { return modes_; }
    const std::vector<PairTag>& pair_map() const { return pair_map_; }

    /// Leading `rank` columns; a conjugate pair is never split (rank drops by one instead).
    ReducedModel truncated(Index rank) const {
        if (rank < 1) throw ArgumentError("truncate: rank must be >= 1");
        rank = std::min(rank, m());
        if (pair_map_[static_cast<std::size_t>(rank - 1)].role == PairRole::lead) --rank;
        if (rank < 1) throw ArgumentError("truncate: rank 1 would split the leading conjugate pair");
        return ReducedModel(eigenvalues_.head(rank), modes_.leftCols(rank),
                            std::vector<PairTag>(pair_map_.begin(), pair_map_.begin() + rank));
    }

    /// Checks that `z` is conjugate-symmetric under the pair map.
    bool is_conjugate_symmetric(const VectorXcd& z, double tol = 1e-12) const {
        if (z.size() != m()) return false;
        const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
        for (Index j = 0; j < m(); ++j) {
            const auto& t = pair_map_[static_cast<std::size_t>(j)];
            if (t.role == PairRole::real && std::abs(z(j).imag()) > tol * scale) return false;
            if (t.role == PairRole::lead && std::abs(z(t.partner) - std::conj(z(j))) > tol * scale) return false;
        }
        return true;
    }

    void validate() const {
        const Index mm = m();
        if (mm < 1) throw ArgumentError("reduced model: m must be >= 1");
        if (modes_.cols() != mm) throw ArgumentError("reduced model: modes must have m columns");
        if (mm > n()) throw ArgumentError("reduced model: m must not exceed n");
        if (static_cast<Index>(pair_map_.size()) != mm) throw StructuralError("reduced model: pair_map size mismatch");
        if (!eigenvalues_.allFinite() || !modes_.allFinite()) throw ArgumentError("reduced model: non-finite entries");
        for (Index j = 0; j < mm; ++j) {
            const auto& t = pair_map_[static_cast<std::size_t>(j)];
            switch (t.role) {
            case PairRole::real:
                if (t.partner != j) throw StructuralError("pair_map: real column must reference itself");
                break;
            case PairRole::lead: {
                if (t.partner != j + 1 || j + 1 >= mm || pair_map_[static_cast<std::size_t>(j + 1)].role != PairRole::follow ||
                    pair_map_[static_cast<std::size_t>(j + 1)].partner != j)
                    throw StructuralError("pair_map: lead column " + std::to_string(j) + " must be followed by its partner");
                const Complex a = eigenvalues_(j), b = eigenvalues_(j + 1);
                if (std::abs(b - std::conj(a)) > 1e-10 * std::max(std::abs(a), 1e-300))
                    throw StructuralError("pair_map: eigenvalues of pair " + std::to_string(j) + " are not conjugate");
                const double mode_scale = std::max(modes_.col(j).norm(), 1e-300);
                if ((modes_.col(j + 1) - modes_.col(j).conjugate()).norm() > 1e-10 * mode_scale)
                    throw StructuralError("pair_map: modes of pair " + std::to_string(j) + " are not conjugate");
                break;
            }
            case PairRole::follow:
                if (t.partner != j - 1 || j == 0 || pair_map_[static_cast<std::size_t>(j - 1)].role != PairRole::lead)
                    throw StructuralError("pair_map: follow column " + std::to_string(j) + " without preceding lead");
                break;
            }
        }
    }

private:
    VectorXcd eigenvalues_;
    MatrixXcd modes_;
    std::vector<PairTag> pair_map_;
};

enum class BlockPart { real, re, im };

struct BlockTag {
    Index complex_column = 0;
    BlockPart part = BlockPart::real;
};

struct RealBlockModel {
    MatrixXd dynamics;  ///< m x m block diagonal
    MatrixXd modes;     ///< n x m
    std::vector<BlockTag> block_map;

    Index n() const { return modes.rows(); }
    Index m() const { return modes.cols(); }
};

/// Converts a conjugate-symmetric complex coefficient vector to real-block coordinates.
inline VectorXd to_real_coefficients(const ReducedModel& model, const VectorXcd& z) {
    if (!model.is_conjugate_symmetric(z, 1e-10)) throw ArgumentError("coefficients are not conjugate-symmetric");
    VectorXd c(model.m());
    for (Index j = 0; j < model.m(); ++j) {
        switch (model.pair_map()[static_cast<std::size_t>(j)].role) {
        case PairRole::real: c(j) = z(j).real(); break;
        case PairRole::lead: c(j) = std::sqrt(2.0) * z(j).real(); break;
        case PairRole::follow: c(j) = std::sqrt(2.0) * z(j - 1).imag(); break;
        }
    }
    return c;
}

inline VectorXcd to_complex_coefficients(const ReducedModel& model, const VectorXd& c) {
    if (c.size() != model.m()) throw ArgumentError("coefficient size mismatch");
    VectorXcd z(model.m());
    for (Index j = 0; j < model.m(); ++j) {
        switch (model.pair_map()[static_cast<std::size_t>(j)].role) {
        case PairRole::real: z(j) = Complex(c(j), 0.0); break;
        case PairRole::lead: z(j) = Complex(c(j), c(j + 1)) / std::sqrt(2.0); break;
        case PairRole::follow: z(j) = std::conj(z(j - 1)); break;
        }
    }
    return z;
}

/// Snapshot data, one column per sample time.
struct SnapshotMatrix {
    MatrixXd data;
    double dt = 1.0;
    std::shared_ptr<const Geometry> grid;

    Index n() const { return data.rows(); }
    Index steps() const { return data.cols(); }

    void validate() const {
        if (data.rows() < 1 || data.cols() < 1) throw ArgumentError("snapshots: empty data");
        if (!data.allFinite()) throw ArgumentError("snapshots: non-finite entries");
        if (!(dt > 0.0)) throw ArgumentError("snapshots: dt must be > 0");
    }
};

struct TruncationResult {
    ReducedModel model;
    Index requested_rank = 0;
    bool rank_adjusted = false;  ///< true when a conjugate pair would have been split
};

/// Leading-modulus spectral truncation of a known diagonalizable system.
inline TruncationResult spectral_truncate(const FullModel& full, Index rank) {
    full.validate();
    if (rank < 1) throw ArgumentError("spectral_truncate: rank must be >= 1");
    if (rank > full.n()) throw ArgumentError("spectral_truncate: rank exceeds state dimension");

    Eigen::EigenSolver<MatrixXd> es(full.A, true);
    if (es.info() != Eigen::Success) throw DiagnosticError("spectral_truncate: eigensolver failed");
    MatrixXcd vectors = es.eigenvectors();
    for (Index j = 0; j < vectors.cols(); ++j) vectors.col(j).normalize();
    const auto sv = Eigen::JacobiSVD<MatrixXcd>(vectors).singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : kInfinity;
    if (!(cond < 1e12))
        throw DiagnosticError("spectral_truncate: A is not numerically diagonalizable (eigenvector condition " +
                              std::to_string(cond) + ")");

    const ReducedModel all = ReducedModel::from_spectrum(es.eigenvalues(), vectors);
    TruncationResult out{all.truncated(rank), rank, false};
    out.rank_adjusted = out.model.m() != rank;
    return out;
}

/// Exact DMD (Tu et al. style) at rank `rank`; modes have unit 2-norm.
inline ReducedModel fit_dmd(const SnapshotMatrix& snaps, Index rank) {
    snaps.validate();
    if (rank < 1) throw ArgumentError("fit_dmd: rank must be >= 1");
    const Index T = snaps.steps();
    if (T < rank + 1) throw ArgumentError("fit_dmd: need at least rank+1 snapshots");
    if (rank > snaps.n()) throw ArgumentError("fit_dmd: rank exceeds state dimension");

    const MatrixXd X = snaps.data.leftCols(T - 1);
    const MatrixXd Y = snaps.data.rightCols(T - 1);
    Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    const Index achievable = linalg::numerical_rank(sv, 1e-12);
    if (achievable < rank)
        throw DegenerateRankError("fit_dmd: snapshot data has numerical rank " + std::to_string(achievable) +
                                      " < requested rank " + std::to_string(rank),
                                  achievable);

    const MatrixXd U = svd.matrixU().leftCols(rank);
    const MatrixXd V = svd.matrixV().leftCols(rank);
    const VectorXd inv_s = sv.head(rank).cwiseInverse();
    const MatrixXd YVS = Y * V * inv_s.asDiagonal();
    const MatrixXd reduced = U.transpose() * YVS;

    Eigen::EigenSolver<MatrixXd> es(reduced, true);
    if (es.info() != Eigen::Success) throw DiagnosticError("fit_dmd: eigensolver failed");
    MatrixXcd modes = YVS.cast<Complex>() * es.eigenvectors();
    const double floor = 1e-12 * std::max(Y.norm(), 1e-300);
    for (Index j = 0; j < rank; ++j) {
        // exact modes vanish for zero eigenvalues; use the projected mode there
        if (modes.col(j).norm() <= floor) modes.col(j) = U.cast<Complex>() * es.eigenvectors().col(j);
    }
    return ReducedModel::from_spectrum(es.eigenvalues(), modes);
}

/// Real block-diagonal form of a canonical complex model (see file header).
inline RealBlockModel to_real_blocks(const ReducedModel& model) {
    model.validate();
    const Index m = model.m();
    RealBlockModel out;
    out.dynamics = MatrixXd::Zero(m, m);
    out.modes.resize(model.n(), m);
    out.block_map.resize(static_cast<std::size_t>(m));
    const double r2 = std::sqrt(2.0);
    for (Index j = 0; j < m; ++j) {
        const auto& tag = model.pair_map()[static_cast<std::size_t>(j)];
        const Complex lam = model.eigenvalues()(j);
        if (tag.role == PairRole::real) {
            out.dynamics(j, j) = lam.real();
            out.modes.col(j) = model.modes().col(j).real();
            out.block_map[static_cast<std::size_t>(j)] = {j, BlockPart::real};
        } else if (tag.role == PairRole::lead) {
            out.dynamics(j, j) = lam.real();
            out.dynamics(j, j + 1) = -lam.imag();
            out.dynamics(j + 1, j) = lam.imag();
            out.dynamics(j + 1, j + 1) = lam.real();
            out.modes.col(j) = r2 * model.modes().col(j).real();
            out.modes.col(j + 1) = -r2 * model.modes().col(j).imag();
            out.block_map[static_cast<std::size_t>(j)] = {j, BlockPart::re};
            out.block_map[static_cast<std::size_t>(j + 1)] = {j, BlockPart::im};
        }
    }
    return out;
}

/// Coefficient and field trajectories of a simulated real-block model.
struct SimulatedSeries {
    MatrixXd coefficients;  ///< m x steps
    MatrixXd fields;        ///< n x steps
};

/// Iterates c_{t+1} = A c_t + w_t, w_t ~ N(0, qI), emitting x_t = modes c_t for t = 0..steps-1.
inline SimulatedSeries simulate_real(const RealBlockModel& model, const VectorXd& c0, Index steps, double q,
                                     std::uint64_t seed) {
    if (steps < 1) throw ArgumentError("simulate: steps must be >= 1");
    if (c0.size() != model.m()) throw ArgumentError("simulate: initial coefficient size mismatch");
    if (!(q >= 0.0)) throw ArgumentError("simulate: q must be >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(q);
    SimulatedSeries out{MatrixXd(model.m(), steps), MatrixXd(model.n(), steps)};
    VectorXd c = c0;
    for (Index t = 0; t < steps; ++t) {
        out.coefficients.col(t) = c;
        out.fields.col(t) = model.modes * c;
        VectorXd next = model.dynamics * c;
        if (sd > 0.0)
            for (Index i = 0; i < next.size(); ++i) next(i) += sd * normal(rng);
        c = std::move(next);
    }
    return out;
}

/// Forward model z_{t+1} = Lambda z_t + w_t with conjugate-symmetric disturbances;
/// column t of the result is Re(Psi z_t). Deterministic for a fixed seed.
inline SnapshotMatrix simulate(const ReducedModel& model, const VectorXcd& z0, Index steps, const NoiseSpec& noise,
                               std::uint64_t seed, double dt = 1.0) {
    noise.validate();
    if (!model.is_conjugate_symmetric(z0)) throw ArgumentError("simulate: z0 must be conjugate-symmetric");
    const RealBlockModel real = to_real_blocks(model);
    SimulatedSeries series = simulate_real(real, to_real_coefficients(model, z0), steps, noise.q, seed);
    return SnapshotMatrix{std::move(series.fields), dt, nullptr};
}

}  // namespace mobsense
