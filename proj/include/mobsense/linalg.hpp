#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>

namespace mobsense {

using Index = Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

namespace linalg {

/// Singular values in descending order. Empty for an empty matrix.
inline VectorXd singular_values(const MatrixXd& a) {
    if (a.rows() == 0 || a.cols() == 0) return VectorXd();
    if (std::min(a.rows(), a.cols()) <= 16) return Eigen::JacobiSVD<MatrixXd>(a).singularValues();
    return Eigen::BDCSVD<MatrixXd>(a).singularValues();
}

/// Number of singular values above `rel_tol * sigma_max`.
inline Index numerical_rank(const VectorXd& sv, double rel_tol) {
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double cutoff = rel_tol * sv(0);
    return static_cast<Index>(std::count_if(sv.data(), sv.data() + sv.size(), [&](double s) { return s > cutoff; }));
}

inline Index numerical_rank(const MatrixXd& a, double rel_tol) {
    return numerical_rank(singular_values(a), rel_tol);
}

inline void symmetrize(MatrixXd& s) { s = 0.5 * (s + s.transpose()).eval(); }

/// Eigenvalues of a symmetric matrix, ascending.
inline VectorXd sym_eigenvalues(const MatrixXd& s) {
    return Eigen::SelfAdjointEigenSolver<MatrixXd>(s, Eigen::EigenvaluesOnly).eigenvalues();
}

/// Principal square root of a symmetric PSD matrix (negative roundoff clipped).
inline MatrixXd sym_sqrt(const MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
    const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline double spectral_radius(const MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::EigenSolver<MatrixXd>(a, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace linalg
}  // namespace mobsense
