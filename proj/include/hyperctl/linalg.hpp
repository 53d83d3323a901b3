#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace hyperctl {

/// Inverse of a symmetric positive definite matrix via Cholesky.
/// Throws std::invalid_argument when the factorization detects a non-PD input.
inline Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("invert_spd: matrix must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("invert_spd: matrix is not positive definite");
  }
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

/// Solves m * x = rhs for SPD m.
inline Eigen::VectorXd solve_spd(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_spd: matrix is not positive definite");
  }
  return llt.solve(rhs);
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

/// Symmetric PSD square root by eigen-factorization. Eigenvalues slightly
/// below zero from roundoff are clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  if (es.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: eigen decomposition failed");
  Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

inline double min_eigenvalue_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Rank of the controllability matrix (B  AB  ...  A^{n-1}B).
inline int controllability_rank(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n) {
    throw std::invalid_argument("controllability_rank: dimension mismatch");
  }
  Eigen::MatrixXd ctrl(n, n * b.cols());
  ctrl.leftCols(b.cols()) = b;
  for (Eigen::Index i = 1; i < n; ++i) {
    ctrl.middleCols(b.cols() * i, b.cols()) = a * ctrl.middleCols(b.cols() * (i - 1), b.cols());
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ctrl);
  return static_cast<int>(qr.rank());
}

inline bool is_controllable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return controllability_rank(a, b) == a.rows();
}

/// Solution of the discrete Lyapunov equation S = A S A' + Q for Schur A,
/// computed by the doubling iteration S_{k+1} = S_k + A_k S_k A_k',
/// A_{k+1} = A_k^2.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  Eigen::MatrixXd s = symmetrize(q);
  Eigen::MatrixXd ak = a;
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::MatrixXd increment = ak * s * ak.transpose();
    s = symmetrize(s + increment);
    ak = ak * ak;
    if (increment.cwiseAbs().maxCoeff() < 1e-16 * scale && ak.cwiseAbs().maxCoeff() < 1e-12) {
      return s;
    }
  }
  throw std::runtime_error("solve_lyapunov: no convergence (is the matrix Schur?)");
}

}  // namespace hyperctl
