#pragma once
// Small dense-matrix helpers used all over: Hermitian functional calculus and
// norms. Everything goes through SelfAdjointEigenSolver; inputs are expected
// to be Hermitian up to roundoff and are symmetrized before decomposing.

#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace gk {

inline Eigen::MatrixXcd hermitize(const Eigen::MatrixXcd& M) {
  return 0.5 * (M + M.adjoint());
}

inline Eigen::MatrixXcd herm_apply(const Eigen::MatrixXcd& M,
                                   const std::function<double(double)>& f) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(M));
  if (es.info() != Eigen::Success) throw std::runtime_error("herm_apply: eigensolver failed");
  Eigen::VectorXd d = es.eigenvalues();
  for (int i = 0; i < d.size(); ++i) d[i] = f(d[i]);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

inline Eigen::MatrixXcd herm_exp(const Eigen::MatrixXcd& M) {
  return herm_apply(M, [](double x) { return std::exp(x); });
}

inline Eigen::MatrixXcd herm_log(const Eigen::MatrixXcd& M) {
  return herm_apply(M, [](double x) {
    if (x <= 0.0) throw std::runtime_error("herm_log: matrix not positive definite");
    return std::log(x);
  });
}

inline Eigen::MatrixXcd herm_sqrt(const Eigen::MatrixXcd& M) {
  return herm_apply(M, [](double x) {
    if (x < 0.0) throw std::runtime_error("herm_sqrt: negative eigenvalue");
    return std::sqrt(x);
  });
}

inline double min_eig(const Eigen::MatrixXcd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(M));
  return es.eigenvalues().minCoeff();
}

// C0-type pointwise norm for Hermitian matrices: largest |eigenvalue|.
inline double max_abs_eig(const Eigen::MatrixXcd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(M));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace gk
