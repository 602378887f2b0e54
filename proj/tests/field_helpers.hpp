#pragma once
// Random band-limited fields for the bundle, solver, and stability tests.
// Keeping the mode content well inside the grid bandwidth makes spectral
// derivatives exact, so identity tests can use tight tolerances.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gk/bundle.hpp"
#include "gk/grid.hpp"
#include "gk/linalg.hpp"

namespace testhelp {

using gk::cx;

// sum over a few random integer modes |m_k| <= max_mode of C exp(i k.x).
inline gk::MatrixField random_matrix_field(const gk::Grid& g, int r, std::mt19937& rng,
                                           int max_mode = 1, double amp = 0.3, int n_modes = 4) {
  std::uniform_int_distribution<int> mode(-max_mode, max_mode);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  gk::MatrixField out(g, Eigen::MatrixXcd::Zero(r, r));
  for (int t = 0; t < n_modes; ++t) {
    std::vector<int> m(g.dims());
    for (int a = 0; a < g.dims(); ++a) m[a] = mode(rng);
    Eigen::MatrixXcd C(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) C(i, j) = amp * cx(u(rng), u(rng));
    for (std::size_t x = 0; x < out.size(); ++x) {
      std::vector<int> idx = g.unflatten(x);
      double phase = 0.0;
      for (int a = 0; a < g.dims(); ++a)
        phase += 2.0 * std::numbers::pi * m[a] * idx[a] / g.N;
      out.v[x] += C * std::exp(cx(0.0, phase));
    }
  }
  return out;
}

inline gk::ScalarField random_scalar_field(const gk::Grid& g, std::mt19937& rng, int max_mode = 1,
                                           double amp = 0.3, bool real = false) {
  gk::MatrixField m = random_matrix_field(g, 1, rng, max_mode, amp);
  gk::ScalarField out(g);
  for (std::size_t x = 0; x < out.size(); ++x)
    out.v[x] = real ? cx(m.v[x](0, 0).real(), 0.0) : m.v[x](0, 0);
  return out;
}

inline gk::MatrixField random_hermitian_field(const gk::Grid& g, int r, std::mt19937& rng,
                                              int max_mode = 1, double amp = 0.2) {
  gk::MatrixField m = random_matrix_field(g, r, rng, max_mode, amp);
  for (auto& M : m.v) M = 0.5 * (M + M.adjoint()).eval();
  return m;
}

// exp of a small random Hermitian field: positive definite, Hermitian, smooth.
inline gk::MatrixField random_metric_field(const gk::Grid& g, int r, std::mt19937& rng,
                                           int max_mode = 1, double amp = 0.2) {
  gk::MatrixField m = random_hermitian_field(g, r, rng, max_mode, amp);
  for (auto& M : m.v) M = gk::herm_exp(M);
  return m;
}

// Identity plus a small Hermitian band-limited field: positive definite with
// exactly finite mode content, so Leibniz identities involving dH are exact on
// coarse grids (an exponential would leak tails past the bandwidth).
inline gk::MatrixField random_metric_field_bandlimited(const gk::Grid& g, int r,
                                                       std::mt19937& rng, int max_mode = 1,
                                                       double amp = 0.05) {
  gk::MatrixField m = random_hermitian_field(g, r, rng, max_mode, amp);
  for (auto& M : m.v) M += Eigen::MatrixXcd::Identity(r, r);
  return m;
}

// Unitary field exp(i H) for Hermitian H. herm_exp would hermitize the skew
// argument i H down to zero, so exponentiate through the eigenbasis of H.
inline gk::MatrixField random_unitary_field(const gk::Grid& g, int r, std::mt19937& rng,
                                            int max_mode = 1, double amp = 0.3) {
  gk::MatrixField m = random_hermitian_field(g, r, rng, max_mode, amp);
  for (auto& M : m.v) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
    Eigen::VectorXcd ph(r);
    for (int i = 0; i < r; ++i) ph(i) = std::exp(cx(0.0, es.eigenvalues()(i)));
    M = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
  }
  return m;
}

// Invertible field id + small band-limited matrix (stays band-limited, unlike
// an exponential, which keeps aliasing out of derivative identities).
inline gk::MatrixField random_invertible_field(const gk::Grid& g, int r, std::mt19937& rng,
                                               int max_mode = 1, double amp = 0.2) {
  gk::MatrixField m = random_matrix_field(g, r, rng, max_mode, amp);
  for (auto& M : m.v) M += Eigen::MatrixXcd::Identity(r, r);
  return m;
}

// Random generalized connection with band-limited components.
inline gk::GeneralizedConnection random_connection(const gk::Grid& g, int r, std::mt19937& rng,
                                                   int max_mode = 1, double amp = 0.3) {
  gk::GeneralizedConnection conn;
  for (int a = 0; a < g.dims(); ++a) {
    conn.A.push_back(random_matrix_field(g, r, rng, max_mode, amp));
    conn.V.push_back(random_matrix_field(g, r, rng, max_mode, amp));
  }
  return conn;
}

// Integrable holomorphic data built from one band-limited scalar potential chi
// and one constant matrix M: A01_k = (dbar_k chi) M, Phi_k = alpha_k + beta_k M.
// Every bracket in the integrability conditions pairs M with itself, so the
// flatness and compatibility residuals vanish exactly with no aliasing, while
// the data still varies over the torus and mixes matrix directions.
inline gk::GeneralizedHolomorphicStructure random_holomorphic_structure(
    const gk::Spectral& sp, int r, std::mt19937& rng, bool with_phi = true, int max_mode = 1,
    double amp = 0.2) {
  const gk::Grid& g = sp.grid();
  gk::ScalarField chi = random_scalar_field(g, rng, max_mode, amp);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXcd M(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) M(i, j) = cx(u(rng), u(rng));
  gk::GeneralizedHolomorphicStructure hs;
  for (int k = 0; k < g.n; ++k) {
    gk::ScalarField dx = sp.partial(chi, 2 * k);
    gk::ScalarField dy = sp.partial(chi, 2 * k + 1);
    gk::MatrixField a01(g);
    for (std::size_t x = 0; x < a01.size(); ++x)
      a01.v[x] = 0.5 * (dx.v[x] + cx(0, 1) * dy.v[x]) * M;
    hs.A01.push_back(a01);
    Eigen::MatrixXcd phi0 = Eigen::MatrixXcd::Zero(r, r);
    if (with_phi) phi0 = cx(u(rng), u(rng)) * Eigen::MatrixXcd::Identity(r, r) +
                         cx(u(rng), u(rng)) * M;
    hs.Phi.push_back(gk::MatrixField(g, phi0));
  }
  return hs;
}

inline double field_max_norm(const gk::MatrixField& f) {
  double worst = 0.0;
  for (const auto& m : f.v) worst = std::max(worst, m.cwiseAbs().maxCoeff());
  return worst;
}

inline double field_diff(const gk::MatrixField& a, const gk::MatrixField& b) {
  double worst = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x)
    worst = std::max(worst, (a.v[x] - b.v[x]).cwiseAbs().maxCoeff());
  return worst;
}

inline double conn_diff(const gk::GeneralizedConnection& a, const gk::GeneralizedConnection& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.A.size(); ++k) {
    worst = std::max(worst, field_diff(a.A[k], b.A[k]));
    worst = std::max(worst, field_diff(a.V[k], b.V[k]));
  }
  return worst;
}

}  // namespace testhelp
