#include "gk/structures.hpp"

#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace gk {

namespace {

// Unpack a multivector into its dense coefficient column (size 2^{2n}).
Eigen::VectorXcd dense_coeffs(const Multivector& a) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(1 << (2 * a.dim_n()));
  for (const auto& [m, c] : a.terms()) out[m] = c;
  return out;
}

GeneralizedVector basis_gv(int n, int j) {
  GeneralizedVector e(n);
  if (j < 2 * n)
    e.v[j] = 1.0;
  else
    e.xi[j - 2 * n] = 1.0;
  return e;
}

GeneralizedVector from_column(const Eigen::VectorXcd& col) {
  int twon = static_cast<int>(col.size()) / 2;
  return GeneralizedVector(col.head(twon), col.tail(twon));
}

// Columns spanning the range of M, via SVD with a fixed relative cutoff.
Eigen::MatrixXcd range_basis(const Eigen::MatrixXcd& M, int expected_rank) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-8 * sv[0]) ++rank;
  if (rank != expected_rank) throw std::runtime_error("range_basis: unexpected rank");
  return svd.matrixU().leftCols(rank);
}

// Rescale columns of X so that X^T P conj(X) = sign * id. The Gram matrix is
// Hermitian and sign-definite when X spans one half of the splitting.
Eigen::MatrixXcd pairing_orthonormalize(const Eigen::MatrixXcd& X, const Eigen::MatrixXd& P,
                                        double sign) {
  Eigen::MatrixXcd G = X.transpose() * P * X.conjugate();
  Eigen::MatrixXcd M = sign * G.transpose();  // Hermitian positive definite
  Eigen::LLT<Eigen::MatrixXcd> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("frame normalization: Gram matrix not definite");
  Eigen::MatrixXcd L = llt.matrixL();
  // A = L^{-dagger} solves A^T G conj(A) = sign * id.
  Eigen::MatrixXcd A =
      L.adjoint().triangularView<Eigen::Upper>().solve(Eigen::MatrixXcd::Identity(X.cols(), X.cols()));
  return X * A;
}

}  // namespace

Eigen::MatrixXd pairing_matrix(int n) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  P.block(0, 2 * n, 2 * n, 2 * n) = 0.5 * Eigen::MatrixXd::Identity(2 * n, 2 * n);
  P.block(2 * n, 0, 2 * n, 2 * n) = 0.5 * Eigen::MatrixXd::Identity(2 * n, 2 * n);
  return P;
}

double gcs_residual(const GeneralizedComplexStructure& S) {
  const int d = 4 * S.n;
  if (S.J.rows() != d || S.J.cols() != d) throw std::invalid_argument("gcs: bad matrix size");
  Eigen::MatrixXd P = pairing_matrix(S.n);
  double r1 = (S.J * S.J + Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  double r2 = (S.J.transpose() * P * S.J - P).cwiseAbs().maxCoeff();
  return std::max(r1, r2);
}

void validate(const GeneralizedComplexStructure& S, double tol) {
  if (gcs_residual(S) > tol)
    throw std::runtime_error("generalized complex structure fails J^2 = -id or pairing check");
}

GeneralizedComplexStructure gcs_from_complex_structure(const Eigen::MatrixXd& Jc) {
  const int twon = static_cast<int>(Jc.rows());
  if (Jc.cols() != twon || twon % 2 != 0)
    throw std::invalid_argument("complex structure: need even square matrix");
  GeneralizedComplexStructure S;
  S.n = twon / 2;
  S.J = Eigen::MatrixXd::Zero(2 * twon, 2 * twon);
  S.J.topLeftCorner(twon, twon) = Jc;
  S.J.bottomRightCorner(twon, twon) = -Jc.transpose();
  validate(S);
  return S;
}

GeneralizedComplexStructure gcs_from_symplectic(const Eigen::MatrixXd& omega,
                                                const Eigen::MatrixXd& b) {
  const int twon = static_cast<int>(omega.rows());
  if (omega.cols() != twon || twon % 2 != 0)
    throw std::invalid_argument("symplectic structure: need even square matrix");
  // omega_hat v = i_v omega; with entries W_jk = omega(d_j, d_k) this is W^T.
  Eigen::MatrixXd what = omega.transpose();
  GeneralizedComplexStructure S;
  S.n = twon / 2;
  S.J = Eigen::MatrixXd::Zero(2 * twon, 2 * twon);
  S.J.topRightCorner(twon, twon) = -what.inverse();
  S.J.bottomLeftCorner(twon, twon) = what;
  validate(S, 1e-10);
  if (b.cwiseAbs().maxCoeff() > 0.0) S = b_transform(S, b);
  return S;
}

Eigen::MatrixXcd isotropic_basis(const GeneralizedComplexStructure& S) {
  const int d = 4 * S.n;
  Eigen::MatrixXcd PL =
      0.5 * (Eigen::MatrixXcd::Identity(d, d) + cx(0, 1) * S.J.cast<cx>());
  return range_basis(PL, 2 * S.n);
}

Multivector two_form_to_mv(int n, const Eigen::MatrixXd& W) {
  if (W.rows() != 2 * n || W.cols() != 2 * n)
    throw std::invalid_argument("two_form_to_mv: bad matrix size");
  if ((W + W.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("two_form_to_mv: matrix not antisymmetric");
  Multivector out(n);
  for (int j = 0; j < 2 * n; ++j)
    for (int k = j + 1; k < 2 * n; ++k)
      if (W(j, k) != 0.0) out.add_term((1u << j) | (1u << k), W(j, k));
  return out;
}

Multivector wedge_exp(const Multivector& two_form) {
  const int n = two_form.dim_n();
  Multivector acc = Multivector::scalar(n, 1.0);
  Multivector pw = Multivector::scalar(n, 1.0);
  double fact = 1.0;
  for (int k = 1; k <= n; ++k) {
    pw = wedge(pw, two_form);
    fact *= k;
    acc += (1.0 / fact) * pw;
  }
  return acc;
}

PureSpinor make_pure_spinor(const Eigen::MatrixXd& b, const Eigen::MatrixXd& omega) {
  const int twon = static_cast<int>(omega.rows());
  PureSpinor sp;
  sp.n = twon / 2;
  sp.b = b;
  sp.omega = omega;
  if (std::abs(omega.determinant()) < 1e-12)
    throw std::invalid_argument("pure spinor: omega must be nondegenerate");
  Multivector B = two_form_to_mv(sp.n, b);
  Multivector W = two_form_to_mv(sp.n, omega);
  sp.psi = wedge_exp(B - cx(0, 1) * W);
  sp.psibar = wedge_exp(B + cx(0, 1) * W);
  return sp;
}

cx spinor_norm(const PureSpinor& sp) { return spin_pair(sp.psi, sp.psibar); }

Eigen::MatrixXcd annihilator(const Multivector& spinor) {
  const int n = spinor.dim_n();
  Eigen::MatrixXcd A(1 << (2 * n), 4 * n);
  for (int j = 0; j < 4 * n; ++j) A.col(j) = dense_coeffs(clifford_act(basis_gv(n, j), spinor));
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(A);
  lu.setThreshold(1e-10);
  return lu.kernel();
}

GeneralizedKaehlerPair gk_pair(const GeneralizedComplexStructure& J1,
                               const GeneralizedComplexStructure& J2, const PureSpinor& sp) {
  validate(J1);
  validate(J2);
  if (J1.n != J2.n || sp.n != J1.n) throw std::invalid_argument("gk_pair: dimension mismatch");
  const int n = J1.n, d = 4 * n;

  if ((J1.J * J2.J - J2.J * J1.J).cwiseAbs().maxCoeff() > 1e-12)
    throw std::runtime_error("gk_pair: structures do not commute");

  // The spinor must span the (-i)-eigenspace line of J2: every element of
  // L_{J2} has to annihilate it.
  Eigen::MatrixXcd L2 = isotropic_basis(J2);
  for (int j = 0; j < L2.cols(); ++j) {
    Multivector act = clifford_act(from_column(L2.col(j)), sp.psi);
    if (act.norm1() > 1e-9 * (1.0 + sp.psi.norm1()))
      throw std::runtime_error("gk_pair: spinor is not the J2 spinor line");
  }

  Eigen::MatrixXd Ghat = -J1.J * J2.J;
  if ((Ghat * Ghat - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::runtime_error("gk_pair: -J1 J2 is not an involution");
  Eigen::MatrixXd P = pairing_matrix(n);
  Eigen::MatrixXd PG = P * Ghat;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (PG + PG.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("gk_pair: generalized metric not positive");

  GeneralizedKaehlerPair gk{J1, J2, sp, {}, {}};
  Eigen::MatrixXcd L1 = isotropic_basis(J1);
  for (double sign : {+1.0, -1.0}) {
    Eigen::MatrixXcd Ppm =
        0.5 * (Eigen::MatrixXcd::Identity(d, d) + sign * Ghat.cast<cx>());
    Eigen::MatrixXcd half = range_basis(Ppm * L1, n);
    Eigen::MatrixXcd F = pairing_orthonormalize(half, P, sign);
    // Internal consistency: the normalized Gram must be exactly +-delta.
    Eigen::MatrixXcd G = F.transpose() * P * F.conjugate();
    if ((G - sign * Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
      throw std::runtime_error("gk_pair: frame normalization failed");
    (sign > 0 ? gk.frame_plus : gk.frame_minus) = F;
  }
  return gk;
}

GeneralizedVector column_gv(const Eigen::MatrixXcd& F, int j) { return from_column(F.col(j)); }

GeneralizedVector frame_u(const GeneralizedKaehlerPair& gk, int k) {
  return from_column(gk.frame_plus.col(k) + gk.frame_minus.col(k));
}

GeneralizedVector frame_w(const GeneralizedKaehlerPair& gk, int k) {
  return from_column(gk.frame_plus.col(k) - gk.frame_minus.col(k));
}

cx project_Uminus_n(const Multivector& x, const PureSpinor& sp) {
  return spin_pair(x, sp.psibar) / spinor_norm(sp);
}

Eigen::MatrixXcd project_Uminus_n(const MvMatrix& x, const PureSpinor& sp) {
  return spin_pair_matrix(x, sp.psibar) / spinor_norm(sp);
}

Eigen::MatrixXd b_shear(const Eigen::MatrixXd& b2) {
  const int twon = static_cast<int>(b2.rows());
  if ((b2 + b2.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("b_transform: matrix not antisymmetric");
  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(2 * twon, 2 * twon);
  // Conjugating the Clifford action by e^{b2}^ sends i_v to i_v - (i_v b2)^,
  // so the covector row picks up -b2^T v (= +b2 v by antisymmetry). The
  // opposite sign would pair the shear with e^{-b2} on spinors instead.
  E.block(twon, 0, twon, twon) = -b2.transpose();
  return E;
}

Multivector b_transform(const Multivector& a, const Eigen::MatrixXd& b2) {
  return wedge(wedge_exp(two_form_to_mv(a.dim_n(), b2)), a);
}

GeneralizedVector b_transform(const GeneralizedVector& e, const Eigen::MatrixXd& b2) {
  return GeneralizedVector(e.v, e.xi - b2.transpose().cast<cx>() * e.v);
}

PureSpinor b_transform(const PureSpinor& sp, const Eigen::MatrixXd& b2) {
  return make_pure_spinor(sp.b + b2, sp.omega);
}

GeneralizedComplexStructure b_transform(const GeneralizedComplexStructure& S,
                                        const Eigen::MatrixXd& b2) {
  Eigen::MatrixXd E = b_shear(b2);
  GeneralizedComplexStructure out;
  out.n = S.n;
  Eigen::MatrixXd Einv = E;
  Einv.block(2 * S.n, 0, 2 * S.n, 2 * S.n) *= -1.0;
  out.J = E * S.J * Einv;
  return out;
}

GeneralizedKaehlerPair b_transform(const GeneralizedKaehlerPair& gk, const Eigen::MatrixXd& b2) {
  GeneralizedKaehlerPair out;
  out.J1 = b_transform(gk.J1, b2);
  out.J2 = b_transform(gk.J2, b2);
  out.sp = b_transform(gk.sp, b2);
  // Frames transform covariantly by the shear; pairing is preserved exactly,
  // so no renormalization is needed and test comparisons stay aligned.
  Eigen::MatrixXcd E = b_shear(b2).cast<cx>();
  out.frame_plus = E * gk.frame_plus;
  out.frame_minus = E * gk.frame_minus;
  return out;
}

GeneralizedKaehlerPair standard_kaehler(int n) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Eigen::MatrixXd Jc = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    W(2 * k, 2 * k + 1) = 1.0;
    W(2 * k + 1, 2 * k) = -1.0;
    // J d/dx = d/dy on each coordinate pair, i.e. J dz = i dz.
    Jc(2 * k + 1, 2 * k) = 1.0;
    Jc(2 * k, 2 * k + 1) = -1.0;
  }
  PureSpinor sp = make_pure_spinor(Eigen::MatrixXd::Zero(2 * n, 2 * n), W);
  return gk_pair(gcs_from_complex_structure(Jc), gcs_from_symplectic(W, sp.b), sp);
}

GeneralizedKaehlerPair random_gk_pair(int n, std::uint32_t seed, double amplitude, bool with_b) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int twon = 2 * n;

  Eigen::MatrixXd T = Eigen::MatrixXd::Identity(twon, twon);
  for (int i = 0; i < twon; ++i)
    for (int j = 0; j < twon; ++j) T(i, j) += amplitude * u(rng);

  // Push the standard Kaehler data through the frame change C = diag(T, T^{-T})
  // and optionally a b-transform. Both preserve the pairing, so the result is
  // again a valid pair for moderate amplitudes.
  GeneralizedKaehlerPair base = standard_kaehler(n);
  Eigen::MatrixXd Tinv = T.inverse();
  Eigen::MatrixXd Wnew = Tinv.transpose() * base.sp.omega * Tinv;
  Eigen::MatrixXd Jc = base.J1.J.topLeftCorner(twon, twon);
  Eigen::MatrixXd JcNew = T * Jc * Tinv;

  PureSpinor sp = make_pure_spinor(Eigen::MatrixXd::Zero(twon, twon), Wnew);
  GeneralizedKaehlerPair out =
      gk_pair(gcs_from_complex_structure(JcNew), gcs_from_symplectic(Wnew, sp.b), sp);

  if (with_b) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(twon, twon);
    for (int i = 0; i < twon; ++i)
      for (int j = i + 1; j < twon; ++j) {
        b(i, j) = amplitude * u(rng);
        b(j, i) = -b(i, j);
      }
    out = b_transform(out, b);
  }
  return out;
}

}  // namespace gk
