#pragma once
// Constant (one-point) generalized geometry: generalized complex structures
// on R^{2n} + dual, pure spinor lines e^{b - i omega}, and the pair of
// isotropic frames attached to a generalized Kaehler pair.
//
// Matrix layout: a generalized vector is a column of size 4n, vector part
// first, covector part second. The symmetric pairing in this layout is
// P = [[0, I],[I, 0]]/2 and structures satisfy J^T P J = P.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gk/multivector.hpp"

namespace gk {

struct GeneralizedComplexStructure {
  int n = 1;
  Eigen::MatrixXd J;  // 4n x 4n, J^2 = -id, pairing-orthogonal
};

Eigen::MatrixXd pairing_matrix(int n);

// Largest violation of J^2 = -id and J^T P J = P.
double gcs_residual(const GeneralizedComplexStructure& S);
void validate(const GeneralizedComplexStructure& S, double tol = 1e-12);

// Diagonal structure induced by an honest complex structure J on R^{2n}.
GeneralizedComplexStructure gcs_from_complex_structure(const Eigen::MatrixXd& Jc);

// Off-diagonal structure of a symplectic form (entries W_jk = omega(d_j, d_k)),
// conjugated by the b-field transform when b is nonzero.
GeneralizedComplexStructure gcs_from_symplectic(const Eigen::MatrixXd& omega,
                                                const Eigen::MatrixXd& b);

// Basis of the -i eigenspace L_J, as columns of a 4n x 2n matrix.
Eigen::MatrixXcd isotropic_basis(const GeneralizedComplexStructure& S);

struct PureSpinor {
  int n = 1;
  Eigen::MatrixXd b, omega;  // antisymmetric 2n x 2n coefficient matrices
  Multivector psi, psibar;   // e^{b - i omega}, e^{b + i omega} (wedge exp)
};

// sum_{j<k} W_jk theta^j theta^k and its truncated wedge exponential.
Multivector two_form_to_mv(int n, const Eigen::MatrixXd& W);
Multivector wedge_exp(const Multivector& two_form);

PureSpinor make_pure_spinor(const Eigen::MatrixXd& b, const Eigen::MatrixXd& omega);

cx spinor_norm(const PureSpinor& sp);  // <psi, bar psi>, the top coefficient

// Kernel of Clifford action on a spinor, as columns of a 4n x k matrix.
Eigen::MatrixXcd annihilator(const Multivector& spinor);

struct GeneralizedKaehlerPair {
  GeneralizedComplexStructure J1, J2;
  PureSpinor sp;                 // spinor line of J2
  Eigen::MatrixXcd frame_plus;   // 4n x n, <e_i, bar e_j> = +delta_ij
  Eigen::MatrixXcd frame_minus;  // 4n x n, <e_i, bar e_j> = -delta_ij
};

// Validates commutation, spinor compatibility and metric positivity, then
// splits L_{J1} along the eigenspaces of -J1 J2 and normalizes both halves.
GeneralizedKaehlerPair gk_pair(const GeneralizedComplexStructure& J1,
                               const GeneralizedComplexStructure& J2, const PureSpinor& sp);

GeneralizedVector column_gv(const Eigen::MatrixXcd& F, int j);

// Combined frame elements u_k = e_k^+ + e_k^-, w_k = e_k^+ - e_k^-.
GeneralizedVector frame_u(const GeneralizedKaehlerPair& gk, int k);
GeneralizedVector frame_w(const GeneralizedKaehlerPair& gk, int k);

// Coefficient c with pi_{U^{-n}}(x) = c psi, via pairing against bar psi.
cx project_Uminus_n(const Multivector& x, const PureSpinor& sp);
Eigen::MatrixXcd project_Uminus_n(const MvMatrix& x, const PureSpinor& sp);

// b-field transforms (b2 antisymmetric). Spinors wedge with e^{b2}; vectors
// pick up i_v b2; structures conjugate by the shear matrix E_b.
Eigen::MatrixXd b_shear(const Eigen::MatrixXd& b2);
Multivector b_transform(const Multivector& a, const Eigen::MatrixXd& b2);
GeneralizedVector b_transform(const GeneralizedVector& e, const Eigen::MatrixXd& b2);
PureSpinor b_transform(const PureSpinor& sp, const Eigen::MatrixXd& b2);
GeneralizedComplexStructure b_transform(const GeneralizedComplexStructure& S,
                                        const Eigen::MatrixXd& b2);
GeneralizedKaehlerPair b_transform(const GeneralizedKaehlerPair& gk, const Eigen::MatrixXd& b2);

// Flat standard structures and a seeded deformation generator (linear change
// of frame plus optional b-transform; stays in the valid region for moderate
// amplitude).
GeneralizedKaehlerPair standard_kaehler(int n);
GeneralizedKaehlerPair random_gk_pair(int n, std::uint32_t seed, double amplitude = 0.15,
                                      bool with_b = true);

}  // namespace gk
