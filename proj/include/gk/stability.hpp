#pragma once
// Subbundle analysis over a flat generalized Kaehler background: projector
// residuals, second fundamental forms expanded in the combined isotropic
// frame, the curvature decomposition across a projector, slope comparisons,
// and the parallel-section identity suite.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gk/bundle.hpp"
#include "gk/grid.hpp"
#include "gk/structures.hpp"

namespace gk {

struct SubbundleProjector {
  MatrixField pi;  // r x r, pointwise h-selfadjoint idempotent
  int rank = 0;    // common pointwise rank
};

// Validates pi - pi^2, pi - pi^{*h} and constant pointwise rank, then returns
// the projector with its rank filled in. Throws when a residual exceeds tol.
SubbundleProjector make_projector(const MatrixField& pi, const MatrixField& H,
                                  double tol = 1e-6);

struct WeakHolomorphyResidual {
  double idempotency = 0.0;  // L2 norm of pi - pi^2
  double hermiticity = 0.0;  // L2 norm of pi - pi^{*h}
  double holomorphy = 0.0;   // L2 norm of (1-pi) dbar pi over the A01 and Phi slots
};

WeakHolomorphyResidual weak_holomorphy_residual(const Spectral& sp, const MatrixField& pi,
                                                const GeneralizedHolomorphicStructure& hs,
                                                const MatrixField& H);

// Components of (1-pi) D pi along the combined frame {u_k, w_k} (u-block
// first), extracted with the dual pairing u <-> wbar/2, w <-> ubar/2. The
// conjugate-frame components of the h-adjoint tensor carry a minus sign, so
// h(H_i s, s') + h(s, HPerp_i s') = 0 pointwise.
struct SecondFundamentalForm {
  std::vector<MatrixField> Hs;      // 2n fields, Hom(S, Sperp) compressed
  std::vector<MatrixField> HsPerp;  // 2n fields, Hom(Sperp, S) compressed
  ScalarField energy_density;       // 2 sum_i tr(H_i^{*h} H_i), real
};

SecondFundamentalForm second_fundamental_form(const Spectral& sp,
                                              const GeneralizedKaehlerPair& gkp,
                                              const SubbundleProjector& sub,
                                              const GeneralizedConnection& conn,
                                              const MatrixField& H);

// Both sides of tr(pi K pi) = tr K^S + ||H^S||^2: the left from the ambient
// mean curvature, the right from the block-diagonalized connection (which
// preserves S and Sperp exactly) plus the frame-summed energy density.
struct SubcurvatureReport {
  ScalarField lhs, rhs;  // real scalar fields
  double sup_residual = 0.0;
};

SubcurvatureReport subcurvature_identity(const Spectral& sp, const GeneralizedKaehlerPair& gkp,
                                         const SubbundleProjector& sub,
                                         const GeneralizedConnection& conn,
                                         const MatrixField& H);

struct SlopeReport {
  double mu_E = 0.0;
  double mu_S = 0.0;
  double energy = 0.0;        // (1/2pi) integral of the energy density
  double gap_residual = 0.0;  // |(1/2pi p) int tr(pi K pi) - mu_S - energy/p|
  bool destabilizing = false;
};

// A constant Hermitian offset is subtracted from the curvature before the
// slope integrals; engineered destabilizer runs carry their source term there.
SlopeReport slope_inequality(const Spectral& sp, const GeneralizedKaehlerPair& gkp,
                             const SubbundleProjector& sub, const GeneralizedConnection& conn,
                             const MatrixField& H,
                             const Eigen::MatrixXcd& offset = Eigen::MatrixXcd());

struct IdentityRow {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct IdentitySuiteReport {
  std::vector<IdentityRow> rows;
  bool all_pass = true;
  void add(const std::string& name, double residual, double tolerance);
};

// Anticommutator curvature identity for the pair of ordinary connections
// D^A +- i omega(V), the form-valued metric Leibniz rule, parallel-section
// energies, and non-negativity of the two quadratic density forms. A nonzero
// b on the background is removed by the joint inverse b-transform first.
IdentitySuiteReport vanishing_identity_suite(const Spectral& sp,
                                             const GeneralizedKaehlerPair& gkp,
                                             const GeneralizedConnection& conn,
                                             const MatrixField& H, const MatrixField& s);

// Smallest-residual section of the dbar operator (A01 and Phi slots) under
// the unit L2 constraint, via a dense eigensolve of the normal operator.
// Desk scale: the grid-times-rank dimension drives a dense Hermitian solve.
struct SectionSearch {
  double min_residual = 0.0;  // sqrt of the smallest Rayleigh quotient
  MatrixField s;              // r x 1 minimizer field, unit L2 norm
};

SectionSearch holomorphic_section_least_squares(const Spectral& sp,
                                                const GeneralizedHolomorphicStructure& hs);

}  // namespace gk
