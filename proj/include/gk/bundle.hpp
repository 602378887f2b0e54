#pragma once
// Hermitian bundles over the flat torus, generalized connections D = d + A + V,
// their curvature tensor and mean curvature, degree and slope, the b-field
// action, and canonical connections of generalized holomorphic structures
// (ordinary dbar operator plus a co-Higgs field).
//
// Complex pairing of axes: z^k = x_{2k-1} + i x_{2k}, i.e. zero-based axes
// (2k, 2k+1) per complex direction. All bundles are topologically trivial, so
// every field is a plain matrix field over the grid.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gk/grid.hpp"
#include "gk/structures.hpp"

namespace gk {

struct HermitianBundle {
  int r = 1;
  MatrixField h0;  // reference metric
  MatrixField h;   // working metric
};

HermitianBundle make_bundle(const Grid& g, const MatrixField& h0);
void validate(const HermitianBundle& b, double min_eigenvalue = 1e-12);

struct GeneralizedConnection {
  // Real components per axis: D = d + sum_a A[a] theta^a + sum_k V[k] i_k.
  std::vector<MatrixField> A;  // size 2n
  std::vector<MatrixField> V;  // size 2n
  bool hermitian = false;      // flagged when built against a metric
};

// Largest deviation from metric compatibility: d_a H - H A_a - A_a^dagger H
// per form axis, V^k + (V^k)^{*H} per vector axis.
double hermitian_residual(const Spectral& sp, const GeneralizedConnection& conn,
                          const MatrixField& H);

struct GeneralizedHolomorphicStructure {
  std::vector<MatrixField> A01;  // n entries, the dzbar^k components
  std::vector<MatrixField> Phi;  // n entries, the d/dz_k components
};

// Integrability: dbar^2 = 0 (n >= 2), dbar Phi + [A01, Phi] = 0, [Phi^Phi] = 0.
double holomorphy_residual(const Spectral& sp, const GeneralizedHolomorphicStructure& hs);
void validate(const Spectral& sp, const GeneralizedHolomorphicStructure& hs, double tol = 1e-8);

struct CurvatureData {
  Field<MvMatrix> Fpsi;  // full curvature tensor applied to psi
  MatrixField K;         // mean curvature, h-Hermitian
};

// Complex components of a connection along the standard complex structure.
struct ComplexComponents {
  std::vector<MatrixField> A10, A01;  // n each, dz^k / dzbar^k form parts
  std::vector<MatrixField> V10, V01;  // n each, d/dz_k / d/dzbar_k vector parts
};
ComplexComponents split_connection(const GeneralizedConnection& conn);
GeneralizedConnection assemble_connection(const ComplexComponents& cc);

// H-adjoint S^{*H} = H^{-1} S^dagger H, pointwise.
MatrixField adjoint_h(const MatrixField& S, const MatrixField& H);
Eigen::MatrixXcd adjoint_h(const Eigen::MatrixXcd& S, const Eigen::MatrixXcd& H);

// Complex covariant derivatives d_{z_k} and d_{zbar_k} (plain, no connection).
MatrixField partial_z(const Spectral& sp, const MatrixField& f, int k);
MatrixField partial_zbar(const Spectral& sp, const MatrixField& f, int k);

// Chern connection of (dbar + A01, H) extended by V^{1,0} = Phi and
// V^{0,1} = -Phi^{*H}.
GeneralizedConnection canonical_connection(const Spectral& sp,
                                           const GeneralizedHolomorphicStructure& hs,
                                           const MatrixField& H);

// Canonical connection of h0 f obtained by transforming conn0 directly
// (conjugation formulas), without rebuilding from the holomorphic data.
GeneralizedConnection gauge_transform_metric(const Spectral& sp, const GeneralizedConnection& conn0,
                                             const MatrixField& f, const MatrixField& H0);

// Full curvature tensor F_A psi + d^A(V psi) + (1/2)[V . V] psi and its
// Hermitian-projected U^{-n} coefficient.
CurvatureData curvature(const Spectral& sp, const GeneralizedConnection& conn,
                        const PureSpinor& spinor, const MatrixField& H);

// Projection of an already-computed curvature tensor.
MatrixField mean_curvature(const CurvatureData& cd, const PureSpinor& spinor,
                           const MatrixField& H);

// Same K without materializing the tensor field (used in solver loops).
MatrixField mean_curvature_fast(const Spectral& sp, const GeneralizedConnection& conn,
                                const PureSpinor& spinor, const MatrixField& H);

struct DegreeReport {
  double degree = 0.0;       // (1/2pi) integral of tr K against the volume form
  double mu = 0.0;           // degree / rank
  double lambda = 0.0;       // Einstein constant, 2 pi degree / (rank * volume)
  double lambda_c1 = 0.0;    // same constant recovered from the c1 pairing
  double volume = 0.0;       // integral of i^n <psi, bar psi>
  double c1_imag_defect = 0.0;  // size of the imaginary part discarded in lambda_c1
};

DegreeReport degree_slope(const Spectral& sp, const GeneralizedConnection& conn,
                          const PureSpinor& spinor, const MatrixField& H, int rank);

struct ResidualReport {
  MatrixField field;  // K - lambda id (- offset), h-Hermitian
  double sup_norm = 0.0;
  double l2_norm = 0.0;
};

ResidualReport einstein_residual(const Spectral& sp, const GeneralizedConnection& conn,
                                 const PureSpinor& spinor, const MatrixField& H, double lambda,
                                 const std::optional<Eigen::MatrixXcd>& offset = std::nullopt);

// b-field action on connections: forms fixed, i_k conjugates to i_k - (i_k b)^.
GeneralizedConnection b_transform(const GeneralizedConnection& conn, const Eigen::MatrixXd& b2);

// Frame change s -> g s: A and V conjugate, the metric moves by g^{-dagger} H g^{-1}.
GeneralizedConnection gauge_transform_frame(const Spectral& sp, const GeneralizedConnection& conn,
                                            const MatrixField& g);
MatrixField metric_transform_frame(const MatrixField& H, const MatrixField& g);

// Pointwise Hermitian projection pi^{Herm}(S) = (S + S^{*H})/2.
MatrixField herm_project(const MatrixField& S, const MatrixField& H);

ScalarField trace_field(const MatrixField& f);
MatrixField matmul(const MatrixField& a, const MatrixField& b);
MatrixField operator+(const MatrixField& a, const MatrixField& b);
MatrixField operator-(const MatrixField& a, const MatrixField& b);
MatrixField operator*(cx s, const MatrixField& a);
MatrixField constant_field(const Grid& g, const Eigen::MatrixXcd& m);
MatrixField identity_field(const Grid& g, int r);

}  // namespace gk
