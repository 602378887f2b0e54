#pragma once
// Continuity method for the Einstein-Hermitian equation on a generalized
// holomorphic bundle over the flat torus. The perturbed equation at each
// slice is
//
//   L_eps(f) = K_{h0 f} - lambda id - offset + eps log f = 0,
//
// with f positive and Hermitian for the reference metric h0 and det f = 1 at
// every node. The start metric is normalized so the eps = 1 slice is solved
// exactly, eps then follows a geometric schedule down to a floor, and an
// eps = 0 polish finishes the run. Unbounded growth of log f along the path
// triggers a destabilizing-subbundle probe instead.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gk/bundle.hpp"
#include "gk/grid.hpp"
#include "gk/stability.hpp"
#include "gk/structures.hpp"

namespace gk {

// Matrix calculus through the reference metric: an endomorphism s is
// h-Hermitian when G s G^{-1} is Hermitian for G = h^{1/2}, and functions of
// its (real) eigenvalues are evaluated in that conjugated basis.
MatrixField metric_log(const MatrixField& f, const MatrixField& h);
MatrixField metric_exp(const MatrixField& x, const MatrixField& h);
MatrixField metric_power(const MatrixField& f, const MatrixField& h, double p);

// Real field of pointwise eigenvalue sums of log f (= log det f).
ScalarField trace_log(const MatrixField& f, const MatrixField& h);

// Largest singular value of G s G^{-1} over all nodes (metric operator norm).
double metric_sup_norm(const MatrixField& s, const MatrixField& h);

// Extremes of the eigenvalues of log f over all nodes. The absolute version
// is the C^0 norm m_eps tracked along the continuity path.
double max_abs_log_eigenvalue(const MatrixField& f, const MatrixField& h);
double max_log_eigenvalue(const MatrixField& f, const MatrixField& h);

// f <- f exp(-(tr log f)/r), restoring det f = 1 at every node.
MatrixField project_unit_determinant(const MatrixField& f, const MatrixField& h);

struct SolverOptions {
  double tol = 1e-9;               // per-slice target for the traceless residual part
  int max_iter = 200;              // damped Newton iterations per slice
  double eps0 = 1.0;               // first slice
  double eps_ratio = 0.7;          // geometric schedule factor
  double eps_floor = 1e-4;         // last positive slice >= floor
  double final_tol = 1e-8;         // acceptance threshold for the eps = 0 polish
  double tikhonov = 1e-8;          // shift added to the eps = 0 linearization
  double growth_threshold = 10.0;  // m_eps > threshold * khat0_sup marks growth
  int growth_slices = 3;           // growing slices required to run the probe
  int cg_max_iter = 400;
  double cg_tol = 1e-10;
  Eigen::MatrixXcd offset;         // constant Hermitian source; empty = zero
};

// Start metric h0' with tr(K_{h0'} - lambda - offset) = 0 at every node, and
// the exact eps = 1 solution f1 = exp(-(K_{h0'} - lambda - offset)).
struct NormalizedStart {
  MatrixField h0;         // adjusted reference metric
  MatrixField f1;         // exact first slice
  double lambda = 0.0;    // Einstein constant of the (offset-corrected) equation
  double khat0_sup = 0.0; // C^0 norm of K_{h0'} - lambda - offset
};

NormalizedStart normalize_start_metric(const Spectral& sp,
                                       const GeneralizedHolomorphicStructure& hs,
                                       const GeneralizedKaehlerPair& gkp, const MatrixField& H0,
                                       const SolverOptions& opt = {});

// Derivative of L_eps at f along f_t = f exp(t xi) for h_f-Hermitian xi:
// Delta_f xi + eps D(log f)(xi). The Laplacian is the exact variation of the
// mean curvature: the canonical pair moves by delta A10 = partial xi + [A10, xi]
// and delta V01 = [V01, xi], and the varied curvature parts go through the
// same spin projection as the curvature itself. D(log f) is the
// divided-difference derivative of the matrix logarithm, evaluated in the
// eigenbasis of f.
class EhLinearization {
public:
  EhLinearization(const Spectral& sp, const GeneralizedKaehlerPair& gkp,
                  const GeneralizedConnection& conn, const MatrixField& h0, const MatrixField& f,
                  const MatrixField& hf, double epsilon, double tikhonov = 0.0);

  // h_f-Hermitian projection of d/dt K(h0 f exp(t xi)) at t = 0.
  MatrixField laplacian(const MatrixField& xi) const;

  // Divided-difference weights x/(e^x - 1); the symmetrized variant uses the
  // even part (x/2)coth(x/2) and is self-adjoint positive in the h_f inner
  // product, which is what the CG solve needs.
  MatrixField dlog(const MatrixField& xi, bool symmetrized) const;

  // laplacian + eps * dlog(symmetrized) + tikhonov * xi.
  MatrixField apply(const MatrixField& xi) const;

  double epsilon() const { return eps_; }
  double tikhonov() const { return tik_; }

private:
  const Spectral& sp_;
  GeneralizedConnection conn_;
  ComplexComponents cc_;
  MatrixField h0_, f_, hf_;
  double eps_ = 0.0, tik_ = 0.0;
  int r_ = 1;
  int d_ = 0;  // real dimension 2n
  // spin-pair weights of the curvature building blocks, same layout as the
  // curvature evaluation: two-forms (a < b), form times vector slot, two
  // vector slots (j < k)
  std::vector<cx> w_two_, w_mixed_, w_twovec_;
  // anti-Hermitian part of the raw curvature coefficient at h_f; the
  // Hermitian projection in K depends on the metric, and differentiating it
  // contributes -[N, xi]/2. Dropping this term breaks both the finite
  // difference slope and the self-adjointness of the operator.
  MatrixField N_;
  std::vector<Eigen::MatrixXcd> G0_, G0i_, U_;            // per-node eigen data of f
  std::vector<Eigen::VectorXd> leig_;                     // log eigenvalues of f
};

// One-call variant used by the finite-difference tests: true (unsymmetrized)
// divided differences.
MatrixField linearized_operator(const Spectral& sp, const GeneralizedHolomorphicStructure& hs,
                                const GeneralizedKaehlerPair& gkp, const MatrixField& h0,
                                const MatrixField& f, const MatrixField& xi, double epsilon);

// The iteration is confined to det f = 1, which freezes the pointwise trace of
// the residual at the start normalization's quadrature defect. Convergence and
// the line search therefore act on the traceless part; sup_full reports the
// whole residual, trace included.
struct SolverState {
  double epsilon = 0.0;
  MatrixField f;
  double lambda = 0.0;
  std::vector<double> history;  // traceless sup-residual per evaluation, first = entry value
  bool converged = false;
  int iters = 0;                // accepted update steps
  double sup_full = 0.0;        // full sup-residual at exit
};

SolverState solve_at_epsilon(const Spectral& sp, const GeneralizedHolomorphicStructure& hs,
                             const GeneralizedKaehlerPair& gkp, const MatrixField& h0,
                             const MatrixField& f_init, double lambda, double epsilon,
                             const SolverOptions& opt = {});

struct EpsilonRecord {
  double epsilon = 0.0;
  int iters = 0;
  double sup_residual = 0.0;  // full equation residual at the end of the slice
  double m_eps = 0.0;      // C^0 norm of log f at the end of the slice
  double det_drift = 0.0;  // sup |tr log f| after the final reprojection
  bool growing = false;
};

enum class PathVerdict { einstein_metric, destabilizer_found, non_converged };
std::string to_string(PathVerdict v);

struct DestabilizerReport {
  bool found = false;
  SubbundleProjector pi;            // candidate destabilizing projector
  double sigma_consistency = 0.0;   // sup distance between the sigma-power projectors
  WeakHolomorphyResidual holomorphy;
  SlopeReport slopes;               // offset-corrected slope comparison
  std::string message;
};

// Rescales log f by its largest eigenvalue, takes small sigma-powers of the
// rescaled f, thresholds their spectra to a projector family, and reports the
// complement of the top block together with its holomorphy and slope data.
DestabilizerReport destabilizer_probe(const Spectral& sp,
                                      const GeneralizedHolomorphicStructure& hs,
                                      const GeneralizedKaehlerPair& gkp, const MatrixField& h0,
                                      const MatrixField& f, double epsilon,
                                      const SolverOptions& opt = {});

struct PathResult {
  PathVerdict verdict = PathVerdict::non_converged;
  SolverState state;                  // last slice
  NormalizedStart start;
  std::vector<EpsilonRecord> records;
  std::vector<MatrixField> snapshots;  // f at the end of each slice
  std::optional<DestabilizerReport> probe;
  MatrixField h_final;   // h0' f at the end of the path
  MatrixField f_total;   // H0^{-1} h_final, the change relative to the input metric
};

PathResult continuity_path(const Spectral& sp, const GeneralizedHolomorphicStructure& hs,
                           const GeneralizedKaehlerPair& gkp, const MatrixField& H0,
                           const SolverOptions& opt = {});

}  // namespace gk
