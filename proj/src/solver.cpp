#include "gk/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gk {

namespace {

struct SqrtPair {
  Eigen::MatrixXcd G, Gi;
};

Eigen::MatrixXcd hermitize(const Eigen::MatrixXcd& m) { return 0.5 * (m + m.adjoint()); }

SqrtPair metric_sqrt(const Eigen::MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(h));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("metric_sqrt: metric is not positive definite");
  Eigen::VectorXd d = es.eigenvalues();
  SqrtPair out;
  out.G = es.eigenvectors() * d.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
  out.Gi = es.eigenvectors() * d.cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().adjoint();
  return out;
}

// f(eigenvalues) of the h-Hermitian endomorphism s, through the h^{1/2} frame.
template <class Fn>
Eigen::MatrixXcd endo_calculus(const Eigen::MatrixXcd& s, const Eigen::MatrixXcd& h,
                               const Fn& fn) {
  SqrtPair q = metric_sqrt(h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(q.G * s * q.Gi));
  if (es.info() != Eigen::Success) throw std::runtime_error("endo_calculus: eigensolver failed");
  Eigen::VectorXd d = es.eigenvalues();
  Eigen::VectorXcd fd(d.size());
  for (int i = 0; i < d.size(); ++i) fd(i) = fn(d(i));
  Eigen::MatrixXcd m = es.eigenvectors() * fd.asDiagonal() * es.eigenvectors().adjoint();
  return q.Gi * m * q.G;
}

Eigen::MatrixXcd commutator(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return a * b - b * a;
}

// Divided-difference weights of the matrix logarithm derivative.
double phi_weight(double x) {
  if (std::abs(x) < 1e-5) return 1.0 - 0.5 * x + x * x / 12.0;
  return x / std::expm1(x);
}

double phi_weight_even(double x) {
  if (std::abs(x) < 1e-5) return 1.0 + x * x / 12.0;
  return 0.5 * x * (1.0 + 2.0 / std::expm1(x));  // (x/2) coth(x/2)
}

double check_positive(double x, const char* who) {
  if (x <= 0.0) throw std::runtime_error(std::string(who) + ": endomorphism is not positive");
  return x;
}

Eigen::MatrixXcd offset_matrix(const SolverOptions& opt, int r) {
  if (opt.offset.size() == 0) return Eigen::MatrixXcd::Zero(r, r);
  if (opt.offset.rows() != r || opt.offset.cols() != r)
    throw std::invalid_argument("SolverOptions: offset has the wrong shape");
  double scale = std::max(1.0, opt.offset.norm());
  if ((opt.offset - opt.offset.adjoint()).norm() > 1e-12 * scale)
    throw std::invalid_argument("SolverOptions: offset must be Hermitian");
  return opt.offset;
}

// Real L2-type inner product on h-Hermitian endomorphism fields.
double hf_inner(const MatrixField& x, const MatrixField& y, const MatrixField& hf,
                const std::vector<Eigen::MatrixXcd>& hfinv) {
  double acc = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p)
    acc += (hfinv[p] * x.v[p].adjoint() * hf.v[p] * y.v[p]).trace().real();
  return acc / static_cast<double>(x.size());
}

std::vector<Eigen::MatrixXcd> pointwise_inverse(const MatrixField& h) {
  std::vector<Eigen::MatrixXcd> out(h.size());
  for (std::size_t p = 0; p < h.size(); ++p) out[p] = h.v[p].inverse();
  return out;
}

bool field_finite(const MatrixField& f) {
  for (const auto& m : f.v)
    if (!m.allFinite()) return false;
  return true;
}

}  // namespace

MatrixField metric_log(const MatrixField& f, const MatrixField& h) {
  MatrixField out(f.grid);
  for (std::size_t p = 0; p < f.size(); ++p)
    out.v[p] = endo_calculus(f.v[p], h.v[p],
                             [](double x) { return std::log(check_positive(x, "metric_log")); });
  return out;
}

MatrixField metric_exp(const MatrixField& x, const MatrixField& h) {
  MatrixField out(x.grid);
  for (std::size_t p = 0; p < x.size(); ++p)
    out.v[p] = endo_calculus(x.v[p], h.v[p], [](double t) { return std::exp(t); });
  return out;
}

MatrixField metric_power(const MatrixField& f, const MatrixField& h, double pw) {
  MatrixField out(f.grid);
  for (std::size_t p = 0; p < f.size(); ++p)
    out.v[p] = endo_calculus(f.v[p], h.v[p], [pw](double x) {
      return std::pow(check_positive(x, "metric_power"), pw);
    });
  return out;
}

ScalarField trace_log(const MatrixField& f, const MatrixField& h) {
  ScalarField out(f.grid);
  for (std::size_t p = 0; p < f.size(); ++p) {
    SqrtPair q = metric_sqrt(h.v[p]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(q.G * f.v[p] * q.Gi));
    double t = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      t += std::log(check_positive(es.eigenvalues()(i), "trace_log"));
    out.v[p] = t;
  }
  return out;
}

double metric_sup_norm(const MatrixField& s, const MatrixField& h) {
  double sup = 0.0;
  for (std::size_t p = 0; p < s.size(); ++p) {
    SqrtPair q = metric_sqrt(h.v[p]);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(q.G * s.v[p] * q.Gi);
    if (svd.singularValues().size() > 0) sup = std::max(sup, svd.singularValues()(0));
  }
  return sup;
}

double max_abs_log_eigenvalue(const MatrixField& f, const MatrixField& h) {
  double sup = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    SqrtPair q = metric_sqrt(h.v[p]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(q.G * f.v[p] * q.Gi));
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      sup = std::max(sup, std::abs(std::log(check_positive(es.eigenvalues()(i),
                                                           "max_abs_log_eigenvalue"))));
  }
  return sup;
}

double max_log_eigenvalue(const MatrixField& f, const MatrixField& h) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < f.size(); ++p) {
    SqrtPair q = metric_sqrt(h.v[p]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(q.G * f.v[p] * q.Gi));
    top = std::max(top, std::log(check_positive(es.eigenvalues().maxCoeff(),
                                                "max_log_eigenvalue")));
  }
  return top;
}

MatrixField project_unit_determinant(const MatrixField& f, const MatrixField& h) {
  ScalarField t = trace_log(f, h);
  int r = f.v.empty() ? 1 : static_cast<int>(f.v[0].rows());
  MatrixField out = f;
  for (std::size_t p = 0; p < f.size(); ++p)
    out.v[p] *= std::exp(-t.v[p].real() / static_cast<double>(r));
  return out;
}

EhLinearization::EhLinearization(const Spectral& sp, const GeneralizedKaehlerPair& gkp,
                                 const GeneralizedConnection& conn, const MatrixField& h0,
                                 const MatrixField& f, const MatrixField& hf, double epsilon,
                                 double tikhonov)
    : sp_(sp), conn_(conn), cc_(split_connection(conn)), h0_(h0), f_(f), hf_(hf),
      eps_(epsilon), tik_(tikhonov) {
  const Grid& g = sp.grid();
  r_ = f.v.empty() ? 1 : static_cast<int>(f.v[0].rows());
  d_ = g.dims();
  // Spin-pair weights of the curvature building blocks, matching the layout
  // used by the curvature evaluation.
  const PureSpinor& spinor = gkp.sp;
  cx sp0 = spin_pair(spinor.psi, spinor.psibar);
  for (int a = 0; a < d_; ++a)
    for (int b = a + 1; b < d_; ++b) {
      Multivector t = wedge(Multivector::basis(g.n, (1u << a) | (1u << b)), spinor.psi);
      w_two_.push_back(spin_pair(t, spinor.psibar) / sp0);
    }
  for (int a = 0; a < d_; ++a)
    for (int k = 0; k < d_; ++k) {
      Multivector t = wedge(Multivector::basis(g.n, 1u << a), interior(k, spinor.psi));
      w_mixed_.push_back(spin_pair(t, spinor.psibar) / sp0);
    }
  for (int j = 0; j < d_; ++j)
    for (int k = j + 1; k < d_; ++k) {
      Multivector t = interior(j, interior(k, spinor.psi));
      w_twovec_.push_back(spin_pair(t, spinor.psibar) / sp0);
    }
  // Anti-Hermitian part of the raw spin coefficient of the curvature.
  CurvatureData cd = curvature(sp, conn, spinor, hf);
  N_ = MatrixField(g, Eigen::MatrixXcd::Zero(r_, r_));
  for (std::size_t p = 0; p < N_.size(); ++p) {
    Eigen::MatrixXcd raw = spin_pair_matrix(cd.Fpsi.v[p], spinor.psibar) / sp0;
    N_.v[p] = 0.5 * (raw - hf.v[p].inverse() * raw.adjoint() * hf.v[p]);
  }
  G0_.resize(f.size());
  G0i_.resize(f.size());
  U_.resize(f.size());
  leig_.resize(f.size());
  for (std::size_t p = 0; p < f.size(); ++p) {
    SqrtPair q = metric_sqrt(h0.v[p]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(q.G * f.v[p] * q.Gi));
    G0_[p] = q.G;
    G0i_[p] = q.Gi;
    U_[p] = es.eigenvectors();
    Eigen::VectorXd l(es.eigenvalues().size());
    for (int i = 0; i < l.size(); ++i)
      l(i) = std::log(check_positive(es.eigenvalues()(i), "EhLinearization"));
    leig_[p] = l;
  }
}

MatrixField EhLinearization::laplacian(const MatrixField& xi) const {
  const Grid& g = sp_.grid();
  const int n = g.n;
  // Variation of the canonical pair along h_t = h_f exp(t xi): the (1,0) part
  // moves by the covariant derivative of xi, the (0,1) vector slot by a
  // commutator; A01 and V10 are fixed by the holomorphic structure.
  std::vector<MatrixField> dA10(n), dV01(n);
  for (int k = 0; k < n; ++k) {
    dA10[k] = partial_z(sp_, xi, k);
    dV01[k] = MatrixField(g, Eigen::MatrixXcd::Zero(r_, r_));
    for (std::size_t p = 0; p < xi.size(); ++p) {
      dA10[k].v[p] += commutator(cc_.A10[k].v[p], xi.v[p]);
      dV01[k].v[p] = commutator(cc_.V01[k].v[p], xi.v[p]);
    }
  }
  // Real coordinate slots: dz_k = dx_{2k} + i dx_{2k+1} picks up the (1,0)
  // form twice, d/dz_k = (d_{2k} - i d_{2k+1})/2 splits the vector slots.
  std::vector<MatrixField> dA(d_), dV(d_);
  for (int k = 0; k < n; ++k) {
    dA[2 * k] = dA10[k];
    dA[2 * k + 1] = cx(0.0, 1.0) * dA10[k];
    dV[2 * k] = cx(0.5) * dV01[k];
    dV[2 * k + 1] = cx(0.0, 0.5) * dV01[k];
  }
  // Push the varied curvature parts through the spin projection. Mixed
  // partials of dA are needed even when only one orientation carries weight,
  // so both terms of each F variation are assembled explicitly.
  MatrixField out(g, Eigen::MatrixXcd::Zero(r_, r_));
  std::size_t t2 = 0;
  for (int a = 0; a < d_; ++a)
    for (int b = a + 1; b < d_; ++b, ++t2) {
      cx w = w_two_[t2];
      if (w == cx(0.0)) continue;
      MatrixField da = sp_.partial(dA[b], a);
      MatrixField db = sp_.partial(dA[a], b);
      for (std::size_t p = 0; p < out.size(); ++p)
        out.v[p] += w * (da.v[p] - db.v[p] + commutator(dA[a].v[p], conn_.A[b].v[p]) +
                         commutator(conn_.A[a].v[p], dA[b].v[p]));
    }
  std::size_t tm = 0;
  for (int a = 0; a < d_; ++a)
    for (int k = 0; k < d_; ++k, ++tm) {
      cx w = w_mixed_[tm];
      if (w == cx(0.0)) continue;
      MatrixField dv = sp_.partial(dV[k], a);
      for (std::size_t p = 0; p < out.size(); ++p)
        out.v[p] += w * (dv.v[p] + commutator(dA[a].v[p], conn_.V[k].v[p]) +
                         commutator(conn_.A[a].v[p], dV[k].v[p]));
    }
  std::size_t tv = 0;
  for (int j = 0; j < d_; ++j)
    for (int k = j + 1; k < d_; ++k, ++tv) {
      cx w = w_twovec_[tv];
      if (w == cx(0.0)) continue;
      for (std::size_t p = 0; p < out.size(); ++p)
        out.v[p] += w * (commutator(dV[j].v[p], conn_.V[k].v[p]) +
                         commutator(conn_.V[j].v[p], dV[k].v[p]));
    }
  out = herm_project(out, hf_);
  // Metric variation of the Hermitian projection itself; this is what makes
  // the operator self-adjoint in the h_f inner product.
  for (std::size_t p = 0; p < out.size(); ++p)
    out.v[p] -= 0.5 * commutator(N_.v[p], xi.v[p]);
  return out;
}

MatrixField EhLinearization::dlog(const MatrixField& xi, bool symmetrized) const {
  MatrixField out(xi.grid);
  for (std::size_t p = 0; p < xi.size(); ++p) {
    const Eigen::MatrixXcd& U = U_[p];
    const Eigen::VectorXd& l = leig_[p];
    Eigen::MatrixXcd hat = U.adjoint() * (G0_[p] * xi.v[p] * G0i_[p]) * U;
    for (int i = 0; i < hat.rows(); ++i)
      for (int j = 0; j < hat.cols(); ++j) {
        double x = l(j) - l(i);
        hat(i, j) *= symmetrized ? phi_weight_even(x) : phi_weight(x);
      }
    out.v[p] = G0i_[p] * (U * hat * U.adjoint()) * G0_[p];
  }
  return out;
}

MatrixField EhLinearization::apply(const MatrixField& xi) const {
  MatrixField out = laplacian(xi);
  if (eps_ != 0.0) {
    MatrixField dl = dlog(xi, true);
    for (std::size_t p = 0; p < out.size(); ++p) out.v[p] += eps_ * dl.v[p];
  }
  if (tik_ != 0.0)
    for (std::size_t p = 0; p < out.size(); ++p) out.v[p] += tik_ * xi.v[p];
  return out;
}

MatrixField linearized_operator(const Spectral& sp, const GeneralizedHolomorphicStructure& hs,
                                const GeneralizedKaehlerPair& gkp, const MatrixField& h0,
                                const MatrixField& f, const MatrixField& xi, double epsilon) {
  MatrixField hf = matmul(h0, f);
  GeneralizedConnection conn = canonical_connection(sp, hs, hf);
  EhLinearization lin(sp, gkp, conn, h0, f, hf, epsilon, 0.0);
  MatrixField out = lin.laplacian(xi);
  if (epsilon != 0.0) {
    MatrixField dl = lin.dlog(xi, false);
    for (std::size_t p = 0; p < out.size(); ++p) out.v[p] += epsilon * dl.v[p];
  }
  return out;
}

namespace {

// Preconditioned conjugate gradients for (Delta_f + eps Dlog~ + tik) xi = rhs
// in the h_f inner product. The preconditioner is the flat inverse Helmholtz
// applied entrywise, re-projected onto h_f-Hermitian fields.
MatrixField cg_solve(const Spectral& sp, const EhLinearization& lin, const MatrixField& rhs,
                     const MatrixField& hf, int max_iter, double tol) {
  const Grid& g = sp.grid();
  int r = rhs.v.empty() ? 1 : static_cast<int>(rhs.v[0].rows());
  std::vector<Eigen::MatrixXcd> hfinv = pointwise_inverse(hf);
  double pshift = std::max(lin.epsilon() + lin.tikhonov(), 1e-3);
  auto precond = [&](const MatrixField& z) {
    return herm_project(sp.inverse_helmholtz(z, pshift), hf);
  };

  MatrixField x(g, Eigen::MatrixXcd::Zero(r, r));
  MatrixField res = rhs;
  double rhs_norm = std::sqrt(hf_inner(rhs, rhs, hf, hfinv));
  if (rhs_norm == 0.0) return x;
  MatrixField z = precond(res);
  MatrixField p = z;
  double rho = hf_inner(res, z, hf, hfinv);
  for (int it = 0; it < max_iter; ++it) {
    MatrixField q = lin.apply(p);
    double pq = hf_inner(p, q, hf, hfinv);
    if (!(pq > 0.0) || !std::isfinite(pq)) break;
    double alpha = rho / pq;
    for (std::size_t k = 0; k < x.size(); ++k) {
      x.v[k] += alpha * p.v[k];
      res.v[k] -= alpha * q.v[k];
    }
    double rnorm = std::sqrt(hf_inner(res, res, hf, hfinv));
    if (rnorm < tol * rhs_norm) break;
    z = precond(res);
    double rho_next = hf_inner(res, z, hf, hfinv);
    double beta = rho_next / rho;
    rho = rho_next;
    for (std::size_t k = 0; k < p.size(); ++k) p.v[k] = z.v[k] + beta * p.v[k];
  }
  return x;
}

struct ResidualEval {
  MatrixField hf;
  GeneralizedConnection conn;
  MatrixField S;        // h_f-Hermitian residual, full
  MatrixField S_solve;  // pointwise-traceless part; the det-1 constraint can only move this
  double sup = 0.0;        // sup norm of the full residual (reported)
  double sup_solve = 0.0;  // sup norm of the traceless part (drives the iteration)
};

ResidualEval eval_residual(const Spectral& sp, const GeneralizedHolomorphicStructure& hs,
                           const GeneralizedKaehlerPair& gkp, const MatrixField& h0,
                           const MatrixField& f, double lambda, double epsilon,
                           const Eigen::MatrixXcd& off) {
  ResidualEval ev;
  ev.hf = matmul(h0, f);
  ev.conn = canonical_connection(sp, hs, ev.hf);
  MatrixField K = mean_curvature_fast(sp, ev.conn, gkp.sp, ev.hf);
  int r = static_cast<int>(off.rows());
  Eigen::MatrixXcd shift = lambda * Eigen::MatrixXcd::Identity(r, r) + off;
  MatrixField R = K;
  for (std::size_t p = 0; p < R.size(); ++p) R.v[p] -= shift;
  if (epsilon != 0.0) {
    MatrixField lg = metric_log(f, h0);
    for (std::size_t p = 0; p < R.size(); ++p) R.v[p] += epsilon * lg.v[p];
  }
  ev.S = herm_project(R, ev.hf);
  ev.sup = metric_sup_norm(ev.S, ev.hf);
  // Unit-determinant reprojection wipes the trace of every update, so the
  // pointwise trace of S is frozen at the start normalization's quadrature
  // defect. Newton can only drive the traceless part; splitting it out keeps
  // the line search from stalling against that floor.
  ev.S_solve = ev.S;
  for (std::size_t p = 0; p < ev.S_solve.size(); ++p) {
    cx t = ev.S_solve.v[p].trace() / static_cast<double>(r);
    for (int j = 0; j < r; ++j) ev.S_solve.v[p](j, j) -= t;
  }
  ev.sup_solve = metric_sup_norm(ev.S_solve, ev.hf);
  return ev;
}

}  // namespace

NormalizedStart normalize_start_metric(const Spectral& sp,
                                       const GeneralizedHolomorphicStructure& hs,
                                       const GeneralizedKaehlerPair& gkp, const MatrixField& H0,
                                       const SolverOptions& opt) {
  const Grid& g = sp.grid();
  int r = H0.v.empty() ? 1 : static_cast<int>(H0.v[0].rows());
  Eigen::MatrixXcd off = offset_matrix(opt, r);

  GeneralizedConnection conn0 = canonical_connection(sp, hs, H0);
  DegreeReport rep = degree_slope(sp, conn0, gkp.sp, H0, r);
  double lambda = rep.lambda - off.trace().real() / static_cast<double>(r);

  // Scalar adjustment: solve lap u = -(tr K - r lambda - tr offset), so the
  // rescaled metric has traceless shifted curvature.
  MatrixField K0 = mean_curvature_fast(sp, conn0, gkp.sp, H0);
  ScalarField c(g);
  for (std::size_t p = 0; p < c.size(); ++p)
    c.v[p] = (K0.v[p].trace() - static_cast<double>(r) * lambda - off.trace()).real();
  cx cm = mean(c);
  for (auto& v : c.v) v -= cm;  // guard the zero mode; |cm| is quadrature noise
  ScalarField mc(g);
  for (std::size_t p = 0; p < c.size(); ++p) mc.v[p] = -c.v[p];
  ScalarField u = sp.inverse_helmholtz(mc, 0.0);

  MatrixField H = H0;
  for (std::size_t p = 0; p < H.size(); ++p)
    H.v[p] *= std::exp(u.v[p].real() / static_cast<double>(r));

  GeneralizedConnection connH = canonical_connection(sp, hs, H);
  MatrixField KH = mean_curvature_fast(sp, connH, gkp.sp, H);
  Eigen::MatrixXcd shift = lambda * Eigen::MatrixXcd::Identity(r, r) + off;
  MatrixField Khat = KH;
  for (std::size_t p = 0; p < Khat.size(); ++p) Khat.v[p] -= shift;

  NormalizedStart ns;
  ns.lambda = lambda;
  ns.h0 = matmul(H, metric_exp(Khat, H));
  MatrixField mKhat = Khat;
  for (auto& m : mKhat.v) m = -m;
  ns.f1 = metric_exp(mKhat, H);

  GeneralizedConnection connP = canonical_connection(sp, hs, ns.h0);
  MatrixField KP = mean_curvature_fast(sp, connP, gkp.sp, ns.h0);
  MatrixField KPhat = KP;
  for (std::size_t p = 0; p < KPhat.size(); ++p) KPhat.v[p] -= shift;
  ns.khat0_sup = metric_sup_norm(KPhat, ns.h0);
  return ns;
}

SolverState solve_at_epsilon(const Spectral& sp, const GeneralizedHolomorphicStructure& hs,
                             const GeneralizedKaehlerPair& gkp, const MatrixField& h0,
                             const MatrixField& f_init, double lambda, double epsilon,
                             const SolverOptions& opt) {
  int r = f_init.v.empty() ? 1 : static_cast<int>(f_init.v[0].rows());
  Eigen::MatrixXcd off = offset_matrix(opt, r);

  SolverState st;
  st.epsilon = epsilon;
  st.lambda = lambda;
  st.f = project_unit_determinant(f_init, h0);

  double tik = (epsilon == 0.0) ? opt.tikhonov : 0.0;
  double eta = 1.0;
  ResidualEval ev = eval_residual(sp, hs, gkp, h0, st.f, lambda, epsilon, off);
  st.history.push_back(ev.sup_solve);

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    if (ev.sup_solve < opt.tol) {
      st.converged = true;
      break;
    }
    EhLinearization lin(sp, gkp, ev.conn, h0, st.f, ev.hf, epsilon, tik);
    MatrixField rhs = ev.S_solve;
    for (auto& m : rhs.v) m = -m;
    MatrixField xi = cg_solve(sp, lin, rhs, ev.hf, opt.cg_max_iter, opt.cg_tol);
    std::vector<Eigen::MatrixXcd> hfinv = pointwise_inverse(ev.hf);
    if (!field_finite(xi) || hf_inner(xi, ev.S_solve, ev.hf, hfinv) >= 0.0)
      xi = rhs;  // steepest

    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      MatrixField step = xi;
      for (auto& m : step.v) m *= eta;
      MatrixField f_try;
      ResidualEval ev_try;
      try {
        f_try = project_unit_determinant(matmul(st.f, metric_exp(step, ev.hf)), h0);
        ev_try = eval_residual(sp, hs, gkp, h0, f_try, lambda, epsilon, off);
      } catch (const std::runtime_error&) {
        eta *= 0.5;  // left the positive cone numerically
        continue;
      }
      if (ev_try.sup_solve < ev.sup_solve * (1.0 - 1e-4 * eta)) {
        st.f = f_try;
        ev = ev_try;
        st.history.push_back(ev.sup_solve);
        st.iters += 1;
        eta = std::min(1.5 * eta, 1.0);
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;  // stalled; caller inspects history
  }
  if (!st.converged && !st.history.empty() && st.history.back() < opt.tol) st.converged = true;
  st.sup_full = ev.sup;
  return st;
}

std::string to_string(PathVerdict v) {
  switch (v) {
    case PathVerdict::einstein_metric: return "einstein_metric";
    case PathVerdict::destabilizer_found: return "destabilizer_found";
    case PathVerdict::non_converged: return "non_converged";
  }
  return "non_converged";
}

DestabilizerReport destabilizer_probe(const Spectral& sp,
                                      const GeneralizedHolomorphicStructure& hs,
                                      const GeneralizedKaehlerPair& gkp, const MatrixField& h0,
                                      const MatrixField& f, double epsilon,
                                      const SolverOptions& opt) {
  const Grid& g = sp.grid();
  int r = f.v.empty() ? 1 : static_cast<int>(f.v[0].rows());
  DestabilizerReport rep;
  std::ostringstream msg;
  msg << "probe at epsilon = " << epsilon << ": ";

  // Log-eigen data per node; the top of the spectrum survives the rescaled
  // sigma-powers, everything else decays to zero as sigma shrinks.
  std::vector<Eigen::MatrixXcd> G0(f.size()), G0i(f.size()), U(f.size());
  std::vector<Eigen::VectorXd> l(f.size());
  double M = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < f.size(); ++p) {
    SqrtPair q = metric_sqrt(h0.v[p]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(q.G * f.v[p] * q.Gi));
    G0[p] = q.G;
    G0i[p] = q.Gi;
    U[p] = es.eigenvectors();
    Eigen::VectorXd lv(es.eigenvalues().size());
    for (int i = 0; i < lv.size(); ++i)
      lv(i) = std::log(check_positive(es.eigenvalues()(i), "destabilizer_probe"));
    l[p] = lv;
    M = std::max(M, lv.maxCoeff());
  }

  const double sigmas[3] = {0.5, 0.25, 0.1};
  std::vector<MatrixField> projs;
  for (double s : sigmas) {
    double cut = M + std::log(0.5) / s;  // e^{s(l - M)} > 1/2
    MatrixField P(g);
    for (std::size_t p = 0; p < f.size(); ++p) {
      Eigen::VectorXcd ind(r);
      for (int i = 0; i < r; ++i) ind(i) = l[p](i) > cut ? 1.0 : 0.0;
      P.v[p] = G0i[p] * (U[p] * ind.asDiagonal() * U[p].adjoint()) * G0[p];
    }
    projs.push_back(P);
  }
  for (std::size_t a = 0; a < projs.size(); ++a)
    for (std::size_t b = a + 1; b < projs.size(); ++b) {
      double d = 0.0;
      for (std::size_t p = 0; p < f.size(); ++p)
        d = std::max(d, (projs[a].v[p] - projs[b].v[p]).norm());
      rep.sigma_consistency = std::max(rep.sigma_consistency, d);
    }

  const MatrixField& Ptop = projs.back();
  double tr_mean = 0.0, tr_dev = 0.0;
  for (std::size_t p = 0; p < Ptop.size(); ++p) tr_mean += Ptop.v[p].trace().real();
  tr_mean /= static_cast<double>(Ptop.size());
  int k_top = static_cast<int>(std::lround(tr_mean));
  for (std::size_t p = 0; p < Ptop.size(); ++p)
    tr_dev = std::max(tr_dev, std::abs(Ptop.v[p].trace().real() - k_top));

  MatrixField pi(g);
  for (std::size_t p = 0; p < pi.size(); ++p)
    pi.v[p] = Eigen::MatrixXcd::Identity(r, r) - Ptop.v[p];
  rep.pi.pi = pi;
  rep.pi.rank = r - k_top;

  if (tr_dev > 0.25) {
    rep.found = false;
    msg << "top-block rank is not constant across nodes (max deviation " << tr_dev << ")";
    rep.message = msg.str();
    return rep;
  }
  if (rep.pi.rank <= 0 || rep.pi.rank >= r) {
    rep.found = false;
    msg << "no proper subbundle: complement rank " << rep.pi.rank << " of " << r;
    rep.message = msg.str();
    return rep;
  }
  rep.found = true;
  msg << "complement of the top log f block, rank " << rep.pi.rank << " of " << r
      << ", sigma consistency " << rep.sigma_consistency;

  rep.holomorphy = weak_holomorphy_residual(sp, pi, hs, h0);
  GeneralizedConnection conn0 = canonical_connection(sp, hs, h0);
  Eigen::MatrixXcd off = offset_matrix(opt, r);
  try {
    rep.slopes = slope_inequality(sp, gkp, rep.pi, conn0, h0, off);
  } catch (const std::exception& e) {
    msg << "; slope comparison unavailable (" << e.what() << ")";
  }
  rep.message = msg.str();
  return rep;
}

PathResult continuity_path(const Spectral& sp, const GeneralizedHolomorphicStructure& hs,
                           const GeneralizedKaehlerPair& gkp, const MatrixField& H0,
                           const SolverOptions& opt) {
  PathResult pr;
  pr.start = normalize_start_metric(sp, hs, gkp, H0, opt);
  const MatrixField& h0 = pr.start.h0;
  double lambda = pr.start.lambda;
  double growth_scale = std::max(pr.start.khat0_sup, 1e-12);

  MatrixField f = pr.start.f1;
  int grow_count = 0;
  bool aborted = false;

  auto push_record = [&](const SolverState& st) {
    EpsilonRecord rec;
    rec.epsilon = st.epsilon;
    rec.iters = st.iters;
    rec.sup_residual = st.sup_full;
    rec.m_eps = max_abs_log_eigenvalue(st.f, h0);
    ScalarField tl = trace_log(st.f, h0);
    for (const auto& v : tl.v) rec.det_drift = std::max(rec.det_drift, std::abs(v.real()));
    rec.growing = rec.m_eps > opt.growth_threshold * growth_scale;
    pr.records.push_back(rec);
    pr.snapshots.push_back(st.f);
    return rec;
  };

  for (int k = 0;; ++k) {
    double eps_k = opt.eps0 * std::pow(opt.eps_ratio, k);
    if (eps_k < opt.eps_floor * (1.0 - 1e-12)) break;
    SolverState st = solve_at_epsilon(sp, hs, gkp, h0, f, lambda, eps_k, opt);
    f = st.f;
    pr.state = st;
    EpsilonRecord rec = push_record(st);
    if (rec.growing) ++grow_count;
    if (grow_count >= opt.growth_slices) {
      pr.probe = destabilizer_probe(sp, hs, gkp, h0, f, eps_k, opt);
      pr.verdict =
          pr.probe->found ? PathVerdict::destabilizer_found : PathVerdict::non_converged;
      aborted = true;
      break;
    }
    if (!st.converged) {
      pr.verdict = PathVerdict::non_converged;
      aborted = true;
      break;
    }
  }

  if (!aborted) {
    SolverState st = solve_at_epsilon(sp, hs, gkp, h0, f, lambda, 0.0, opt);
    f = st.f;
    pr.state = st;
    push_record(st);
    // The verdict is about the full equation, trace included; the traceless
    // split only steers the iteration.
    pr.verdict = st.sup_full < opt.final_tol ? PathVerdict::einstein_metric
                                             : PathVerdict::non_converged;
  }

  pr.h_final = matmul(h0, f);
  pr.f_total = MatrixField(sp.grid());
  for (std::size_t p = 0; p < pr.h_final.size(); ++p)
    pr.f_total.v[p] = H0.v[p].inverse() * pr.h_final.v[p];
  return pr;
}

}  // namespace gk
