#include "gk/bundle.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gk/linalg.hpp"

namespace gk {

namespace {

void check_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw std::invalid_argument("bundle: grid mismatch");
}

int conn_rank(const GeneralizedConnection& conn) {
  return static_cast<int>(conn.A.at(0).v.at(0).rows());
}

}  // namespace

MatrixField matmul(const MatrixField& a, const MatrixField& b) {
  check_same_grid(a.grid, b.grid);
  MatrixField out(a.grid);
  for (std::size_t x = 0; x < a.size(); ++x) out.v[x] = a.v[x] * b.v[x];
  return out;
}

MatrixField operator+(const MatrixField& a, const MatrixField& b) {
  check_same_grid(a.grid, b.grid);
  MatrixField out(a.grid);
  for (std::size_t x = 0; x < a.size(); ++x) out.v[x] = a.v[x] + b.v[x];
  return out;
}

MatrixField operator-(const MatrixField& a, const MatrixField& b) {
  check_same_grid(a.grid, b.grid);
  MatrixField out(a.grid);
  for (std::size_t x = 0; x < a.size(); ++x) out.v[x] = a.v[x] - b.v[x];
  return out;
}

MatrixField operator*(cx s, const MatrixField& a) {
  MatrixField out(a.grid);
  for (std::size_t x = 0; x < a.size(); ++x) out.v[x] = s * a.v[x];
  return out;
}

MatrixField constant_field(const Grid& g, const Eigen::MatrixXcd& m) {
  return MatrixField(g, m);
}

MatrixField identity_field(const Grid& g, int r) {
  return MatrixField(g, Eigen::MatrixXcd::Identity(r, r));
}

ScalarField trace_field(const MatrixField& f) {
  ScalarField out(f.grid);
  for (std::size_t x = 0; x < f.size(); ++x) out.v[x] = f.v[x].trace();
  return out;
}

HermitianBundle make_bundle(const Grid& g, const MatrixField& h0) {
  HermitianBundle b;
  b.r = static_cast<int>(h0.v.at(0).rows());
  b.h0 = h0;
  b.h = h0;
  validate(b);
  return b;
}

void validate(const HermitianBundle& b, double min_eigenvalue) {
  for (const auto& m : b.h.v) {
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
      throw std::runtime_error("bundle: metric not Hermitian");
    if (min_eig(m) <= min_eigenvalue)
      throw std::runtime_error("bundle: metric not positive definite");
  }
}

Eigen::MatrixXcd adjoint_h(const Eigen::MatrixXcd& S, const Eigen::MatrixXcd& H) {
  return H.inverse() * S.adjoint() * H;
}

MatrixField adjoint_h(const MatrixField& S, const MatrixField& H) {
  check_same_grid(S.grid, H.grid);
  MatrixField out(S.grid);
  for (std::size_t x = 0; x < S.size(); ++x) out.v[x] = adjoint_h(S.v[x], H.v[x]);
  return out;
}

MatrixField herm_project(const MatrixField& S, const MatrixField& H) {
  MatrixField out(S.grid);
  for (std::size_t x = 0; x < S.size(); ++x)
    out.v[x] = 0.5 * (S.v[x] + adjoint_h(S.v[x], H.v[x]));
  return out;
}

double hermitian_residual(const Spectral& sp, const GeneralizedConnection& conn,
                          const MatrixField& H) {
  double worst = 0.0;
  const int d = static_cast<int>(conn.A.size());
  for (int a = 0; a < d; ++a) {
    MatrixField dH = sp.partial(H, a);
    for (std::size_t x = 0; x < H.size(); ++x) {
      Eigen::MatrixXcd gap =
          dH.v[x] - H.v[x] * conn.A[a].v[x] - conn.A[a].v[x].adjoint() * H.v[x];
      worst = std::max(worst, gap.cwiseAbs().maxCoeff());
    }
  }
  for (int k = 0; k < d; ++k)
    for (std::size_t x = 0; x < H.size(); ++x) {
      Eigen::MatrixXcd skew = conn.V[k].v[x] + adjoint_h(conn.V[k].v[x], H.v[x]);
      worst = std::max(worst, skew.cwiseAbs().maxCoeff());
    }
  return worst;
}

MatrixField partial_z(const Spectral& sp, const MatrixField& f, int k) {
  return cx(0.5) * (sp.partial(f, 2 * k) - cx(0, 1) * sp.partial(f, 2 * k + 1));
}

MatrixField partial_zbar(const Spectral& sp, const MatrixField& f, int k) {
  return cx(0.5) * (sp.partial(f, 2 * k) + cx(0, 1) * sp.partial(f, 2 * k + 1));
}

ComplexComponents split_connection(const GeneralizedConnection& conn) {
  const int n = static_cast<int>(conn.A.size()) / 2;
  ComplexComponents cc;
  for (int k = 0; k < n; ++k) {
    // A = A10 dz + A01 dzbar with dz = dx + i dy.
    cc.A10.push_back(cx(0.5) * (conn.A[2 * k] - cx(0, 1) * conn.A[2 * k + 1]));
    cc.A01.push_back(cx(0.5) * (conn.A[2 * k] + cx(0, 1) * conn.A[2 * k + 1]));
    // V = V10 d/dz + V01 d/dzbar with d/dz = (d/dx - i d/dy)/2.
    cc.V10.push_back(conn.V[2 * k] + cx(0, 1) * conn.V[2 * k + 1]);
    cc.V01.push_back(conn.V[2 * k] - cx(0, 1) * conn.V[2 * k + 1]);
  }
  return cc;
}

GeneralizedConnection assemble_connection(const ComplexComponents& cc) {
  GeneralizedConnection conn;
  const int n = static_cast<int>(cc.A10.size());
  conn.A.resize(2 * n);
  conn.V.resize(2 * n);
  for (int k = 0; k < n; ++k) {
    conn.A[2 * k] = cc.A10[k] + cc.A01[k];
    conn.A[2 * k + 1] = cx(0, 1) * (cc.A10[k] - cc.A01[k]);
    conn.V[2 * k] = cx(0.5) * (cc.V10[k] + cc.V01[k]);
    conn.V[2 * k + 1] = cx(0, -0.5) * (cc.V10[k] - cc.V01[k]);
  }
  return conn;
}

double holomorphy_residual(const Spectral& sp, const GeneralizedHolomorphicStructure& hs) {
  const int n = static_cast<int>(hs.A01.size());
  double worst = 0.0;
  auto track = [&](const MatrixField& f) {
    for (const auto& m : f.v) worst = std::max(worst, m.cwiseAbs().maxCoeff());
  };
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      if (j < k) {
        track(partial_zbar(sp, hs.A01[k], j) - partial_zbar(sp, hs.A01[j], k) +
              matmul(hs.A01[j], hs.A01[k]) - matmul(hs.A01[k], hs.A01[j]));
        track(matmul(hs.Phi[j], hs.Phi[k]) - matmul(hs.Phi[k], hs.Phi[j]));
      }
      track(partial_zbar(sp, hs.Phi[k], j) + matmul(hs.A01[j], hs.Phi[k]) -
            matmul(hs.Phi[k], hs.A01[j]));
    }
  return worst;
}

void validate(const Spectral& sp, const GeneralizedHolomorphicStructure& hs, double tol) {
  if (hs.A01.size() != hs.Phi.size())
    throw std::invalid_argument("holomorphic structure: component count mismatch");
  if (holomorphy_residual(sp, hs) > tol)
    throw std::runtime_error("holomorphic structure: integrability residual above tolerance");
}

GeneralizedConnection canonical_connection(const Spectral& sp,
                                           const GeneralizedHolomorphicStructure& hs,
                                           const MatrixField& H) {
  const int n = static_cast<int>(hs.A01.size());
  ComplexComponents cc;
  MatrixField Hinv(H.grid);
  for (std::size_t x = 0; x < H.size(); ++x) Hinv.v[x] = H.v[x].inverse();
  for (int k = 0; k < n; ++k) {
    // Metric compatibility dh = h(D.,.) + h(.,D.) forces
    // A10 = H^{-1} dz H - H^{-1} A01^dagger H on the (1,0) side.
    MatrixField dH = partial_z(sp, H, k);
    MatrixField a10(H.grid);
    for (std::size_t x = 0; x < H.size(); ++x)
      a10.v[x] = Hinv.v[x] * (dH.v[x] - hs.A01[k].v[x].adjoint() * H.v[x]);
    cc.A10.push_back(a10);
    cc.A01.push_back(hs.A01[k]);
    cc.V10.push_back(hs.Phi[k]);
    cc.V01.push_back(cx(-1.0) * adjoint_h(hs.Phi[k], H));
  }
  GeneralizedConnection conn = assemble_connection(cc);
  conn.hermitian = true;
  return conn;
}

GeneralizedConnection gauge_transform_metric(const Spectral& sp, const GeneralizedConnection& conn0,
                                             const MatrixField& f, const MatrixField& H0) {
  ComplexComponents cc = split_connection(conn0);
  const int n = static_cast<int>(cc.A10.size());
  MatrixField finv(f.grid);
  for (std::size_t x = 0; x < f.size(); ++x) {
    // f is h0-selfadjoint, so positivity is read off the Hermitian matrix H0 f.
    Eigen::MatrixXcd Hf = H0.v[x] * f.v[x];
    if ((Hf - Hf.adjoint()).cwiseAbs().maxCoeff() > 1e-8 || min_eig(hermitize(Hf)) <= 0.0)
      throw std::runtime_error("gauge_transform_metric: f not positive w.r.t. h0");
    finv.v[x] = f.v[x].inverse();
  }
  ComplexComponents out;
  for (int k = 0; k < n; ++k) {
    // D^{1,0}_f = f^{-1} D^{1,0}_0 f: the dz component picks up
    // f^{-1} (dz f + A10 f); the dbar side is untouched. The same conjugation
    // carries -Phi^{*h0} to -Phi^{*h0 f} = f^{-1} V01 f.
    MatrixField df = partial_z(sp, f, k);
    MatrixField a10(f.grid);
    MatrixField v01(f.grid);
    for (std::size_t x = 0; x < f.size(); ++x) {
      a10.v[x] = finv.v[x] * (df.v[x] + cc.A10[k].v[x] * f.v[x]);
      v01.v[x] = finv.v[x] * cc.V01[k].v[x] * f.v[x];
    }
    out.A10.push_back(a10);
    out.A01.push_back(cc.A01[k]);
    out.V10.push_back(cc.V10[k]);
    out.V01.push_back(v01);
  }
  GeneralizedConnection conn = assemble_connection(out);
  conn.hermitian = conn0.hermitian;
  return conn;
}

namespace {

// Constant spin-pair tables of the curvature building blocks against psi.
struct SpinTables {
  cx sp0;
  std::vector<Multivector> two_form;   // theta^a theta^b psi, a < b, flattened
  std::vector<Multivector> mixed;      // theta^a ^ i_k psi
  std::vector<Multivector> twovec;     // i_j i_k psi, j < k
  std::vector<cx> w_two, w_mixed, w_twovec;
  int d = 0;

  SpinTables(const PureSpinor& spinor) {
    const int n = spinor.n;
    d = 2 * n;
    sp0 = spin_pair(spinor.psi, spinor.psibar);
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b) {
        Multivector t = wedge(Multivector::basis(n, (1u << a) | (1u << b)), spinor.psi);
        two_form.push_back(t);
        w_two.push_back(spin_pair(t, spinor.psibar) / sp0);
      }
    for (int a = 0; a < d; ++a)
      for (int k = 0; k < d; ++k) {
        Multivector t = wedge(Multivector::basis(n, 1u << a), interior(k, spinor.psi));
        mixed.push_back(t);
        w_mixed.push_back(spin_pair(t, spinor.psibar) / sp0);
      }
    for (int j = 0; j < d; ++j)
      for (int k = j + 1; k < d; ++k) {
        Multivector t = interior(j, interior(k, spinor.psi));
        twovec.push_back(t);
        w_twovec.push_back(spin_pair(t, spinor.psibar) / sp0);
      }
  }

  int idx_two(int a, int b) const { return (a * (2 * d - a - 1)) / 2 + (b - a - 1); }
  int idx_mixed(int a, int k) const { return a * d + k; }
};

struct CurvatureParts {
  std::vector<MatrixField> F;   // F_ab for a < b, flattened like idx_two
  std::vector<MatrixField> T;   // nabla_a V^k, flattened like idx_mixed
  std::vector<MatrixField> VV;  // [V^j, V^k] for j < k
};

CurvatureParts curvature_parts(const Spectral& sp, const GeneralizedConnection& conn) {
  const int d = static_cast<int>(conn.A.size());
  CurvatureParts parts;
  std::vector<MatrixField> dA(static_cast<std::size_t>(d) * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) dA[a * d + b] = sp.partial(conn.A[b], a);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) {
      MatrixField f = dA[a * d + b] - dA[b * d + a];
      for (std::size_t x = 0; x < f.size(); ++x)
        f.v[x] += conn.A[a].v[x] * conn.A[b].v[x] - conn.A[b].v[x] * conn.A[a].v[x];
      parts.F.push_back(std::move(f));
    }
  for (int a = 0; a < d; ++a)
    for (int k = 0; k < d; ++k) {
      MatrixField t = sp.partial(conn.V[k], a);
      for (std::size_t x = 0; x < t.size(); ++x)
        t.v[x] += conn.A[a].v[x] * conn.V[k].v[x] - conn.V[k].v[x] * conn.A[a].v[x];
      parts.T.push_back(std::move(t));
    }
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      MatrixField f(conn.V[j].grid);
      for (std::size_t x = 0; x < f.size(); ++x)
        f.v[x] = conn.V[j].v[x] * conn.V[k].v[x] - conn.V[k].v[x] * conn.V[j].v[x];
      parts.VV.push_back(std::move(f));
    }
  return parts;
}

}  // namespace

CurvatureData curvature(const Spectral& sp, const GeneralizedConnection& conn,
                        const PureSpinor& spinor, const MatrixField& H) {
  const int r = conn_rank(conn);
  SpinTables tables(spinor);
  CurvatureParts parts = curvature_parts(sp, conn);

  CurvatureData cd;
  cd.Fpsi = Field<MvMatrix>(sp.grid(), MvMatrix(spinor.n, r, r));
  for (std::size_t x = 0; x < cd.Fpsi.size(); ++x) {
    MvMatrix acc(spinor.n, r, r);
    for (std::size_t t = 0; t < parts.F.size(); ++t)
      acc += matrix_times_mv(parts.F[t].v[x], tables.two_form[t]);
    for (std::size_t t = 0; t < parts.T.size(); ++t)
      acc += matrix_times_mv(parts.T[t].v[x], tables.mixed[t]);
    for (std::size_t t = 0; t < parts.VV.size(); ++t)
      acc += matrix_times_mv(parts.VV[t].v[x], tables.twovec[t]);
    cd.Fpsi.v[x] = std::move(acc);
  }
  cd.K = mean_curvature(cd, spinor, H);
  return cd;
}

MatrixField mean_curvature(const CurvatureData& cd, const PureSpinor& spinor,
                           const MatrixField& H) {
  cx sp0 = spin_pair(spinor.psi, spinor.psibar);
  MatrixField S(cd.Fpsi.grid);
  for (std::size_t x = 0; x < S.size(); ++x)
    S.v[x] = spin_pair_matrix(cd.Fpsi.v[x], spinor.psibar) / sp0;
  return herm_project(S, H);
}

MatrixField mean_curvature_fast(const Spectral& sp, const GeneralizedConnection& conn,
                                const PureSpinor& spinor, const MatrixField& H) {
  const int r = conn_rank(conn);
  SpinTables tables(spinor);
  CurvatureParts parts = curvature_parts(sp, conn);
  MatrixField S(sp.grid(), Eigen::MatrixXcd::Zero(r, r));
  for (std::size_t x = 0; x < S.size(); ++x) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(r, r);
    for (std::size_t t = 0; t < parts.F.size(); ++t)
      if (tables.w_two[t] != cx(0.0)) acc += tables.w_two[t] * parts.F[t].v[x];
    for (std::size_t t = 0; t < parts.T.size(); ++t)
      if (tables.w_mixed[t] != cx(0.0)) acc += tables.w_mixed[t] * parts.T[t].v[x];
    for (std::size_t t = 0; t < parts.VV.size(); ++t)
      if (tables.w_twovec[t] != cx(0.0)) acc += tables.w_twovec[t] * parts.VV[t].v[x];
    S.v[x] = acc;
  }
  return herm_project(S, H);
}

DegreeReport degree_slope(const Spectral& sp, const GeneralizedConnection& conn,
                          const PureSpinor& spinor, const MatrixField& H, int rank) {
  const Grid& g = sp.grid();
  DegreeReport rep;
  cx sp0 = spin_pair(spinor.psi, spinor.psibar);
  cx in = std::pow(cx(0, 1), spinor.n);
  double density = (in * sp0).real();  // i^n <psi, bar psi>, constant > 0
  rep.volume = density * g.total_volume();

  MatrixField K = mean_curvature_fast(sp, conn, spinor, H);
  cx trsum(0.0);
  for (const auto& m : K.v) trsum += m.trace();
  rep.degree = (trsum * g.cell_volume() * density).real() / (2.0 * std::numbers::pi);
  rep.mu = rep.degree / rank;
  rep.lambda = 2.0 * std::numbers::pi * rep.degree / (rank * rep.volume);

  // Independent route through the first Chern form: lambda solves
  // (-lambda r / 2 pi i) Int <psi, bar psi> = Int <c1 ^ psi, bar psi> with
  // c1 = (-1/2 pi i) tr F_A. Only the ordinary-curvature part contributes.
  CurvatureParts parts = curvature_parts(sp, conn);
  SpinTables tables(spinor);
  cx pairing_sum(0.0);
  for (std::size_t t = 0; t < parts.F.size(); ++t) {
    cx w = tables.w_two[t] * sp0;  // <theta^a theta^b psi, bar psi>
    if (w == cx(0.0)) continue;
    for (const auto& m : parts.F[t].v) pairing_sum += m.trace() * w;
  }
  cx I_F = pairing_sum * g.cell_volume();
  cx I_0 = sp0 * g.total_volume();
  cx lam = I_F / (double(rank) * I_0);
  rep.lambda_c1 = lam.real();
  rep.c1_imag_defect = std::abs(lam.imag());
  return rep;
}

ResidualReport einstein_residual(const Spectral& sp, const GeneralizedConnection& conn,
                                 const PureSpinor& spinor, const MatrixField& H, double lambda,
                                 const std::optional<Eigen::MatrixXcd>& offset) {
  const int r = conn_rank(conn);
  MatrixField K = mean_curvature_fast(sp, conn, spinor, H);
  ResidualReport rep;
  rep.field = MatrixField(sp.grid());
  double l2 = 0.0;
  for (std::size_t x = 0; x < K.size(); ++x) {
    Eigen::MatrixXcd R = K.v[x] - lambda * Eigen::MatrixXcd::Identity(r, r);
    if (offset) R -= *offset;
    rep.field.v[x] = R;
    // Norms of the h-Hermitian residual, measured after the isometry to
    // plainly Hermitian matrices.
    Eigen::MatrixXcd hs = herm_sqrt(H.v[x]);
    Eigen::MatrixXcd plain = hs * R * hs.inverse();
    rep.sup_norm = std::max(rep.sup_norm, max_abs_eig(plain));
    l2 += plain.squaredNorm();
  }
  rep.l2_norm = std::sqrt(l2 / static_cast<double>(K.size()));
  return rep;
}

GeneralizedConnection b_transform(const GeneralizedConnection& conn, const Eigen::MatrixXd& b2) {
  const int d = static_cast<int>(conn.A.size());
  if (b2.rows() != d || b2.cols() != d) throw std::invalid_argument("b_transform: bad size");
  GeneralizedConnection out = conn;
  // e^b (sum V^k i_k) e^{-b} = sum V^k i_k - sum_j (sum_k V^k b_kj) theta^j.
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      if (b2(k, j) != 0.0)
        for (std::size_t x = 0; x < out.A[j].size(); ++x)
          out.A[j].v[x] -= b2(k, j) * conn.V[k].v[x];
  return out;
}

GeneralizedConnection gauge_transform_frame(const Spectral& sp, const GeneralizedConnection& conn,
                                            const MatrixField& g) {
  const int d = static_cast<int>(conn.A.size());
  MatrixField ginv(g.grid);
  for (std::size_t x = 0; x < g.size(); ++x) ginv.v[x] = g.v[x].inverse();
  GeneralizedConnection out = conn;
  for (int a = 0; a < d; ++a) {
    MatrixField dg = sp.partial(g, a);
    for (std::size_t x = 0; x < g.size(); ++x) {
      out.A[a].v[x] = g.v[x] * conn.A[a].v[x] * ginv.v[x] - dg.v[x] * ginv.v[x];
      out.V[a].v[x] = g.v[x] * conn.V[a].v[x] * ginv.v[x];
    }
  }
  return out;
}

MatrixField metric_transform_frame(const MatrixField& H, const MatrixField& g) {
  MatrixField out(H.grid);
  for (std::size_t x = 0; x < H.size(); ++x) {
    Eigen::MatrixXcd gi = g.v[x].inverse();
    out.v[x] = gi.adjoint() * H.v[x] * gi;
  }
  return out;
}

}  // namespace gk
