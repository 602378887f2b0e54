#include "gk/stability.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "gk/linalg.hpp"
#include "gk/multivector.hpp"

namespace gk {
namespace {

Eigen::MatrixXcd comm(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return a * b - b * a;
}

// h-weighted Frobenius norm squared tr(X^{*h} X); equals |G X G^{-1}|_F^2 for
// G = h^{1/2}, so it is real and nonnegative for positive definite H.
double h_frob2(const Eigen::MatrixXcd& X, const Eigen::MatrixXcd& H) {
  return (H.inverse() * X.adjoint() * H * X).trace().real();
}

double h_vec2(const Eigen::MatrixXcd& v, const Eigen::MatrixXcd& H) {
  return (v.adjoint() * H * v)(0, 0).real();
}

// Components of (1 - pi) dbar pi in the A01 and Phi slots of the connection,
// squared and summed pointwise. Shared by the residual report and the
// precondition guard of the second-fundamental-form machinery.
double dbar_defect2_mean(const Spectral& sp, const MatrixField& pi,
                         const std::vector<MatrixField>& A01, const std::vector<MatrixField>& Phi,
                         const MatrixField& H) {
  const Grid& g = sp.grid();
  const int r = static_cast<int>(pi.v[0].rows());
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(r, r);
  double acc = 0.0;
  for (int k = 0; k < g.n; ++k) {
    MatrixField db = partial_zbar(sp, pi, k);
    for (std::size_t x = 0; x < pi.size(); ++x) {
      Eigen::MatrixXcd q = id - pi.v[x];
      acc += h_frob2(q * (db.v[x] + comm(A01[k].v[x], pi.v[x])), H.v[x]);
      acc += h_frob2(q * comm(Phi[k].v[x], pi.v[x]), H.v[x]);
    }
  }
  return acc / double(pi.size());
}

// Block-diagonalization of a generalized connection along pi: the mixed blocks
// of A are replaced by the derivative terms that make D preserve both S and
// Sperp exactly (for an exactly idempotent pi), V keeps only its diagonal
// blocks.
GeneralizedConnection block_connection(const Spectral& sp, const GeneralizedConnection& conn,
                                       const MatrixField& pi) {
  const Grid& g = sp.grid();
  const int r = static_cast<int>(pi.v[0].rows());
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(r, r);
  GeneralizedConnection out;
  out.hermitian = conn.hermitian;
  for (int a = 0; a < 2 * g.n; ++a) {
    MatrixField dpi = sp.partial(pi, a);
    MatrixField Aa(g);
    for (std::size_t x = 0; x < pi.size(); ++x) {
      const Eigen::MatrixXcd& p = pi.v[x];
      Eigen::MatrixXcd q = id - p;
      Aa.v[x] = p * conn.A[a].v[x] * p + q * conn.A[a].v[x] * q + (2.0 * p - id) * dpi.v[x];
    }
    out.A.push_back(Aa);
  }
  for (int k = 0; k < 2 * g.n; ++k) {
    MatrixField Vk(g);
    for (std::size_t x = 0; x < pi.size(); ++x) {
      const Eigen::MatrixXcd& p = pi.v[x];
      Eigen::MatrixXcd q = id - p;
      Vk.v[x] = p * conn.V[k].v[x] * p + q * conn.V[k].v[x] * q;
    }
    out.V.push_back(Vk);
  }
  return out;
}

// h<Z1, Z2> = sum_{a,b} H(b,a) Z1_a ^ sigma(conj Z2_b) for column sections
// tensored with forms; the _s variant keeps only the top coefficient.
Multivector h_pair_form(const MvMatrix& Z1, const MvMatrix& Z2, const Eigen::MatrixXcd& H) {
  const int r = Z1.rows;
  Multivector acc(Z1.n);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) {
      cx c = H(b, a);
      if (c == cx(0.0)) continue;
      acc += c * wedge(Z1.at(a, 0), clifford_involution(conj(Z2.at(b, 0))));
    }
  return acc;
}

cx h_pair_top(const MvMatrix& Z1, const MvMatrix& Z2, const Eigen::MatrixXcd& H) {
  Multivector p = h_pair_form(Z1, Z2, H);
  return p.coeff(p.full_mask());
}

}  // namespace

SubbundleProjector make_projector(const MatrixField& pi, const MatrixField& H, double tol) {
  const int r = static_cast<int>(pi.v[0].rows());
  double idem = 0.0, herm = 0.0;
  for (std::size_t x = 0; x < pi.size(); ++x) {
    idem = std::max(idem, (pi.v[x] - pi.v[x] * pi.v[x]).norm());
    herm = std::max(herm, (pi.v[x] - adjoint_h(pi.v[x], H.v[x])).norm());
  }
  if (idem > tol || herm > tol) {
    std::ostringstream os;
    os << "make_projector: pi - pi^2 sup " << idem << ", pi - pi^{*h} sup " << herm
       << " exceed tolerance " << tol;
    throw std::runtime_error(os.str());
  }
  int rank = -1;
  for (std::size_t x = 0; x < pi.size(); ++x) {
    // conjugate to an honest Hermitian projector before counting eigenvalues
    Eigen::MatrixXcd G = herm_sqrt(H.v[x]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        hermitize(G * pi.v[x] * G.inverse()));
    int p = 0;
    for (int i = 0; i < r; ++i)
      if (es.eigenvalues()(i) > 0.5) ++p;
    if (rank < 0) rank = p;
    if (p != rank)
      throw std::runtime_error("make_projector: pointwise rank is not constant");
  }
  SubbundleProjector out;
  out.pi = pi;
  out.rank = rank;
  return out;
}

WeakHolomorphyResidual weak_holomorphy_residual(const Spectral& sp, const MatrixField& pi,
                                                const GeneralizedHolomorphicStructure& hs,
                                                const MatrixField& H) {
  WeakHolomorphyResidual out;
  double idem = 0.0, herm = 0.0;
  for (std::size_t x = 0; x < pi.size(); ++x) {
    idem += h_frob2(pi.v[x] - pi.v[x] * pi.v[x], H.v[x]);
    herm += h_frob2(pi.v[x] - adjoint_h(pi.v[x], H.v[x]), H.v[x]);
  }
  out.idempotency = std::sqrt(idem / double(pi.size()));
  out.hermiticity = std::sqrt(herm / double(pi.size()));
  out.holomorphy = std::sqrt(dbar_defect2_mean(sp, pi, hs.A01, hs.Phi, H));
  return out;
}

SecondFundamentalForm second_fundamental_form(const Spectral& sp,
                                              const GeneralizedKaehlerPair& gkp,
                                              const SubbundleProjector& sub,
                                              const GeneralizedConnection& conn,
                                              const MatrixField& H) {
  const Grid& g = sp.grid();
  const int n = g.n;
  const MatrixField& pi = sub.pi;
  const int r = static_cast<int>(pi.v[0].rows());
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(r, r);

  ComplexComponents cc = split_connection(conn);
  double hol = std::sqrt(dbar_defect2_mean(sp, pi, cc.A01, cc.V10, H));
  if (hol > 1e-3) {
    std::ostringstream os;
    os << "second_fundamental_form: pi is not weakly holomorphic, dbar residual " << hol;
    throw std::runtime_error(os.str());
  }

  // Mixed-block tensor along each slot of D = d + A + V.
  std::vector<MatrixField> T, gam;
  for (int a = 0; a < 2 * n; ++a) {
    MatrixField Ta = sp.partial(pi, a);
    for (std::size_t x = 0; x < pi.size(); ++x) Ta.v[x] += comm(conn.A[a].v[x], pi.v[x]);
    T.push_back(Ta);
  }
  for (int k = 0; k < 2 * n; ++k) {
    MatrixField gk_(g);
    for (std::size_t x = 0; x < pi.size(); ++x) gk_.v[x] = comm(conn.V[k].v[x], pi.v[x]);
    gam.push_back(gk_);
  }

  // Coefficient along a dual element y: <X, y> = (1/2)[sum_a y.v_a T_a +
  // sum_k y.xi_k gam_k], compressed to Hom(S, Sperp). The frame coefficient
  // carries one more 1/2 from <u_i, bar w_j> = 2 delta.
  auto component = [&](const GeneralizedVector& y) {
    MatrixField out(g);
    for (std::size_t x = 0; x < pi.size(); ++x) {
      Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(r, r);
      for (int a = 0; a < 2 * n; ++a) {
        if (y.v(a) != cx(0.0)) m += y.v(a) * T[a].v[x];
        if (y.xi(a) != cx(0.0)) m += y.xi(a) * gam[a].v[x];
      }
      out.v[x] = 0.25 * ((id - pi.v[x]) * m * pi.v[x]);
    }
    return out;
  };

  SecondFundamentalForm sff;
  sff.energy_density = ScalarField(g, cx(0.0));
  for (int i = 0; i < n; ++i) sff.Hs.push_back(component(conj(frame_w(gkp, i))));
  for (int i = 0; i < n; ++i) sff.Hs.push_back(component(conj(frame_u(gkp, i))));
  for (const MatrixField& Hi : sff.Hs) {
    MatrixField Hp(g);
    for (std::size_t x = 0; x < pi.size(); ++x) {
      Hp.v[x] = -adjoint_h(Hi.v[x], H.v[x]);
      sff.energy_density.v[x] += cx(2.0 * h_frob2(Hi.v[x], H.v[x]), 0.0);
    }
    sff.HsPerp.push_back(Hp);
  }
  return sff;
}

SubcurvatureReport subcurvature_identity(const Spectral& sp, const GeneralizedKaehlerPair& gkp,
                                         const SubbundleProjector& sub,
                                         const GeneralizedConnection& conn,
                                         const MatrixField& H) {
  const Grid& g = sp.grid();
  SecondFundamentalForm sff = second_fundamental_form(sp, gkp, sub, conn, H);
  MatrixField K = mean_curvature_fast(sp, conn, gkp.sp, H);
  GeneralizedConnection tilde = block_connection(sp, conn, sub.pi);
  MatrixField Kt = mean_curvature_fast(sp, tilde, gkp.sp, H);

  SubcurvatureReport rep;
  rep.lhs = ScalarField(g);
  rep.rhs = ScalarField(g);
  for (std::size_t x = 0; x < K.size(); ++x) {
    rep.lhs.v[x] = cx((K.v[x] * sub.pi.v[x]).trace().real(), 0.0);
    rep.rhs.v[x] = cx((Kt.v[x] * sub.pi.v[x]).trace().real() +
                          sff.energy_density.v[x].real(),
                      0.0);
    rep.sup_residual = std::max(rep.sup_residual, std::abs(rep.lhs.v[x] - rep.rhs.v[x]));
  }
  return rep;
}

SlopeReport slope_inequality(const Spectral& sp, const GeneralizedKaehlerPair& gkp,
                             const SubbundleProjector& sub, const GeneralizedConnection& conn,
                             const MatrixField& H, const Eigen::MatrixXcd& offset) {
  const Grid& g = sp.grid();
  const int r = static_cast<int>(sub.pi.v[0].rows());
  const int p = sub.rank;
  if (p <= 0) throw std::runtime_error("slope_inequality: projector rank must be positive");

  Eigen::MatrixXcd off = offset.size() ? offset : Eigen::MatrixXcd::Zero(r, r);
  cx sp0 = spin_pair(gkp.sp.psi, gkp.sp.psibar);
  double density = (std::pow(cx(0, 1), gkp.sp.n) * sp0).real();
  const double cell = g.cell_volume();
  const double two_pi = 2.0 * std::numbers::pi;

  SecondFundamentalForm sff = second_fundamental_form(sp, gkp, sub, conn, H);
  MatrixField K = mean_curvature_fast(sp, conn, gkp.sp, H);
  GeneralizedConnection tilde = block_connection(sp, conn, sub.pi);
  MatrixField Kt = mean_curvature_fast(sp, tilde, gkp.sp, H);

  double tr_E = 0.0, tr_S = 0.0, tr_lhs = 0.0, en = 0.0;
  for (std::size_t x = 0; x < K.size(); ++x) {
    tr_E += (K.v[x] - off).trace().real();
    tr_S += ((Kt.v[x] - off) * sub.pi.v[x]).trace().real();
    tr_lhs += ((K.v[x] - off) * sub.pi.v[x]).trace().real();
    en += sff.energy_density.v[x].real();
  }
  SlopeReport rep;
  rep.mu_E = tr_E * cell * density / (two_pi * r);
  rep.mu_S = tr_S * cell * density / (two_pi * p);
  rep.energy = en * cell * density / two_pi;
  double mu_lhs = tr_lhs * cell * density / (two_pi * p);
  rep.gap_residual = std::abs(mu_lhs - rep.mu_S - rep.energy / p);
  rep.destabilizing = rep.mu_S >= rep.mu_E - 1e-12;
  return rep;
}

void IdentitySuiteReport::add(const std::string& name, double residual, double tolerance) {
  IdentityRow row;
  row.name = name;
  row.residual = residual;
  row.tolerance = tolerance;
  row.pass = residual <= tolerance;
  rows.push_back(row);
  all_pass = all_pass && row.pass;
}

IdentitySuiteReport vanishing_identity_suite(const Spectral& sp,
                                             const GeneralizedKaehlerPair& gkp0,
                                             const GeneralizedConnection& conn0,
                                             const MatrixField& H, const MatrixField& s) {
  // Every identity below is stated against psi = e^{-i omega}; a nonzero
  // background b-field is removed by the joint inverse shear first, which
  // changes none of the reported quantities for Hermitian connections.
  GeneralizedKaehlerPair gkp = gkp0;
  GeneralizedConnection conn = conn0;
  if (gkp0.sp.b.norm() > 0.0) {
    Eigen::MatrixXd back = -gkp0.sp.b;
    gkp = b_transform(gkp0, back);
    conn = b_transform(conn0, back);
  }

  const Grid& g = sp.grid();
  const int n = g.n;
  const int r = static_cast<int>(s.v[0].rows());
  const Multivector& psi = gkp.sp.psi;
  cx sp0 = spin_pair(gkp.sp.psi, gkp.sp.psibar);
  double density = (std::pow(cx(0, 1), n) * sp0).real();
  const double cell = g.cell_volume();

  // omega-contracted vector slot and the two ordinary connections D' and D''.
  std::vector<MatrixField> omV, Ap, App;
  for (int a = 0; a < 2 * n; ++a) {
    MatrixField w(g, Eigen::MatrixXcd::Zero(r, r));
    for (int k = 0; k < 2 * n; ++k) {
      double c = gkp.sp.omega(k, a);
      if (c == 0.0) continue;
      for (std::size_t x = 0; x < w.size(); ++x) w.v[x] += c * conn.V[k].v[x];
    }
    omV.push_back(w);
    MatrixField ap(g), app(g);
    for (std::size_t x = 0; x < w.size(); ++x) {
      ap.v[x] = conn.A[a].v[x] + cx(0, 1) * w.v[x];
      app.v[x] = conn.A[a].v[x] - cx(0, 1) * w.v[x];
    }
    Ap.push_back(ap);
    App.push_back(app);
  }

  auto theta = [&](int a) { return Multivector::basis(n, 1u << a); };
  auto d_conn = [&](const std::vector<MatrixField>& Af, const Field<MvMatrix>& Z) {
    Field<MvMatrix> out = exterior_d(sp, Z);
    for (int a = 0; a < 2 * n; ++a)
      for (std::size_t x = 0; x < Z.size(); ++x)
        out.v[x] += mv_wedge_left(theta(a), matrix_left(Af[a].v[x], Z.v[x]));
    return out;
  };

  Field<MvMatrix> Z(g);
  for (std::size_t x = 0; x < s.size(); ++x) Z.v[x] = matrix_times_mv(s.v[x], psi);

  Field<MvMatrix> dpZ = d_conn(Ap, Z);
  Field<MvMatrix> dppZ = d_conn(App, Z);
  Field<MvMatrix> dpp_dpZ = d_conn(App, dpZ);
  Field<MvMatrix> dp_dppZ = d_conn(Ap, dppZ);

  // Curvature side 2(F_A + omega(V) ^ omega(V)) Z.
  Field<MvMatrix> curvZ(g);
  for (std::size_t x = 0; x < Z.size(); ++x) curvZ.v[x] = MvMatrix(n, r, 1);
  for (int a = 0; a < 2 * n; ++a)
    for (int b = a + 1; b < 2 * n; ++b) {
      MatrixField Fab = sp.partial(conn.A[b], a) - sp.partial(conn.A[a], b);
      Multivector tt = wedge(theta(a), theta(b));
      for (std::size_t x = 0; x < Z.size(); ++x) {
        Eigen::MatrixXcd m = Fab.v[x] + comm(conn.A[a].v[x], conn.A[b].v[x]) +
                             comm(omV[a].v[x], omV[b].v[x]);
        curvZ.v[x] += mv_wedge_left(tt, matrix_left(2.0 * m, Z.v[x]));
      }
    }

  IdentitySuiteReport rep;

  double anti = 0.0;
  for (std::size_t x = 0; x < Z.size(); ++x)
    anti = std::max(anti, (dpp_dpZ.v[x] + dp_dppZ.v[x] - curvZ.v[x]).norm1());
  rep.add("anticommutator", anti, 1e-9);

  // Section-level Leibniz rule d h(s, s) = h(D' s, s) + h(s, D'' s).
  double leib0 = 0.0;
  ScalarField hss(g);
  for (std::size_t x = 0; x < s.size(); ++x)
    hss.v[x] = (s.v[x].adjoint() * H.v[x] * s.v[x])(0, 0);
  for (int a = 0; a < 2 * n; ++a) {
    ScalarField dh = sp.partial(hss, a);
    MatrixField ds = sp.partial(s, a);
    for (std::size_t x = 0; x < s.size(); ++x) {
      Eigen::MatrixXcd dps = ds.v[x] + Ap[a].v[x] * s.v[x];
      Eigen::MatrixXcd dpps = ds.v[x] + App[a].v[x] * s.v[x];
      cx rhs = (s.v[x].adjoint() * H.v[x] * dps)(0, 0) + (dpps.adjoint() * H.v[x] * s.v[x])(0, 0);
      leib0 = std::max(leib0, std::abs(dh.v[x] - rhs));
    }
  }
  rep.add("section_leibniz", leib0, 1e-9);

  // Top-degree pairing rules: (d h<d^{D'}Z, Z>)_top = h<d^{D''}d^{D'}Z, Z>_s
  // - h<d^{D'}Z, d^{D'}Z>_s, and the mirrored statement.
  auto pairing_row = [&](const Field<MvMatrix>& dZ, const Field<MvMatrix>& ddZ) {
    Field<Multivector> W(g);
    for (std::size_t x = 0; x < Z.size(); ++x) W.v[x] = h_pair_form(dZ.v[x], Z.v[x], H.v[x]);
    Field<Multivector> dW = exterior_d(sp, W);
    double worst = 0.0;
    for (std::size_t x = 0; x < Z.size(); ++x) {
      cx lhs = dW.v[x].coeff(dW.v[x].full_mask());
      cx rhs = h_pair_top(ddZ.v[x], Z.v[x], H.v[x]) - h_pair_top(dZ.v[x], dZ.v[x], H.v[x]);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
  };
  rep.add("pairing_leibniz_dprime", pairing_row(dpZ, dpp_dpZ), 1e-9);
  rep.add("pairing_leibniz_dsecond", pairing_row(dppZ, dp_dppZ), 1e-9);

  // Integrated balance: int h<2(F_A + omega(V)^2) Z, Z>_s equals the sum of
  // the two energy integrals (exact forms integrate to zero spectrally).
  cx IF(0.0), Ep(0.0), Epp(0.0);
  for (std::size_t x = 0; x < Z.size(); ++x) {
    IF += h_pair_top(curvZ.v[x], Z.v[x], H.v[x]);
    Ep += h_pair_top(dpZ.v[x], dpZ.v[x], H.v[x]);
    Epp += h_pair_top(dppZ.v[x], dppZ.v[x], H.v[x]);
  }
  rep.add("energy_balance", std::abs(IF - Ep - Epp) * cell, 1e-8);

  // Holomorphy defect of s against the connection's own D^{0,1} slots.
  ComplexComponents cc = split_connection(conn);
  double hol2 = 0.0;
  for (int k = 0; k < n; ++k) {
    MatrixField db = partial_zbar(sp, s, k);
    for (std::size_t x = 0; x < s.size(); ++x) {
      hol2 += h_vec2(db.v[x] + cc.A01[k].v[x] * s.v[x], H.v[x]);
      hol2 += h_vec2(cc.V01[k].v[x] * s.v[x], H.v[x]);
    }
  }
  double hol = std::sqrt(hol2 / double(s.size()));

  if (hol < 1e-6) {
    // Density-form positivity holds pointwise for holomorphic sections; the
    // ratios are real up to roundoff, so track the imaginary defect too.
    double min_p = 0.0, min_pp = 0.0, imag_defect = 0.0;
    double e_sum = 0.0;
    for (std::size_t x = 0; x < Z.size(); ++x) {
      cx rp = h_pair_top(dpZ.v[x], dpZ.v[x], H.v[x]) / sp0;
      cx rpp = h_pair_top(dppZ.v[x], dppZ.v[x], H.v[x]) / sp0;
      min_p = std::min(min_p, rp.real());
      min_pp = std::min(min_pp, rpp.real());
      imag_defect = std::max(imag_defect, std::max(std::abs(rp.imag()), std::abs(rpp.imag())));
      e_sum += (rp.real() + rpp.real());
    }
    rep.add("density_positivity_dprime", -min_p + imag_defect, 1e-10);
    rep.add("density_positivity_dsecond", -min_pp + imag_defect, 1e-10);

    DegreeReport dr = degree_slope(sp, conn, gkp.sp, H, r);
    ResidualReport rr = einstein_residual(sp, conn, gkp.sp, H, dr.lambda);
    if (rr.sup_norm < 1e-6 && std::abs(dr.lambda) < 1e-8) {
      // Einstein with lambda = 0: holomorphic sections are parallel, so both
      // energies vanish.
      rep.add("parallel_energy", e_sum * cell * density, 1e-10);
    }
  }
  return rep;
}

SectionSearch holomorphic_section_least_squares(const Spectral& sp,
                                                const GeneralizedHolomorphicStructure& hs) {
  const Grid& g = sp.grid();
  const int n = g.n;
  const int r = static_cast<int>(hs.A01[0].v[0].rows());
  const std::size_t nodes = g.nodes();
  const int D = static_cast<int>(nodes) * r;
  if (D > 4096)
    throw std::runtime_error("holomorphic_section_least_squares: grid too large for dense solve");

  auto unpack = [&](const Eigen::VectorXcd& c) {
    MatrixField f(g, Eigen::MatrixXcd::Zero(r, 1));
    for (std::size_t x = 0; x < nodes; ++x)
      for (int i = 0; i < r; ++i) f.v[x](i, 0) = c(static_cast<int>(x) * r + i);
    return f;
  };

  // Stack (dbar_k + A01_k) s over k, then Phi_k s; the Rayleigh quotient of
  // the normal operator is grid-measure independent.
  Eigen::MatrixXcd W(2 * n * D, D);
  for (int j = 0; j < D; ++j) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(D);
    e(j) = cx(1.0);
    MatrixField f = unpack(e);
    int row0 = 0;
    for (int k = 0; k < n; ++k) {
      MatrixField db = partial_zbar(sp, f, k);
      for (std::size_t x = 0; x < nodes; ++x) {
        Eigen::MatrixXcd val = db.v[x] + hs.A01[k].v[x] * f.v[x];
        for (int i = 0; i < r; ++i) W(row0 + static_cast<int>(x) * r + i, j) = val(i, 0);
      }
      row0 += D;
    }
    for (int k = 0; k < n; ++k) {
      for (std::size_t x = 0; x < nodes; ++x) {
        Eigen::MatrixXcd val = hs.Phi[k].v[x] * f.v[x];
        for (int i = 0; i < r; ++i) W(row0 + static_cast<int>(x) * r + i, j) = val(i, 0);
      }
      row0 += D;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W.adjoint() * W);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("holomorphic_section_least_squares: eigensolver failed");
  SectionSearch out;
  out.min_residual = std::sqrt(std::max(0.0, es.eigenvalues()(0)));
  out.s = unpack(es.eigenvectors().col(0));
  return out;
}

}  // namespace gk
