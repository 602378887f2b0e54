#pragma once
// Pointwise exterior/Clifford algebra on R^{2n} + dual, complex coefficients.
//
// Basis bookkeeping: generator theta^{k+1} <-> bit k of a uint32 mask, so a
// basis form theta^{i1}^...^theta^{ik} (i1 < ... < ik) is the mask with those
// bits set. All signs come from counting transpositions against this fixed
// ascending order. The top form is theta^1^...^theta^{2n} = full mask.
//
// Convention pinned throughout the project: a generalized vector e = v + xi
// acts by e.a = i_v a + xi ^ a, which gives e.e.a = <e,e> a with
// <v+xi, u+eta> = (xi(u) + eta(v))/2. Do not flip the interior sign; several
// frozen test constants depend on it.

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gk {

using cx = std::complex<double>;

class Multivector {
public:
  Multivector() = default;
  explicit Multivector(int n) : n_(check_dim(n)) {}

  static Multivector scalar(int n, cx c) {
    Multivector a(n);
    if (c != cx(0.0)) a.terms_.push_back({0u, c});
    return a;
  }
  // Single basis term theta^S for bitmask S.
  static Multivector basis(int n, std::uint32_t mask, cx c = cx(1.0)) {
    Multivector a(n);
    if (mask >= (1u << (2 * n))) throw std::invalid_argument("multivector: mask out of range");
    if (c != cx(0.0)) a.terms_.push_back({mask, c});
    return a;
  }

  int dim_n() const { return n_; }
  bool is_zero() const { return terms_.empty(); }
  std::uint32_t full_mask() const { return (1u << (2 * n_)) - 1u; }

  // Terms are kept sorted by mask with no exactly-zero coefficients stored.
  const std::vector<std::pair<std::uint32_t, cx>>& terms() const { return terms_; }

  cx coeff(std::uint32_t mask) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), mask,
                               [](const auto& t, std::uint32_t m) { return t.first < m; });
    return (it != terms_.end() && it->first == mask) ? it->second : cx(0.0);
  }

  void add_term(std::uint32_t mask, cx c) {
    if (c == cx(0.0)) return;
    auto it = std::lower_bound(terms_.begin(), terms_.end(), mask,
                               [](const auto& t, std::uint32_t m) { return t.first < m; });
    if (it != terms_.end() && it->first == mask) {
      it->second += c;
      if (it->second == cx(0.0)) terms_.erase(it);  // exact-zero pruning only
    } else {
      terms_.insert(it, {mask, c});
    }
  }

  Multivector& operator+=(const Multivector& o) {
    require_same_dim(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Multivector& operator-=(const Multivector& o) {
    require_same_dim(o);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  Multivector& operator*=(cx s) {
    if (s == cx(0.0)) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }

  friend Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
  friend Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
  friend Multivector operator*(Multivector a, cx s) { return a *= s; }
  friend Multivector operator*(cx s, Multivector a) { return a *= s; }
  friend Multivector operator-(Multivector a) { return a *= cx(-1.0); }

  double norm1() const {
    double s = 0.0;
    for (const auto& [m, c] : terms_) s += std::abs(c);
    return s;
  }

  void require_same_dim(const Multivector& o) const {
    if (n_ != o.n_) throw std::invalid_argument("multivector: dimension mismatch");
  }

private:
  static int check_dim(int n) {
    if (n < 1 || n > 15) throw std::invalid_argument("multivector: need 1 <= n <= 15");
    return n;
  }
  int n_ = 1;
  std::vector<std::pair<std::uint32_t, cx>> terms_;
};

namespace detail {
// Transpositions needed to sort the concatenation theta^A ^ theta^B: each
// generator b in B hops over every generator of A above it.
inline int wedge_sign(std::uint32_t a, std::uint32_t b) {
  int swaps = 0;
  std::uint32_t bb = b;
  while (bb) {
    int k = std::countr_zero(bb);
    bb &= bb - 1;
    swaps += std::popcount(a >> (k + 1));
  }
  return (swaps & 1) ? -1 : 1;
}
}  // namespace detail

inline Multivector wedge(const Multivector& a, const Multivector& b) {
  a.require_same_dim(b);
  Multivector out(a.dim_n());
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) {
      if (ma & mb) continue;  // repeated generator
      cx c = ca * cb;
      if (detail::wedge_sign(ma, mb) < 0) c = -c;
      out.add_term(ma | mb, c);
    }
  return out;
}

// Interior product with the coordinate vector d/dx_{k+1} (0-based k).
inline Multivector interior(int k, const Multivector& a) {
  if (k < 0 || k >= 2 * a.dim_n()) throw std::invalid_argument("interior: axis out of range");
  Multivector out(a.dim_n());
  const std::uint32_t bit = 1u << k;
  const std::uint32_t below = bit - 1u;
  for (const auto& [m, c] : a.terms()) {
    if (!(m & bit)) continue;
    cx v = (std::popcount(m & below) & 1) ? -c : c;
    out.add_term(m & ~bit, v);
  }
  return out;
}

// Clifford involution: +1 on degree 0,1 mod 4, -1 on degree 2,3 mod 4.
inline Multivector clifford_involution(const Multivector& a) {
  Multivector out(a.dim_n());
  for (const auto& [m, c] : a.terms()) {
    int d = std::popcount(m) & 3;
    out.add_term(m, (d == 2 || d == 3) ? -c : c);
  }
  return out;
}

// Coefficient of the top form in a ^ sigma(b). The caller conjugates the
// second slot where a formula says "psi bar"; this function never conjugates.
inline cx spin_pair(const Multivector& a, const Multivector& b) {
  a.require_same_dim(b);
  const std::uint32_t full = a.full_mask();
  cx out(0.0);
  for (const auto& [ma, ca] : a.terms()) {
    const std::uint32_t mb = full & ~ma;
    cx cb = b.coeff(mb);
    if (cb == cx(0.0)) continue;
    int d = std::popcount(mb) & 3;
    if (d == 2 || d == 3) cb = -cb;
    cx c = ca * cb;
    if (detail::wedge_sign(ma, mb) < 0) c = -c;
    out += c;
  }
  return out;
}

inline Multivector conj(const Multivector& a) {
  Multivector out(a.dim_n());
  for (const auto& [m, c] : a.terms()) out.add_term(m, std::conj(c));
  return out;
}

inline Multivector grade(const Multivector& a, int k) {
  Multivector out(a.dim_n());
  for (const auto& [m, c] : a.terms())
    if (std::popcount(m) == k) out.add_term(m, c);
  return out;
}

// Minimal degree with a nonzero term (the "type" of a spinor at a point).
inline int type_number(const Multivector& a) {
  if (a.is_zero()) throw std::invalid_argument("type_number: zero multivector");
  int best = 2 * a.dim_n() + 1;
  for (const auto& [m, c] : a.terms()) best = std::min(best, std::popcount(m));
  return best;
}

// An element v + xi of (T + T*) x C, components against d/dx_k and theta^k.
struct GeneralizedVector {
  Eigen::VectorXcd v;   // vector part, size 2n
  Eigen::VectorXcd xi;  // covector part, size 2n

  explicit GeneralizedVector(int n)
      : v(Eigen::VectorXcd::Zero(2 * n)), xi(Eigen::VectorXcd::Zero(2 * n)) {}
  GeneralizedVector(Eigen::VectorXcd v_, Eigen::VectorXcd xi_)
      : v(std::move(v_)), xi(std::move(xi_)) {
    if (v.size() != xi.size()) throw std::invalid_argument("generalized vector: size mismatch");
  }
  int dim_n() const { return static_cast<int>(v.size()) / 2; }
};

// <v+xi, u+eta> = (xi(u) + eta(v))/2; bilinear, no conjugation.
inline cx pairing(const GeneralizedVector& a, const GeneralizedVector& b) {
  return 0.5 * (a.xi.transpose() * b.v + b.xi.transpose() * a.v).value();
}

inline GeneralizedVector conj(const GeneralizedVector& e) {
  return GeneralizedVector(e.v.conjugate(), e.xi.conjugate());
}

inline Multivector clifford_act(const GeneralizedVector& e, const Multivector& a) {
  if (e.dim_n() != a.dim_n()) throw std::invalid_argument("clifford_act: dimension mismatch");
  Multivector out(a.dim_n());
  for (int k = 0; k < 2 * a.dim_n(); ++k)
    if (e.v[k] != cx(0.0)) out += e.v[k] * interior(k, a);
  Multivector form(a.dim_n());
  for (int k = 0; k < 2 * a.dim_n(); ++k)
    if (e.xi[k] != cx(0.0)) form.add_term(1u << k, e.xi[k]);
  if (!form.is_zero()) out += wedge(form, a);
  return out;
}

// Matrix of multivectors; doubles as End(E)-valued forms (rows == cols) and
// E-valued forms (cols == 1). Entrywise products wedge the form parts while
// composing the matrix parts.
struct MvMatrix {
  int n = 1, rows = 0, cols = 0;
  std::vector<Multivector> m;

  MvMatrix() = default;
  MvMatrix(int n_, int rows_, int cols_)
      : n(n_), rows(rows_), cols(cols_), m(static_cast<size_t>(rows_) * cols_, Multivector(n_)) {}

  Multivector& at(int i, int j) { return m[static_cast<size_t>(i) * cols + j]; }
  const Multivector& at(int i, int j) const { return m[static_cast<size_t>(i) * cols + j]; }

  MvMatrix& operator+=(const MvMatrix& o) {
    check_shape(o);
    for (size_t i = 0; i < m.size(); ++i) m[i] += o.m[i];
    return *this;
  }
  MvMatrix& operator-=(const MvMatrix& o) {
    check_shape(o);
    for (size_t i = 0; i < m.size(); ++i) m[i] -= o.m[i];
    return *this;
  }
  MvMatrix& operator*=(cx s) {
    for (auto& e : m) e *= s;
    return *this;
  }
  friend MvMatrix operator+(MvMatrix a, const MvMatrix& b) { return a += b; }
  friend MvMatrix operator-(MvMatrix a, const MvMatrix& b) { return a -= b; }
  friend MvMatrix operator*(cx s, MvMatrix a) { return a *= s; }

  double norm1() const {
    double s = 0.0;
    for (const auto& e : m) s += e.norm1();
    return s;
  }

  void check_shape(const MvMatrix& o) const {
    if (rows != o.rows || cols != o.cols || n != o.n)
      throw std::invalid_argument("mvmatrix: shape mismatch");
  }
};

inline MvMatrix matrix_times_mv(const Eigen::MatrixXcd& M, const Multivector& a) {
  MvMatrix out(a.dim_n(), static_cast<int>(M.rows()), static_cast<int>(M.cols()));
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j)
      if (M(i, j) != cx(0.0)) out.at(i, j) = M(i, j) * a;
  return out;
}

inline MvMatrix matrix_left(const Eigen::MatrixXcd& M, const MvMatrix& Z) {
  if (M.cols() != Z.rows) throw std::invalid_argument("matrix_left: shape mismatch");
  MvMatrix out(Z.n, static_cast<int>(M.rows()), Z.cols);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j)
      for (int k = 0; k < Z.rows; ++k)
        if (M(i, k) != cx(0.0)) out.at(i, j) += M(i, k) * Z.at(k, j);
  return out;
}

inline MvMatrix matrix_right(const MvMatrix& Z, const Eigen::MatrixXcd& M) {
  if (Z.cols != M.rows()) throw std::invalid_argument("matrix_right: shape mismatch");
  MvMatrix out(Z.n, Z.rows, static_cast<int>(M.cols()));
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j)
      for (int k = 0; k < Z.cols; ++k)
        if (M(k, j) != cx(0.0)) out.at(i, j) += Z.at(i, k) * M(k, j);
  return out;
}

// (A . B)_{ij} = sum_k A_{ik} ^ B_{kj}; matrix composition with wedge.
inline MvMatrix mv_matmul(const MvMatrix& A, const MvMatrix& B) {
  if (A.cols != B.rows || A.n != B.n) throw std::invalid_argument("mv_matmul: shape mismatch");
  MvMatrix out(A.n, A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < B.cols; ++j)
      for (int k = 0; k < A.cols; ++k) out.at(i, j) += wedge(A.at(i, k), B.at(k, j));
  return out;
}

inline MvMatrix mv_wedge_left(const Multivector& a, const MvMatrix& Z) {
  MvMatrix out(Z.n, Z.rows, Z.cols);
  for (size_t i = 0; i < Z.m.size(); ++i) out.m[i] = wedge(a, Z.m[i]);
  return out;
}

inline MvMatrix interior_entrywise(int k, const MvMatrix& Z) {
  MvMatrix out(Z.n, Z.rows, Z.cols);
  for (size_t i = 0; i < Z.m.size(); ++i) out.m[i] = interior(k, Z.m[i]);
  return out;
}

inline MvMatrix clifford_entrywise(const GeneralizedVector& e, const MvMatrix& Z) {
  MvMatrix out(Z.n, Z.rows, Z.cols);
  for (size_t i = 0; i < Z.m.size(); ++i) out.m[i] = clifford_act(e, Z.m[i]);
  return out;
}

inline MvMatrix conj(const MvMatrix& Z) {
  MvMatrix out(Z.n, Z.rows, Z.cols);
  for (size_t i = 0; i < Z.m.size(); ++i) out.m[i] = conj(Z.m[i]);
  return out;
}

// Entrywise spin pairing against a fixed spinor (second slot pre-conjugated
// by the caller, as everywhere else).
inline Eigen::MatrixXcd spin_pair_matrix(const MvMatrix& Z, const Multivector& b) {
  Eigen::MatrixXcd out(Z.rows, Z.cols);
  for (int i = 0; i < Z.rows; ++i)
    for (int j = 0; j < Z.cols; ++j) out(i, j) = spin_pair(Z.at(i, j), b);
  return out;
}

}  // namespace gk
