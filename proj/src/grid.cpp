#include "gk/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace gk {

Grid::Grid(int n_, int N_, std::vector<double> periods_) : n(n_), N(N_), periods(std::move(periods_)) {
  if (n < 1 || n > 4) throw std::invalid_argument("grid: need 1 <= n <= 4");
  if (N < 8 || N % 2 != 0) throw std::invalid_argument("grid: N must be even and >= 8");
  if (periods.empty()) periods.assign(dims(), 2.0 * std::numbers::pi);
  if (static_cast<int>(periods.size()) != dims())
    throw std::invalid_argument("grid: need one period per axis");
  for (double p : periods)
    if (!(p > 0.0)) throw std::invalid_argument("grid: periods must be positive");
}

std::size_t Grid::index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (int d = 0; d < dims(); ++d) {
    int i = idx[d] % N;
    if (i < 0) i += N;
    flat = flat * N + static_cast<std::size_t>(i);
  }
  return flat;
}

std::vector<int> Grid::unflatten(std::size_t flat) const {
  std::vector<int> idx(dims());
  for (int d = dims() - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(flat % N);
    flat /= N;
  }
  return idx;
}

bool operator==(const Grid& a, const Grid& b) {
  return a.n == b.n && a.N == b.N && a.periods == b.periods;
}

namespace {

// Signed integer mode for slot i on an N-point axis.
int mode_of(int i, int N) { return i <= N / 2 ? i : i - N; }

}  // namespace

Spectral::Spectral(const Grid& g) : grid_(g) {
  const int rank = g.dims();
  std::vector<int> shape(rank, g.N);
  work_ = reinterpret_cast<cx*>(fftw_malloc(sizeof(fftw_complex) * g.nodes()));
  if (!work_) throw std::runtime_error("spectral: allocation failed");
  auto* w = reinterpret_cast<fftw_complex*>(work_);
  plan_fwd_ = fftw_plan_dft(rank, shape.data(), w, w, FFTW_FORWARD, FFTW_ESTIMATE);
  plan_bwd_ = fftw_plan_dft(rank, shape.data(), w, w, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!plan_fwd_ || !plan_bwd_) throw std::runtime_error("spectral: plan creation failed");
}

Spectral::~Spectral() {
  if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
  if (work_) fftw_free(work_);
}

void Spectral::forward(std::vector<cx>& buf) const {
  std::copy(buf.begin(), buf.end(), work_);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  std::copy(work_, work_ + buf.size(), buf.begin());
}

void Spectral::backward(std::vector<cx>& buf) const {
  std::copy(buf.begin(), buf.end(), work_);
  fftw_execute(static_cast<fftw_plan>(plan_bwd_));
  const double scale = 1.0 / static_cast<double>(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = work_[i] * scale;
}

template <class Fn>
void Spectral::apply_symbol(std::vector<cx>& buf, const Fn& symbol) const {
  forward(buf);
  const int d = grid_.dims(), N = grid_.N;
  std::vector<int> idx(d, 0);
  std::vector<double> k(d, 0.0);
  for (std::size_t flat = 0; flat < buf.size(); ++flat) {
    std::size_t rest = flat;
    for (int a = d - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rest % N);
      rest /= N;
    }
    for (int a = 0; a < d; ++a)
      k[a] = 2.0 * std::numbers::pi * mode_of(idx[a], N) / grid_.periods[a];
    buf[flat] *= symbol(idx, k);
  }
  backward(buf);
}

ScalarField Spectral::partial(const ScalarField& f, int axis) const {
  if (!(f.grid == grid_)) throw std::invalid_argument("spectral: grid mismatch");
  if (axis < 0 || axis >= grid_.dims()) throw std::invalid_argument("spectral: bad axis");
  ScalarField out = f;
  const int N = grid_.N;
  apply_symbol(out.v, [&](const std::vector<int>& idx, const std::vector<double>& k) {
    if (idx[axis] == N / 2) return cx(0.0);  // drop the unpaired Nyquist mode
    return cx(0.0, k[axis]);
  });
  return out;
}

MatrixField Spectral::partial(const MatrixField& f, int axis) const {
  if (!(f.grid == grid_)) throw std::invalid_argument("spectral: grid mismatch");
  const int rows = static_cast<int>(f.v[0].rows());
  const int cols = static_cast<int>(f.v[0].cols());
  MatrixField out(f.grid, Eigen::MatrixXcd::Zero(rows, cols));
  ScalarField comp(f.grid);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      for (std::size_t x = 0; x < f.size(); ++x) comp.v[x] = f.v[x](i, j);
      ScalarField dc = partial(comp, axis);
      for (std::size_t x = 0; x < f.size(); ++x) out.v[x](i, j) = dc.v[x];
    }
  return out;
}

ScalarField Spectral::inverse_helmholtz(const ScalarField& g, double eps) const {
  if (!(g.grid == grid_)) throw std::invalid_argument("spectral: grid mismatch");
  ScalarField out = g;
  apply_symbol(out.v, [&](const std::vector<int>&, const std::vector<double>& k) {
    double k2 = 0.0;
    for (double kk : k) k2 += kk * kk;
    double denom = 0.25 * k2 + eps;
    if (denom == 0.0) return cx(0.0);  // zero mode of the pure Poisson solve
    return cx(1.0 / denom);
  });
  return out;
}

MatrixField Spectral::inverse_helmholtz(const MatrixField& g, double eps) const {
  const int rows = static_cast<int>(g.v[0].rows());
  const int cols = static_cast<int>(g.v[0].cols());
  MatrixField out(g.grid, Eigen::MatrixXcd::Zero(rows, cols));
  ScalarField comp(g.grid);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      for (std::size_t x = 0; x < g.size(); ++x) comp.v[x] = g.v[x](i, j);
      ScalarField u = inverse_helmholtz(comp, eps);
      for (std::size_t x = 0; x < g.size(); ++x) out.v[x](i, j) = u.v[x];
    }
  return out;
}

namespace {

template <class MV>
Field<MV> exterior_d_impl(const Spectral& sp, const Field<MV>& a, const MV& zero) {
  Field<MV> out(a.grid, zero);
  const int d = a.grid.dims();
  ScalarField comp(a.grid);
  // Work one basis mask at a time: collect its scalar coefficient field,
  // differentiate, and wedge theta^k back on.
  for (int k = 0; k < d; ++k) {
    if constexpr (std::is_same_v<MV, Multivector>) {
      for (std::uint32_t m = 0; m < (1u << d); ++m) {
        bool any = false;
        for (std::size_t x = 0; x < a.size() && !any; ++x) any = a.v[x].coeff(m) != cx(0.0);
        if (!any) continue;
        for (std::size_t x = 0; x < a.size(); ++x) comp.v[x] = a.v[x].coeff(m);
        ScalarField dc = sp.partial(comp, k);
        Multivector theta = Multivector::basis(a.grid.n, 1u << k);
        for (std::size_t x = 0; x < a.size(); ++x)
          out.v[x] += wedge(theta, Multivector::basis(a.grid.n, m, dc.v[x]));
      }
    } else {
      for (int i = 0; i < zero.rows; ++i)
        for (int j = 0; j < zero.cols; ++j)
          for (std::uint32_t m = 0; m < (1u << d); ++m) {
            bool any = false;
            for (std::size_t x = 0; x < a.size() && !any; ++x)
              any = a.v[x].at(i, j).coeff(m) != cx(0.0);
            if (!any) continue;
            for (std::size_t x = 0; x < a.size(); ++x) comp.v[x] = a.v[x].at(i, j).coeff(m);
            ScalarField dc = sp.partial(comp, k);
            Multivector theta = Multivector::basis(a.grid.n, 1u << k);
            for (std::size_t x = 0; x < a.size(); ++x)
              out.v[x].at(i, j) += wedge(theta, Multivector::basis(a.grid.n, m, dc.v[x]));
          }
    }
  }
  return out;
}

}  // namespace

Field<Multivector> exterior_d(const Spectral& sp, const Field<Multivector>& a) {
  return exterior_d_impl(sp, a, Multivector(a.grid.n));
}

Field<MvMatrix> exterior_d(const Spectral& sp, const Field<MvMatrix>& a) {
  return exterior_d_impl(sp, a, MvMatrix(a.grid.n, a.v[0].rows, a.v[0].cols));
}

cx integrate_top(const Field<Multivector>& a) {
  const std::uint32_t full = (1u << a.grid.dims()) - 1u;
  cx s(0.0);
  for (const auto& mv : a.v) s += mv.coeff(full);
  return s * a.grid.cell_volume();
}

Eigen::MatrixXcd integrate_top(const Field<MvMatrix>& a) {
  const std::uint32_t full = (1u << a.grid.dims()) - 1u;
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(a.v[0].rows, a.v[0].cols);
  for (const auto& mv : a.v)
    for (int i = 0; i < mv.rows; ++i)
      for (int j = 0; j < mv.cols; ++j) s(i, j) += mv.at(i, j).coeff(full);
  return s * a.grid.cell_volume();
}

cx mean(const ScalarField& f) {
  cx s(0.0);
  for (const auto& v : f.v) s += v;
  return s / static_cast<double>(f.size());
}

Eigen::MatrixXcd mean(const MatrixField& f) {
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(f.v[0].rows(), f.v[0].cols());
  for (const auto& v : f.v) s += v;
  return s / static_cast<double>(f.size());
}

ScalarField sample(const Grid& g, const std::function<cx(const std::vector<double>&)>& fn) {
  ScalarField out(g);
  std::vector<double> x(g.dims());
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    auto idx = g.unflatten(flat);
    for (int d = 0; d < g.dims(); ++d) x[d] = g.coord(d, idx[d]);
    out.v[flat] = fn(x);
  }
  return out;
}

MatrixField sample_matrix(const Grid& g, int rows, int cols,
                          const std::function<Eigen::MatrixXcd(const std::vector<double>&)>& fn) {
  MatrixField out(g, Eigen::MatrixXcd::Zero(rows, cols));
  std::vector<double> x(g.dims());
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    auto idx = g.unflatten(flat);
    for (int d = 0; d < g.dims(); ++d) x[d] = g.coord(d, idx[d]);
    out.v[flat] = fn(x);
  }
  return out;
}

void write_field(std::ostream& os, const MatrixField& f) {
  os << f.grid.n << " " << f.grid.N;
  for (double p : f.grid.periods) os << " " << p;
  os << "\n" << f.v[0].rows() << " " << f.v[0].cols() << "\n";
  os.precision(17);
  for (const auto& m : f.v) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j)
        os << m(i, j).real() << " " << m(i, j).imag() << " ";
    os << "\n";
  }
}

MatrixField read_field(std::istream& is) {
  int n = 0, N = 0;
  is >> n >> N;
  std::vector<double> periods(2 * n);
  for (double& p : periods) is >> p;
  Grid g(n, N, periods);
  int rows = 0, cols = 0;
  is >> rows >> cols;
  MatrixField out(g, Eigen::MatrixXcd::Zero(rows, cols));
  for (auto& m : out.v)
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        double re = 0.0, im = 0.0;
        is >> re >> im;
        m(i, j) = cx(re, im);
      }
  if (!is) throw std::runtime_error("read_field: truncated or malformed stream");
  return out;
}

}  // namespace gk
