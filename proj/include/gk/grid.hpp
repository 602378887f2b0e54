#pragma once
// Flat-torus discretization: an even N-point grid per coordinate on
// [0, period_k), spectral derivatives through FFTW, and the handful of
// calculus operations the curvature and solver layers need.
//
// Axis order matches the multivector generators: axis k <-> theta^{k+1},
// complex pairs z^j = x_{2j-1} + i x_{2j} live on axes (2j-2, 2j-1) zero-based.

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "gk/multivector.hpp"

namespace gk {

struct Grid {
  int n = 1;                    // half the torus dimension
  int N = 32;                   // points per axis, even, >= 8
  std::vector<double> periods;  // 2n positive reals, default 2*pi

  Grid() = default;
  Grid(int n_, int N_, std::vector<double> periods_ = {});

  int dims() const { return 2 * n; }
  std::size_t nodes() const {
    std::size_t t = 1;
    for (int d = 0; d < dims(); ++d) t *= static_cast<std::size_t>(N);
    return t;
  }
  double cell_volume() const {
    double v = 1.0;
    for (double p : periods) v *= p / N;
    return v;
  }
  double total_volume() const {
    double v = 1.0;
    for (double p : periods) v *= p;
    return v;
  }
  // Row-major flattening, last axis fastest.
  std::size_t index(const std::vector<int>& idx) const;
  std::vector<int> unflatten(std::size_t flat) const;
  double coord(int axis, int i) const { return periods[axis] * i / N; }
};

bool operator==(const Grid& a, const Grid& b);

template <class T>
struct Field {
  Grid grid;
  std::vector<T> v;

  Field() = default;
  explicit Field(const Grid& g) : grid(g), v(g.nodes()) {}
  Field(const Grid& g, const T& fill) : grid(g), v(g.nodes(), fill) {}

  T& operator[](std::size_t i) { return v[i]; }
  const T& operator[](std::size_t i) const { return v[i]; }
  std::size_t size() const { return v.size(); }
};

using ScalarField = Field<cx>;
using MatrixField = Field<Eigen::MatrixXcd>;

// Spectral engine; owns FFTW plans for one grid shape. Derivatives zero the
// Nyquist mode so d/dx of a real field stays conjugate-symmetric.
class Spectral {
public:
  explicit Spectral(const Grid& g);
  ~Spectral();
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  const Grid& grid() const { return grid_; }

  ScalarField partial(const ScalarField& f, int axis) const;
  MatrixField partial(const MatrixField& f, int axis) const;

  // Solve (lap + eps) u = g for the quarter-Laplacian lap = -(1/4) sum d_k^2.
  // With eps = 0 the mean of g must vanish; the mean of u is set to zero.
  ScalarField inverse_helmholtz(const ScalarField& g, double eps) const;
  MatrixField inverse_helmholtz(const MatrixField& g, double eps) const;

private:
  void forward(std::vector<cx>& buf) const;
  void backward(std::vector<cx>& buf) const;
  template <class Fn>
  void apply_symbol(std::vector<cx>& buf, const Fn& symbol) const;

  Grid grid_;
  void* plan_fwd_ = nullptr;
  void* plan_bwd_ = nullptr;
  cx* work_ = nullptr;
};

// d of a multivector-valued field: sum_k theta^k ^ (d_k a).
Field<Multivector> exterior_d(const Spectral& sp, const Field<Multivector>& a);
Field<MvMatrix> exterior_d(const Spectral& sp, const Field<MvMatrix>& a);

// Integral of the top-form coefficient against the coordinate cell volume.
cx integrate_top(const Field<Multivector>& a);
Eigen::MatrixXcd integrate_top(const Field<MvMatrix>& a);

// Mean over nodes (normalized L^1-type averages used by the solver).
cx mean(const ScalarField& f);
Eigen::MatrixXcd mean(const MatrixField& f);

// Pointwise construction helpers.
ScalarField sample(const Grid& g, const std::function<cx(const std::vector<double>&)>& fn);
MatrixField sample_matrix(const Grid& g, int rows, int cols,
                          const std::function<Eigen::MatrixXcd(const std::vector<double>&)>& fn);

// Serialization: axis sizes, value shape, then row-major complex pairs.
void write_field(std::ostream& os, const MatrixField& f);
MatrixField read_field(std::istream& is);

}  // namespace gk
