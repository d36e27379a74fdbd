#pragma once
// Periodic d-dimensional lattice with Fourier-multiplier derivatives and
// Riemann-sum quadrature (measure h^d per site).

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "mfdyn/errors.hpp"

namespace mfdyn {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;

inline constexpr cplx I{0.0, 1.0};

// spectral: -Δ ↦ |k|², ∂ ↦ ik.
// lattice:  -Δ ↦ nearest-neighbour stencil, ∂ ↦ central difference.
enum class DerivativeMode { spectral, lattice };

inline std::string to_string(DerivativeMode m) {
  return m == DerivativeMode::spectral ? "spectral" : "lattice";
}

class Grid {
 public:
  Grid(int dim, int sites_per_dim, double box_length,
       DerivativeMode mode = DerivativeMode::spectral)
      : dim_(dim), L_(sites_per_dim), box_(box_length), mode_(mode) {
    if (dim < 1 || dim > 3) throw ShapeError("grid dimension must be 1, 2 or 3");
    if (sites_per_dim < 2 || (sites_per_dim & (sites_per_dim - 1)) != 0)
      throw ShapeError("sites_per_dim must be a power of two >= 2");
    if (!(box_length > 0.0) || !std::isfinite(box_length))
      throw ShapeError("box_length must be positive");
    h_ = box_ / L_;
    size_ = 1;
    for (int a = 0; a < dim_; ++a) size_ *= L_;
    cell_ = std::pow(h_, dim_);

    kin_.resize(size_);
    grad_.assign(dim_, RVec(size_));
    for (int idx = 0; idx < size_; ++idx) {
      double s = 0.0;
      for (int a = 0; a < dim_; ++a) {
        const double k = wavenumber(idx, a);
        if (mode_ == DerivativeMode::spectral) {
          s += k * k;
          grad_[a][idx] = k;
        } else {
          s += (2.0 - 2.0 * std::cos(k * h_)) / (h_ * h_);
          grad_[a][idx] = std::sin(k * h_) / h_;
        }
      }
      kin_[idx] = s;
    }
  }

  int dim() const { return dim_; }
  int sites_per_dim() const { return L_; }
  double box_length() const { return box_; }
  double spacing() const { return h_; }
  int size() const { return size_; }
  double cell_volume() const { return cell_; }
  double volume() const { return std::pow(box_, dim_); }
  DerivativeMode mode() const { return mode_; }

  bool same_as(const Grid& o) const {
    return dim_ == o.dim_ && L_ == o.L_ && box_ == o.box_ && mode_ == o.mode_;
  }

  // Axis 0 varies fastest.
  int coord(int idx, int axis) const {
    for (int a = 0; a < axis; ++a) idx /= L_;
    return idx % L_;
  }
  std::array<int, 3> coords(int idx) const {
    std::array<int, 3> c{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      c[a] = idx % L_;
      idx /= L_;
    }
    return c;
  }
  int index(const std::array<int, 3>& c) const {
    int idx = 0;
    for (int a = dim_ - 1; a >= 0; --a) idx = idx * L_ + ((c[a] % L_) + L_) % L_;
    return idx;
  }

  double position(int idx, int axis) const { return coord(idx, axis) * h_; }

  // Signed displacement of site idx from the origin, in [-ℓ/2, ℓ/2).
  double displacement(int idx, int axis) const {
    const int i = coord(idx, axis);
    return (i < L_ / 2 ? i : i - L_) * h_;
  }

  // Site index of x_i - x_j (periodic).
  int difference(int i, int j) const {
    std::array<int, 3> ci = coords(i), cj = coords(j), c{0, 0, 0};
    for (int a = 0; a < dim_; ++a) c[a] = ci[a] - cj[a];
    return index(c);
  }
  int negate(int i) const {
    std::array<int, 3> c = coords(i);
    for (int a = 0; a < dim_; ++a) c[a] = -c[a];
    return index(c);
  }

  double wavenumber(int idx, int axis) const {
    const int i = coord(idx, axis);
    return 2.0 * std::numbers::pi / box_ * (i < L_ / 2 ? i : i - L_);
  }

  // Symbol of -Δ and real symbols g_a with ∂_a ↦ i g_a.
  const RVec& kinetic_symbol() const { return kin_; }
  const RVec& gradient_symbol(int axis) const { return grad_[axis]; }

  // Unnormalized forward transform; inverse divides by size().
  CVec fft(const CVec& in) const { return transform(in, false); }
  CVec ifft(const CVec& in) const { return transform(in, true); }

  CVec apply_multiplier(const CVec& u, const CVec& symbol) const {
    require_shape(u.size() == size_ && symbol.size() == size_, "multiplier size mismatch");
    CVec uh = fft(u);
    return ifft(uh.cwiseProduct(symbol));
  }

  CVec apply_kinetic(const CVec& u) const {
    CVec uh = fft(u);
    uh.array() *= kin_.array();
    return ifft(uh);
  }

  // Momentum component P_a = -i∂_a, symbol g_a.
  CVec apply_momentum(const CVec& u, int axis) const {
    CVec uh = fft(u);
    uh.array() *= grad_[axis].array();
    return ifft(uh);
  }

  CVec apply_derivative(const CVec& u, int axis) const { return I * apply_momentum(u, axis); }

 private:
  CVec transform(const CVec& in, bool inverse) const {
    require_shape(in.size() == size_, "field size does not match grid");
    CVec out = in;
    std::vector<cplx> line(L_), res(L_);
    int stride = 1;
    for (int a = 0; a < dim_; ++a) {
      for (int base = 0; base < size_; ++base) {
        if ((base / stride) % L_ != 0) continue;
        for (int i = 0; i < L_; ++i) line[i] = out[base + i * stride];
        if (inverse)
          fft_.inv(res, line);
        else
          fft_.fwd(res, line);
        for (int i = 0; i < L_; ++i) out[base + i * stride] = res[i];
      }
      stride *= L_;
    }
    return out;
  }

  int dim_, L_;
  double box_, h_{}, cell_{};
  int size_{};
  DerivativeMode mode_;
  RVec kin_;
  std::vector<RVec> grad_;
  mutable Eigen::FFT<double> fft_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int dim, int sites, double box,
                         DerivativeMode mode = DerivativeMode::spectral) {
  return std::make_shared<const Grid>(dim, sites, box, mode);
}

// A complex function sampled on a grid.
struct Field {
  GridPtr grid;
  CVec values;

  Field() = default;
  Field(GridPtr g) : grid(std::move(g)), values(CVec::Zero(grid->size())) {}
  Field(GridPtr g, CVec v) : grid(std::move(g)), values(std::move(v)) {
    require_shape(values.size() == grid->size(), "field value count does not match grid");
  }
  int size() const { return static_cast<int>(values.size()); }
};

inline void check_same_grid(const Field& a, const Field& b) {
  require_shape(a.grid && b.grid, "field without grid");
  require_shape(a.grid == b.grid || a.grid->same_as(*b.grid), "fields live on different grids");
  require_shape(a.values.size() == b.values.size(), "field sizes differ");
}

inline Field laplacian(const Field& u) {
  CVec r = -u.grid->apply_kinetic(u.values);
  return Field(u.grid, std::move(r));
}

inline std::vector<Field> gradient(const Field& u) {
  std::vector<Field> g;
  for (int a = 0; a < u.grid->dim(); ++a) g.emplace_back(u.grid, u.grid->apply_derivative(u.values, a));
  return g;
}

inline Field divergence(const std::vector<Field>& comps) {
  require_shape(!comps.empty(), "empty vector field");
  const GridPtr& g = comps[0].grid;
  require_shape(static_cast<int>(comps.size()) == g->dim(), "component count != dimension");
  Field out(g);
  for (int a = 0; a < g->dim(); ++a) {
    check_same_grid(comps[0], comps[a]);
    out.values += g->apply_derivative(comps[a].values, a);
  }
  return out;
}

// h^d · IFFT(FFT a · FFT b): the Riemann sum of ∫ a(x-y) b(y) dy.
inline CVec convolve_periodic(const Grid& g, const CVec& a, const CVec& b) {
  CVec ah = g.fft(a), bh = g.fft(b);
  return g.cell_volume() * g.ifft(ah.cwiseProduct(bh));
}

inline Field convolve_periodic(const Field& a, const Field& b) {
  check_same_grid(a, b);
  return Field(a.grid, convolve_periodic(*a.grid, a.values, b.values));
}

inline cplx inner(const Grid& g, const CVec& a, const CVec& b) {
  return g.cell_volume() * a.dot(b);  // Eigen's dot conjugates the left argument.
}
inline cplx inner(const Field& a, const Field& b) {
  check_same_grid(a, b);
  return inner(*a.grid, a.values, b.values);
}

inline double norm_l2(const Field& a) { return std::sqrt(std::real(inner(a, a))); }
inline double norm_l1(const Grid& g, const CVec& a) { return g.cell_volume() * a.cwiseAbs().sum(); }
inline double norm_l1(const Field& a) { return norm_l1(*a.grid, a.values); }
inline double norm_linf(const CVec& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }
inline double norm_linf(const Field& a) { return norm_linf(a.values); }

}  // namespace mfdyn
