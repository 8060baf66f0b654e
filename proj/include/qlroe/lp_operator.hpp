#ifndef QLROE_LP_OPERATOR_HPP
#define QLROE_LP_OPERATOR_HPP

// Operators on l^p(X; C^k) and certified induced p-norm brackets.
//
// An operator is stored as a dense (n*k) x (n*k) complex matrix; row/column
// index x*k + i addresses fiber coordinate i over point x. The norm is the one
// induced by ||xi||_p^p = sum_x mu(x) sum_i |xi(x,i)|^p, reduced to the
// unweighted case by the similarity D^{1/p} A D^{-1/p}.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "qlroe/error.hpp"
#include "qlroe/rng.hpp"
#include "qlroe/space.hpp"

namespace qlroe {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Certified interval [lo, hi] around an operator norm. lo is attained by an
/// explicit vector, hi comes from an analytic bound.
struct NormBracket {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double tol = 0.0) const { return lo - tol <= v && v <= hi + tol; }
  double width() const { return hi - lo; }
  friend bool operator==(const NormBracket&, const NormBracket&) = default;
};

inline bool intersects(const NormBracket& a, const NormBracket& b, double tol = 0.0) {
  return a.lo <= b.hi + tol && b.lo <= a.hi + tol;
}

/// Holder conjugate; 1 <-> infinity.
inline double conjugate_exponent(double p) {
  if (p == 1.0) return kInfinity;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

class LpOperator {
 public:
  LpOperator(SpacePtr space, double p, int fiber_dim, Eigen::MatrixXcd entries)
      : space_(std::move(space)), p_(p), fiber_dim_(fiber_dim), m_(std::move(entries)) {
    if (!space_) throw InvalidArgument("operator needs a space");
    if (!(p_ >= 1.0)) throw InvalidArgument("exponent p must be >= 1");
    if (fiber_dim_ < 1) throw InvalidArgument("fiber dimension must be positive");
    const auto dim = static_cast<Eigen::Index>(space_->n()) * fiber_dim_;
    if (m_.rows() != dim || m_.cols() != dim)
      throw InvalidArgument("operator matrix must be " + std::to_string(dim) + "x" + std::to_string(dim));
  }

  static LpOperator zero(SpacePtr space, double p, int fiber_dim = 1) {
    const auto dim = static_cast<Eigen::Index>(space->n()) * fiber_dim;
    return {std::move(space), p, fiber_dim, Eigen::MatrixXcd::Zero(dim, dim)};
  }
  static LpOperator identity(SpacePtr space, double p, int fiber_dim = 1) {
    const auto dim = static_cast<Eigen::Index>(space->n()) * fiber_dim;
    return {std::move(space), p, fiber_dim, Eigen::MatrixXcd::Identity(dim, dim)};
  }

  const SpacePtr& space() const { return space_; }
  double p() const { return p_; }
  int fiber_dim() const { return fiber_dim_; }
  std::size_t points() const { return space_->n(); }
  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXcd& matrix() const { return m_; }

  /// Fiber block a_{x,y} (k x k).
  Eigen::MatrixXcd block(std::size_t x, std::size_t y) const {
    const auto k = static_cast<Eigen::Index>(fiber_dim_);
    return m_.block(static_cast<Eigen::Index>(x) * k, static_cast<Eigen::Index>(y) * k, k, k);
  }
  bool block_is_zero(std::size_t x, std::size_t y) const {
    const auto k = static_cast<Eigen::Index>(fiber_dim_);
    const auto blk = m_.block(static_cast<Eigen::Index>(x) * k, static_cast<Eigen::Index>(y) * k, k, k);
    return (blk.array() == std::complex<double>(0.0)).all();
  }

  LpOperator with_matrix(Eigen::MatrixXcd m) const { return {space_, p_, fiber_dim_, std::move(m)}; }
  LpOperator with_p(double p) const { return {space_, p, fiber_dim_, m_}; }

  friend LpOperator operator+(const LpOperator& a, const LpOperator& b) {
    check_compatible(a, b);
    return a.with_matrix(a.m_ + b.m_);
  }
  friend LpOperator operator-(const LpOperator& a, const LpOperator& b) {
    check_compatible(a, b);
    return a.with_matrix(a.m_ - b.m_);
  }
  friend LpOperator operator*(const LpOperator& a, const LpOperator& b) {
    check_compatible(a, b);
    return a.with_matrix(a.m_ * b.m_);
  }
  friend LpOperator operator*(std::complex<double> s, const LpOperator& a) { return a.with_matrix(s * a.m_); }

  static void check_compatible(const LpOperator& a, const LpOperator& b) {
    if (!same_space(a.space_, b.space_) || a.fiber_dim_ != b.fiber_dim_)
      throw InvalidArgument("operators live on different spaces");
  }

  static bool same_space(const SpacePtr& a, const SpacePtr& b) {
    return a == b || (a->n() == b->n() && a->dist() == b->dist() && a->weights() == b->weights());
  }

 private:
  SpacePtr space_;
  double p_;
  int fiber_dim_;
  Eigen::MatrixXcd m_;
};

/// Tuning of the general-p lower-bound search.
struct NormOptions {
  int restarts = 8;        // random restarts on top of the structured starts
  int max_iterations = 500;
  double tolerance = 1e-10;
  std::uint64_t seed = 0x51ed5eedULL;
};

namespace detail {

inline double vec_pnorm(const Eigen::VectorXcd& v, double p) {
  if (v.size() == 0) return 0.0;
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  if (p == 1.0) return v.cwiseAbs().sum();
  if (p == 2.0) return v.norm();
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::pow(std::abs(v(i)) / scale, p);
  return scale * std::pow(acc, 1.0 / p);
}

/// Unit-q-norm vector d with <d, v> = ||v||_p (Holder equality case); 1 < p < inf.
inline Eigen::VectorXcd dual_vector(const Eigen::VectorXcd& v, double p) {
  const double nv = vec_pnorm(v, p);
  Eigen::VectorXcd d = Eigen::VectorXcd::Zero(v.size());
  if (nv == 0.0) return d;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double r = std::abs(v(i));
    if (r == 0.0) continue;
    d(i) = (v(i) / r) * std::pow(r / nv, p - 1.0);
  }
  return d;
}

inline Eigen::MatrixXcd weighted(const Eigen::MatrixXcd& m, const Eigen::VectorXd& point_weights, int k, double p) {
  if (std::isinf(p) || (point_weights.array() == 1.0).all()) return m;
  const Eigen::Index dim = m.rows();
  Eigen::VectorXd s(dim);
  for (Eigen::Index i = 0; i < dim; ++i) s(i) = std::pow(point_weights(i / k), 1.0 / p);
  return s.asDiagonal() * m * s.cwiseInverse().asDiagonal();
}

inline double norm_1(const Eigen::MatrixXcd& m) {
  return m.size() ? m.cwiseAbs().colwise().sum().maxCoeff() : 0.0;
}

inline double norm_inf(const Eigen::MatrixXcd& m) {
  return m.size() ? m.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
}

struct Spectral {
  NormBracket bracket;
  Eigen::VectorXcd top_right;  // right singular vector of the largest singular value
};

inline Spectral norm_2(const Eigen::MatrixXcd& m) {
  Spectral out;
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0) {
    out.top_right = Eigen::VectorXcd::Zero(m.cols());
    return out;
  }
  // BDCSVD in Eigen 3.4.0 misreports the top singular value on some block-structured inputs.
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinV);
  const double sigma = svd.singularValues()(0);
  out.top_right = svd.matrixV().col(0);
  const double witnessed = (m * out.top_right).norm() / out.top_right.norm();
  out.bracket.lo = std::min(witnessed, sigma);
  out.bracket.hi = std::max(witnessed, sigma) * (1.0 + 1e-12);
  return out;
}

/// Dual power iteration (Boyd / Higham) from one start; returns the ratio
/// ||m x||_p / ||x||_p at the final iterate.
inline double boyd_iterate(const Eigen::MatrixXcd& m, double p, Eigen::VectorXcd x, const NormOptions& opt) {
  const double q = conjugate_exponent(p);
  double nx = vec_pnorm(x, p);
  if (nx == 0.0) return 0.0;
  x /= nx;
  double best = vec_pnorm(m * x, p);
  double prev = -1.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXcd y = m * x;
    const double est = vec_pnorm(y, p);
    best = std::max(best, est);
    if (est == 0.0) break;
    if (prev >= 0.0 && std::abs(est - prev) <= opt.tolerance * est) break;
    prev = est;
    const Eigen::VectorXcd z = m.adjoint() * dual_vector(y, p);
    const double nz = vec_pnorm(z, q);
    if (nz == 0.0) break;
    if (nz <= (z.dot(x)).real() * (1.0 + 1e-15)) break;  // stationary point
    x = dual_vector(z, q);
    nx = vec_pnorm(x, p);
    if (nx == 0.0) break;
    x /= nx;
  }
  return std::max(best, vec_pnorm(m * x, p));
}

inline double boyd_lower(const Eigen::MatrixXcd& m, double p, const Eigen::VectorXcd& spectral_start,
                         const NormOptions& opt) {
  const Eigen::Index n = m.cols();
  double best = 0.0;
  best = std::max(best, boyd_iterate(m, p, Eigen::VectorXcd::Ones(n), opt));
  if (spectral_start.size() == n) best = std::max(best, boyd_iterate(m, p, spectral_start, opt));
  // Column with the largest p-norm, i.e. the best basis vector.
  Eigen::Index arg = 0;
  double col_best = -1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double c = vec_pnorm(m.col(j), p);
    if (c > col_best) col_best = c, arg = j;
  }
  best = std::max(best, col_best);
  best = std::max(best, boyd_iterate(m, p, Eigen::VectorXcd::Unit(n, arg), opt));
  Rng rng(opt.seed);
  for (int r = 0; r < opt.restarts; ++r) {
    Eigen::VectorXcd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.complex_normal();
    best = std::max(best, boyd_iterate(m, p, x, opt));
  }
  return best;
}

/// Bracket for an already unweighted matrix.
inline NormBracket matrix_norm(const Eigen::MatrixXcd& m, double p, const NormOptions& opt = {}) {
  if (!(p >= 1.0)) throw InvalidArgument("p-norm needs p >= 1");
  if (m.size() == 0) return {};
  if (p == 1.0) {
    const double v = norm_1(m);
    return {v, v};
  }
  if (std::isinf(p)) {
    const double v = norm_inf(m);
    return {v, v};
  }
  const Spectral spec = norm_2(m);
  if (p == 2.0) return spec.bracket;
  const double n1 = norm_1(m);
  const double ninf = norm_inf(m);
  const double n2 = spec.bracket.hi;
  double hi = std::pow(n1, 1.0 / p) * std::pow(ninf, 1.0 - 1.0 / p);
  if (p < 2.0) {
    const double theta = 2.0 / p - 1.0;  // 1/p = theta/1 + (1-theta)/2
    hi = std::min(hi, std::pow(n1, theta) * std::pow(n2, 1.0 - theta));
  } else {
    const double theta = 2.0 / p;  // 1/p = theta/2 + (1-theta)/inf
    hi = std::min(hi, std::pow(n2, theta) * std::pow(ninf, 1.0 - theta));
  }
  const double lo = boyd_lower(m, p, spec.top_right, opt);
  return {lo, std::max(hi, lo)};
}

/// The hi side of matrix_norm without running the lower-bound search.
inline double matrix_norm_upper(const Eigen::MatrixXcd& m, double p) {
  if (m.size() == 0) return 0.0;
  if (p == 1.0) return norm_1(m);
  if (std::isinf(p)) return norm_inf(m);
  const double n2 = norm_2(m).bracket.hi;
  if (p == 2.0) return n2;
  const double n1 = norm_1(m);
  const double ninf = norm_inf(m);
  double hi = std::pow(n1, 1.0 / p) * std::pow(ninf, 1.0 - 1.0 / p);
  if (p < 2.0)
    hi = std::min(hi, std::pow(n1, 2.0 / p - 1.0) * std::pow(n2, 2.0 - 2.0 / p));
  else
    hi = std::min(hi, std::pow(n2, 2.0 / p) * std::pow(ninf, 1.0 - 2.0 / p));
  return hi;
}

}  // namespace detail

/// Matrix of `a` after the weight similarity for exponent p.
inline Eigen::MatrixXcd unweighted_matrix(const LpOperator& a, double p) {
  return detail::weighted(a.matrix(), a.space()->weights(), a.fiber_dim(), p);
}

inline NormBracket op_norm(const LpOperator& a, double p, const NormOptions& opt = {}) {
  if (!(p >= 1.0)) throw InvalidArgument("p-norm needs p >= 1, got " + std::to_string(p));
  return detail::matrix_norm(unweighted_matrix(a, p), p, opt);
}

inline NormBracket op_norm(const LpOperator& a, const NormOptions& opt = {}) { return op_norm(a, a.p(), opt); }

/// op_norm(a, p).hi without the lower-bound search.
inline double op_norm_upper(const LpOperator& a, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("p-norm needs p >= 1");
  return detail::matrix_norm_upper(unweighted_matrix(a, p), p);
}
inline double op_norm_upper(const LpOperator& a) { return op_norm_upper(a, a.p()); }

// Multiplication operators act as f(x) * Id on the fiber over x.

inline Eigen::VectorXcd expand_to_fibers(const ScalarFunction& f, int k) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(f.size()) * k);
  for (std::size_t x = 0; x < f.size(); ++x)
    for (int i = 0; i < k; ++i) v(static_cast<Eigen::Index>(x) * k + i) = f(x);
  return v;
}

inline void check_function_space(const ScalarFunction& f, const LpOperator& a) {
  if (!LpOperator::same_space(f.space(), a.space())) throw InvalidArgument("function and operator live on different spaces");
}

inline LpOperator left_multiply(const ScalarFunction& f, const LpOperator& a) {
  check_function_space(f, a);
  return a.with_matrix(expand_to_fibers(f, a.fiber_dim()).asDiagonal() * a.matrix());
}

inline LpOperator right_multiply(const LpOperator& a, const ScalarFunction& f) {
  check_function_space(f, a);
  return a.with_matrix(a.matrix() * expand_to_fibers(f, a.fiber_dim()).asDiagonal());
}

/// f a g.
inline LpOperator sandwich(const ScalarFunction& f, const LpOperator& a, const ScalarFunction& g) {
  return right_multiply(left_multiply(f, a), g);
}

enum class Side { left, right, both };

/// fa, af, or f a g (g required for Side::both).
inline LpOperator multiply_function(const ScalarFunction& f, const LpOperator& a, Side side,
                                    const std::optional<ScalarFunction>& g = std::nullopt) {
  switch (side) {
    case Side::left: return left_multiply(f, a);
    case Side::right: return right_multiply(a, f);
    case Side::both:
      if (!g) throw InvalidArgument("two-sided multiplication needs a right function");
      return sandwich(f, a, *g);
  }
  throw InvalidArgument("unknown side");
}

/// chi_U a chi_V.
inline LpOperator restrict_to(const LpOperator& a, const Subset& rows, const Subset& cols) {
  return sandwich(ScalarFunction::indicator(a.space(), rows), a, ScalarFunction::indicator(a.space(), cols));
}

/// [a, f] = a f - f a; entry (x, y) is a_{x,y} (f(y) - f(x)).
inline LpOperator commutator(const LpOperator& a, const ScalarFunction& f) {
  return right_multiply(a, f) - left_multiply(f, a);
}

/// Zero every fiber block a_{x,y} with d(x, y) > R.
inline LpOperator truncate(const LpOperator& a, double radius) {
  if (radius < 0.0) throw InvalidArgument("truncation radius must be nonnegative");
  Eigen::MatrixXcd m = a.matrix();
  const auto k = static_cast<Eigen::Index>(a.fiber_dim());
  const auto& sp = *a.space();
  for (std::size_t x = 0; x < sp.n(); ++x)
    for (std::size_t y = 0; y < sp.n(); ++y)
      if (sp.distance(x, y) > radius)
        m.block(static_cast<Eigen::Index>(x) * k, static_cast<Eigen::Index>(y) * k, k, k).setZero();
  return a.with_matrix(std::move(m));
}

/// Exact max d(x, y) over nonzero fiber blocks; 0 for the zero operator.
inline double propagation(const LpOperator& a) {
  const auto& sp = *a.space();
  double r = 0.0;
  for (std::size_t x = 0; x < sp.n(); ++x)
    for (std::size_t y = 0; y < sp.n(); ++y)
      if (sp.distance(x, y) > r && !a.block_is_zero(x, y)) r = sp.distance(x, y);
  return r;
}

/// Largest entrywise modulus of a - b.
inline double max_abs_diff(const LpOperator& a, const LpOperator& b) {
  LpOperator::check_compatible(a, b);
  return a.dim() ? (a.matrix() - b.matrix()).cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace qlroe

#endif  // QLROE_LP_OPERATOR_HPP
