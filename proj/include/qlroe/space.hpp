#ifndef QLROE_SPACE_HPP
#define QLROE_SPACE_HPP

// Finite metric measure spaces, subsets, and scalar functions on them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qlroe/error.hpp"

namespace qlroe {

/// Additive tolerance for the triangle-inequality scan at construction.
inline constexpr double kTriangleTolerance = 1e-9;

enum class GridMetric { l1, linf, euclidean };

inline std::string to_string(GridMetric m) {
  switch (m) {
    case GridMetric::l1: return "l1";
    case GridMetric::linf: return "linf";
    case GridMetric::euclidean: return "euclidean";
  }
  return "?";
}

inline GridMetric grid_metric_from_string(const std::string& s) {
  if (s == "l1") return GridMetric::l1;
  if (s == "linf") return GridMetric::linf;
  if (s == "euclidean") return GridMetric::euclidean;
  throw InvalidArgument("unknown grid metric '" + s + "' (expected l1, linf or euclidean)");
}

/// Lattice provenance of a space built by build_grid_space.
struct GridInfo {
  std::vector<int> dims;
  GridMetric metric = GridMetric::l1;
  std::vector<std::vector<int>> coords;  // coords[point][axis]
};

/// A set of point indices, kept sorted and duplicate free.
class Subset {
 public:
  Subset() = default;
  explicit Subset(std::vector<std::size_t> idx) : idx_(std::move(idx)) {
    std::sort(idx_.begin(), idx_.end());
    idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
  }
  Subset(std::initializer_list<std::size_t> idx) : Subset(std::vector<std::size_t>(idx)) {}

  static Subset range(std::size_t first, std::size_t last_inclusive) {
    std::vector<std::size_t> v;
    for (std::size_t i = first; i <= last_inclusive; ++i) v.push_back(i);
    return Subset(std::move(v));
  }
  static Subset all(std::size_t n) { return n == 0 ? Subset() : range(0, n - 1); }

  bool contains(std::size_t i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }
  std::size_t size() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  const std::vector<std::size_t>& indices() const { return idx_; }
  auto begin() const { return idx_.begin(); }
  auto end() const { return idx_.end(); }

  friend bool operator==(const Subset&, const Subset&) = default;

 private:
  std::vector<std::size_t> idx_;
};

inline Subset unite(const Subset& a, const Subset& b) {
  std::vector<std::size_t> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return Subset(std::move(out));
}

inline Subset intersect(const Subset& a, const Subset& b) {
  std::vector<std::size_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return Subset(std::move(out));
}

inline Subset difference(const Subset& a, const Subset& b) {
  std::vector<std::size_t> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return Subset(std::move(out));
}

inline bool is_subset(const Subset& a, const Subset& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline bool disjoint(const Subset& a, const Subset& b) { return intersect(a, b).empty(); }

inline std::string to_string(const Subset& s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (auto i : s) {
    if (!first) os << ',';
    os << i;
    first = false;
  }
  os << '}';
  return os.str();
}

/// Finite metric space with a full-support measure. Immutable after construction.
class FiniteMetricSpace {
 public:
  FiniteMetricSpace(std::vector<std::string> labels, Eigen::MatrixXd dist, Eigen::VectorXd weights,
                    std::optional<GridInfo> grid = std::nullopt)
      : labels_(std::move(labels)), dist_(std::move(dist)), weights_(std::move(weights)), grid_(std::move(grid)) {
    validate();
    diameter_ = n() == 0 ? 0.0 : dist_.maxCoeff();
    min_gap_ = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = i + 1; j < n(); ++j) min_gap_ = std::min(min_gap_, dist_(i, j));
    if (n() < 2) min_gap_ = 0.0;
  }

  std::size_t n() const { return labels_.size(); }
  double distance(std::size_t x, std::size_t y) const { return dist_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)); }
  const Eigen::MatrixXd& dist() const { return dist_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::optional<GridInfo>& grid() const { return grid_; }
  double diameter() const { return diameter_; }
  /// Smallest distance between distinct points (0 for spaces with fewer than two points).
  double min_gap() const { return min_gap_; }
  Subset all() const { return Subset::all(n()); }

  bool counting_measure() const { return (weights_.array() == 1.0).all(); }

  /// Sorted distinct values of the distance matrix, including 0.
  std::vector<double> distance_levels() const {
    std::vector<double> v(dist_.data(), dist_.data() + dist_.size());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  }

  std::optional<std::size_t> index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
  }

 private:
  void validate() const {
    const auto m = static_cast<Eigen::Index>(labels_.size());
    if (m == 0) throw InvalidArgument("metric space must have at least one point");
    if (dist_.rows() != m || dist_.cols() != m)
      throw InvalidArgument("distance matrix must be " + std::to_string(m) + "x" + std::to_string(m));
    if (weights_.size() != m) throw InvalidArgument("weights must have one entry per point");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(weights_(i) > 0.0) || !std::isfinite(weights_(i)))
        throw InvalidArgument("nonpositive weight at point " + labels_[static_cast<std::size_t>(i)]);
      if (dist_(i, i) != 0.0) throw InvalidArgument("dist(x,x) must be 0");
      for (Eigen::Index j = 0; j < m; ++j) {
        if (!std::isfinite(dist_(i, j))) throw InvalidArgument("distances must be finite");
        if (dist_(i, j) != dist_(j, i)) throw InvalidArgument("distance matrix is not symmetric");
        if (i != j && !(dist_(i, j) > 0.0)) throw InvalidArgument("distinct points must have positive distance");
      }
    }
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index k = 0; k < m; ++k)
          if (dist_(i, k) > dist_(i, j) + dist_(j, k) + kTriangleTolerance)
            throw InvalidArgument("triangle inequality fails for points " + labels_[static_cast<std::size_t>(i)] +
                                  ", " + labels_[static_cast<std::size_t>(j)] + ", " +
                                  labels_[static_cast<std::size_t>(k)]);
  }

  std::vector<std::string> labels_;
  Eigen::MatrixXd dist_;
  Eigen::VectorXd weights_;
  std::optional<GridInfo> grid_;
  double diameter_ = 0.0;
  double min_gap_ = 0.0;
};

using SpacePtr = std::shared_ptr<const FiniteMetricSpace>;

inline SpacePtr make_space(std::vector<std::string> labels, Eigen::MatrixXd dist,
                           std::optional<Eigen::VectorXd> weights = std::nullopt) {
  Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(labels.size()));
  return std::make_shared<const FiniteMetricSpace>(std::move(labels), std::move(dist), std::move(w));
}

/// Lattice {0..d_1-1} x ... x {0..d_k-1} with the chosen metric. Points are ordered
/// with the last axis varying fastest.
inline SpacePtr build_grid_space(const std::vector<int>& dims, GridMetric metric,
                                 std::optional<Eigen::VectorXd> weights = std::nullopt) {
  if (dims.empty()) throw InvalidArgument("grid needs at least one axis");
  std::size_t count = 1;
  for (int d : dims) {
    if (d < 1) throw InvalidArgument("grid dimensions must be positive");
    count *= static_cast<std::size_t>(d);
  }
  GridInfo info{dims, metric, {}};
  info.coords.reserve(count);
  std::vector<std::string> labels;
  labels.reserve(count);
  std::vector<int> c(dims.size(), 0);
  for (std::size_t idx = 0; idx < count; ++idx) {
    info.coords.push_back(c);
    if (dims.size() == 1) {
      labels.push_back(std::to_string(c[0]));
    } else {
      std::string s = "(";
      for (std::size_t a = 0; a < c.size(); ++a) s += (a ? "," : "") + std::to_string(c[a]);
      labels.push_back(s + ")");
    }
    for (std::size_t a = dims.size(); a-- > 0;) {
      if (++c[a] < dims[a]) break;
      c[a] = 0;
    }
  }
  const auto m = static_cast<Eigen::Index>(count);
  Eigen::MatrixXd dist(m, m);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < count; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < dims.size(); ++a) {
        const double diff = std::abs(info.coords[i][a] - info.coords[j][a]);
        switch (metric) {
          case GridMetric::l1: acc += diff; break;
          case GridMetric::linf: acc = std::max(acc, diff); break;
          case GridMetric::euclidean: acc += diff * diff; break;
        }
      }
      dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          metric == GridMetric::euclidean ? std::sqrt(acc) : acc;
    }
  }
  Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(m);
  return std::make_shared<const FiniteMetricSpace>(std::move(labels), std::move(dist), std::move(w), std::move(info));
}

/// Path {0..n-1} with |i-j|; shorthand for a one-axis grid.
inline SpacePtr build_path_space(int n) { return build_grid_space({n}, GridMetric::l1); }

/// Cycle graph C_n with the shortest-path metric.
inline SpacePtr build_cycle_space(int n) {
  if (n < 1) throw InvalidArgument("cycle needs at least one point");
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd dist(m, m);
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) {
    labels.push_back(std::to_string(i));
    for (int j = 0; j < n; ++j) {
      const int d = std::abs(i - j);
      dist(i, j) = std::min(d, n - d);
    }
  }
  return make_space(std::move(labels), std::move(dist));
}

/// d(x, S); +infinity for empty S.
inline double distance_to_set(const FiniteMetricSpace& space, std::size_t x, const Subset& s) {
  double best = std::numeric_limits<double>::infinity();
  for (auto y : s) best = std::min(best, space.distance(x, y));
  return best;
}

inline double set_distance(const FiniteMetricSpace& space, const Subset& a, const Subset& b) {
  if (a.empty() || b.empty()) throw InvalidArgument("undefined set distance");
  double best = std::numeric_limits<double>::infinity();
  for (auto x : a)
    for (auto y : b) best = std::min(best, space.distance(x, y));
  return best;
}

/// N_r(A) = {x : d(x, A) <= r}.
inline Subset neighborhood(const FiniteMetricSpace& space, const Subset& a, double r) {
  std::vector<std::size_t> out;
  if (a.empty()) return Subset();
  for (std::size_t x = 0; x < space.n(); ++x)
    if (distance_to_set(space, x, a) <= r) out.push_back(x);
  return Subset(std::move(out));
}

inline double diameter(const FiniteMetricSpace& space, const Subset& s) {
  double d = 0.0;
  for (auto x : s)
    for (auto y : s) d = std::max(d, space.distance(x, y));
  return d;
}

/// Complex-valued function on the points of a space.
class ScalarFunction {
 public:
  ScalarFunction(SpacePtr space, Eigen::VectorXcd values) : space_(std::move(space)), values_(std::move(values)) {
    if (!space_) throw InvalidArgument("function needs a space");
    if (static_cast<std::size_t>(values_.size()) != space_->n())
      throw InvalidArgument("function must have one value per point");
  }

  static ScalarFunction from_real(SpacePtr space, const Eigen::VectorXd& v) {
    return ScalarFunction(std::move(space), v.cast<std::complex<double>>());
  }
  static ScalarFunction constant(SpacePtr space, std::complex<double> c) {
    const auto m = static_cast<Eigen::Index>(space->n());
    return ScalarFunction(std::move(space), Eigen::VectorXcd::Constant(m, c));
  }
  static ScalarFunction indicator(SpacePtr space, const Subset& s) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space->n()));
    for (auto i : s) v(static_cast<Eigen::Index>(i)) = 1.0;
    return ScalarFunction(std::move(space), std::move(v));
  }

  const SpacePtr& space() const { return space_; }
  const Eigen::VectorXcd& values() const { return values_; }
  std::complex<double> operator()(std::size_t x) const { return values_(static_cast<Eigen::Index>(x)); }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Subset support() const {
    std::vector<std::size_t> s;
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      if (values_(i) != std::complex<double>(0.0)) s.push_back(static_cast<std::size_t>(i));
    return Subset(std::move(s));
  }
  double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }
  bool is_contraction() const { return sup_norm() <= 1.0; }
  bool is_real() const { return (values_.imag().array() == 0.0).all(); }
  Eigen::VectorXd real_values() const { return values_.real(); }

 private:
  SpacePtr space_;
  Eigen::VectorXcd values_;
};

/// max over x != y of |f(x) - f(y)| / d(x, y); 0 on a one-point space.
inline double lipschitz_constant(const ScalarFunction& f) {
  const auto& sp = *f.space();
  double best = 0.0;
  for (std::size_t x = 0; x < sp.n(); ++x)
    for (std::size_t y = x + 1; y < sp.n(); ++y) best = std::max(best, std::abs(f(x) - f(y)) / sp.distance(x, y));
  return best;
}

/// The pair attaining lipschitz_constant, for diagnostics.
inline std::pair<std::size_t, std::size_t> lipschitz_witness(const ScalarFunction& f) {
  const auto& sp = *f.space();
  double best = -1.0;
  std::pair<std::size_t, std::size_t> arg{0, 0};
  for (std::size_t x = 0; x < sp.n(); ++x)
    for (std::size_t y = x + 1; y < sp.n(); ++y) {
      const double q = std::abs(f(x) - f(y)) / sp.distance(x, y);
      if (q > best) best = q, arg = {x, y};
    }
  return arg;
}

/// 1 on N_inner(S), linear in d(x, S) down to 0 at distance outer.
inline ScalarFunction ramp_function(const SpacePtr& space, const Subset& s, double inner, double outer) {
  if (s.empty()) throw InvalidArgument("ramp_function needs a nonempty base set");
  if (!(outer > inner) || inner < 0.0) throw InvalidArgument("ramp_function needs 0 <= inner < outer");
  const double width = outer - inner;
  Eigen::VectorXd v(static_cast<Eigen::Index>(space->n()));
  for (std::size_t x = 0; x < space->n(); ++x)
    v(static_cast<Eigen::Index>(x)) = std::clamp((outer - distance_to_set(*space, x, s)) / width, 0.0, 1.0);
  return ScalarFunction::from_real(space, v);
}

/// Anchor for mcshane_extend: point index and prescribed value in [-1, 1].
struct Anchor {
  std::size_t point;
  double value;
};

/// Lipschitz extension h(x) = clamp(min_s v(s) + L d(x, s), -1, 1).
inline ScalarFunction mcshane_extend(const SpacePtr& space, const std::vector<Anchor>& anchors, double lipschitz) {
  if (!(lipschitz > 0.0)) throw InvalidArgument("mcshane_extend needs L > 0");
  if (anchors.empty()) throw InvalidArgument("mcshane_extend needs at least one anchor");
  for (const auto& a : anchors) {
    if (a.point >= space->n()) throw InvalidArgument("anchor point out of range");
    if (a.value < -1.0 || a.value > 1.0) throw InvalidArgument("anchor values must lie in [-1, 1]");
  }
  for (std::size_t i = 0; i < anchors.size(); ++i)
    for (std::size_t j = i + 1; j < anchors.size(); ++j) {
      const double gap = std::abs(anchors[i].value - anchors[j].value);
      const double allowed = lipschitz * space->distance(anchors[i].point, anchors[j].point);
      if (gap > allowed * (1.0 + 1e-12))
        throw InvalidArgument("incompatible anchors " + space->labels()[anchors[i].point] + " and " +
                              space->labels()[anchors[j].point] + ": |dv| = " + std::to_string(gap) +
                              " > L*d = " + std::to_string(allowed));
    }
  Eigen::VectorXd v(static_cast<Eigen::Index>(space->n()));
  for (std::size_t x = 0; x < space->n(); ++x) {
    double h = std::numeric_limits<double>::infinity();
    for (const auto& a : anchors) h = std::min(h, a.value + lipschitz * space->distance(x, a.point));
    v(static_cast<Eigen::Index>(x)) = std::clamp(h, -1.0, 1.0);
  }
  // Anchors are reproduced exactly rather than through the min-plus formula.
  for (const auto& a : anchors) v(static_cast<Eigen::Index>(a.point)) = a.value;
  return ScalarFunction::from_real(space, v);
}

}  // namespace qlroe

#endif  // QLROE_SPACE_HPP
