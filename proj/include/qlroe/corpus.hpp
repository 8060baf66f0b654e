#ifndef QLROE_CORPUS_HPP
#define QLROE_CORPUS_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include "qlroe/error.hpp"
#include "qlroe/locality.hpp"
#include "qlroe/lp_operator.hpp"
#include "qlroe/rng.hpp"
#include "qlroe/space.hpp"

namespace qlroe {

enum class GenKind { finite_prop, exp_decay, averaging, random_dense };

inline std::string to_string(GenKind k) {
  switch (k) {
    case GenKind::finite_prop: return "finite_prop";
    case GenKind::exp_decay: return "exp_decay";
    case GenKind::averaging: return "averaging";
    case GenKind::random_dense: return "random_dense";
  }
  return "?";
}

inline GenKind gen_kind_from_string(const std::string& s) {
  if (s == "finite_prop") return GenKind::finite_prop;
  if (s == "exp_decay") return GenKind::exp_decay;
  if (s == "averaging") return GenKind::averaging;
  if (s == "random_dense") return GenKind::random_dense;
  throw InvalidArgument("unknown generator kind '" + s + "'");
}

struct GenSpec {
  GenKind kind = GenKind::exp_decay;
  SpacePtr space;
  double p = 2.0;
  int fiber_dim = 1;
  double radius = 1.0;       // finite_prop
  double lambda = 0.5;       // exp_decay
  double norm_target = 1.0;  // finite_prop
  std::uint64_t seed = 0;
};

inline LpOperator gen(const GenSpec& spec) {
  if (!spec.space) throw InvalidArgument("generator spec needs a space");
  const auto& sp = *spec.space;
  const auto k = static_cast<Eigen::Index>(spec.fiber_dim);
  const auto n = static_cast<Eigen::Index>(sp.n());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n * k, n * k);
  Rng rng(spec.seed);
  switch (spec.kind) {
    case GenKind::finite_prop: {
      if (!(spec.radius >= 0.0)) throw InvalidArgument("finite_prop needs R >= 0");
      if (!(spec.norm_target > 0.0)) throw InvalidArgument("finite_prop needs a positive norm target");
      for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y) {
          if (sp.distance(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) > spec.radius) continue;
          for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j) m(x * k + i, y * k + j) = rng.complex_normal();
        }
      LpOperator a(spec.space, spec.p, spec.fiber_dim, m);
      double hi = op_norm_upper(a);
      if (hi == 0.0) return a;
      double scale = spec.norm_target / hi;
      for (;;) {
        LpOperator s = a.with_matrix(m * scale);
        if (op_norm_upper(s) <= spec.norm_target) return s;
        scale *= 1.0 - 1e-12;
      }
    }
    case GenKind::exp_decay: {
      if (!(spec.lambda > 0.0 && spec.lambda < 1.0)) throw InvalidArgument("exp_decay needs lambda in (0, 1)");
      for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y) {
          const double d = sp.distance(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
          const std::complex<double> v = std::pow(spec.lambda, d) * rng.unit_phase();
          for (Eigen::Index i = 0; i < k; ++i) m(x * k + i, y * k + i) = v;
        }
      break;
    }
    case GenKind::averaging: {
      // Finite truncation of xi -> (sum_n xi(n)) delta_0.
      for (Eigen::Index y = 0; y < n; ++y)
        for (Eigen::Index i = 0; i < k; ++i) m(i, y * k + i) = 1.0;
      break;
    }
    case GenKind::random_dense: {
      for (Eigen::Index r = 0; r < n * k; ++r)
        for (Eigen::Index c = 0; c < n * k; ++c) {
          const double mod = std::abs(rng.normal());
          m(r, c) = mod * rng.unit_phase();
        }
      break;
    }
  }
  return {spec.space, spec.p, spec.fiber_dim, std::move(m)};
}

enum class LocalityClass { finite_propagation, quasi_local, not_quasi_local };

inline std::string to_string(LocalityClass c) {
  switch (c) {
    case LocalityClass::finite_propagation: return "finite_propagation";
    case LocalityClass::quasi_local: return "quasi_local";
    case LocalityClass::not_quasi_local: return "not_quasi_local";
  }
  return "?";
}

/// Relative eps-propagation threshold, applied at radius ceil(diam / 2).
inline constexpr double kQuasiLocalThreshold = 1e-3;
/// Alternative test: the tail at ceil(diam / 2) is at most this fraction of the tail at radius 0.
inline constexpr double kQuasiLocalDecay = 0.2;

struct Classification {
  LocalityClass kind = LocalityClass::finite_propagation;
  double propagation = 0.0;
  double radius = 0.0;      // test radius ceil(diam / 2)
  double threshold = 0.0;   // kQuasiLocalThreshold * ||a||.hi
  EpsPropagation at_radius;  // witness rows/cols and lower bound when not quasi-local
  std::optional<QuasiLocalityProfile> profile;
  std::string convention =
      "quasi_local iff eps_hi(ceil(diam/2)) <= max(1e-3 * ||a||.hi, 0.2 * eps_hi(0))";
};

/// finite_propagation when the kernel vanishes beyond some R < diam(X); otherwise
/// quasi_local or not_quasi_local by the two thresholds above.
inline Classification classify(const LpOperator& a) {
  Classification c;
  const double diam = a.space()->diameter();
  c.propagation = propagation(a);
  if (c.propagation < diam || diam == 0.0) {
    c.kind = LocalityClass::finite_propagation;
    return c;
  }
  c.radius = std::ceil(diam / 2.0);
  c.threshold = kQuasiLocalThreshold * op_norm(a).hi;
  c.at_radius = eps_propagation(a, c.radius);
  c.profile = level_profile(a);
  const double decayed = kQuasiLocalDecay * eps_propagation(a, 0.0).bracket.hi;
  const double tail = c.at_radius.bracket.hi;
  c.kind = tail <= c.threshold || tail <= decayed ? LocalityClass::quasi_local : LocalityClass::not_quasi_local;
  return c;
}

}  // namespace qlroe

#endif  // QLROE_CORPUS_HPP
