#ifndef QLROE_LOCALITY_HPP
#define QLROE_LOCALITY_HPP

// Quantitative quasi-locality.
//
// eps_R(a) = sup ||f a g|| over contractions f, g whose supports are more than
// R apart. The upper side uses the truncation remainder a - truncate(a, R);
// the lower side evaluates explicit indicator pairs.
//
// Commutator certificates bound sup ||[a, f]|| over real-valued L-Lipschitz f
// with |f| <= 1. Three sound bounds are combined:
//   partition: the level-set partition argument applied to (f + 1) / 2,
//              12 ||a|| / N + 2 N^2 eps_{1/(L N)}(a), minimised over N;
//   schur:     ||K||_p with K_{xy} = |a_{xy}| min(L d(x, y), 2), since
//              |[a, f]_{xy}| = |a_{xy}| |f(y) - f(x)| <= K_{xy};
//   trivial:   2 ||a||.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qlroe/error.hpp"
#include "qlroe/lp_operator.hpp"
#include "qlroe/rng.hpp"
#include "qlroe/space.hpp"

namespace qlroe {

/// Largest N tried by the partition bound.
inline constexpr int kPartitionMaxN = 200;
/// L-grid of find_lipschitz_scale: 2^0, 2^-1, ..., 2^-kLipschitzGridDepth.
inline constexpr int kLipschitzGridDepth = 40;

struct EpsPropagation {
  double radius = 0.0;
  NormBracket bracket;
  // Pair (U, V) with d(U, V) > radius attaining bracket.lo; empty when lo = 0.
  Subset witness_rows;
  Subset witness_cols;
};

struct EpsOptions {
  NormOptions norm{1, 100, 1e-9, 0x51ed5eedULL};
  int growth_levels = 4;  // ball radii per centre in the grown-pair sample
};

/// hi side of eps_R(a) at every distance level, with the running minimum
/// applied (an R-separated pair is also R'-separated for every R' <= R).
class TailProfile {
 public:
  explicit TailProfile(const LpOperator& a) : levels_(a.space()->distance_levels()) {
    raw_.reserve(levels_.size());
    double running = kInfinity;
    for (double r : levels_) {
      const double v = op_norm_upper(a - truncate(a, r));
      raw_.push_back(v);
      running = std::min(running, v);
      min_.push_back(running);
    }
  }

  /// op_norm(a - truncate(a, R)).hi.
  double remainder_at(double radius) const { return raw_[level_index(radius)]; }
  /// Running minimum of remainder_at over radii <= R.
  double hi_at(double radius) const { return min_[level_index(radius)]; }
  const std::vector<double>& levels() const { return levels_; }

 private:
  std::size_t level_index(double radius) const {
    if (radius < 0.0) throw InvalidArgument("radius must be nonnegative");
    auto it = std::upper_bound(levels_.begin(), levels_.end(), radius);
    return static_cast<std::size_t>(it - levels_.begin()) - 1;  // levels_[0] == 0
  }

  std::vector<double> levels_;
  std::vector<double> raw_;
  std::vector<double> min_;
};

namespace detail {

inline Eigen::MatrixXcd submatrix(const Eigen::MatrixXcd& m, const Subset& rows, const Subset& cols, int k) {
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(rows.size()) * k, static_cast<Eigen::Index>(cols.size()) * k);
  Eigen::Index r = 0;
  for (auto x : rows) {
    Eigen::Index c = 0;
    for (auto y : cols) {
      out.block(r * k, c * k, k, k) = m.block(static_cast<Eigen::Index>(x) * k, static_cast<Eigen::Index>(y) * k, k, k);
      ++c;
    }
    ++r;
  }
  return out;
}

/// ||chi_U a chi_V||.lo evaluated on the (|U| k) x (|V| k) submatrix.
inline double pair_lower(const Eigen::MatrixXcd& weighted, const Subset& u, const Subset& v, int k, double p,
                         const NormOptions& opt) {
  if (u.empty() || v.empty()) return 0.0;
  return matrix_norm(submatrix(weighted, u, v, k), p, opt).lo;
}

}  // namespace detail

/// Certified bracket of eps_R(a).
inline EpsPropagation eps_propagation(const LpOperator& a, double radius, const EpsOptions& opt = {}) {
  if (radius < 0.0) throw InvalidArgument("radius must be nonnegative");
  EpsPropagation out;
  out.radius = radius;
  out.bracket.hi = op_norm_upper(a - truncate(a, radius));
  if (out.bracket.hi == 0.0) return out;

  const auto& sp = *a.space();
  const double p = a.p();
  const Eigen::MatrixXcd w = unweighted_matrix(a, p);
  const int k = a.fiber_dim();
  std::vector<double> levels;
  for (double r : sp.distance_levels())
    if (r < sp.diameter()) levels.push_back(r);
  std::vector<double> growth;
  if (opt.growth_levels > 0 && levels.size() > 1) {
    const std::size_t stride = std::max<std::size_t>(1, levels.size() / static_cast<std::size_t>(opt.growth_levels));
    for (std::size_t i = stride; i < levels.size(); i += stride) growth.push_back(levels[i]);
  }
  auto consider = [&](const Subset& u, const Subset& v) {
    const double lo = detail::pair_lower(w, u, v, k, p, opt.norm);
    if (lo > out.bracket.lo) {
      out.bracket.lo = lo;
      out.witness_rows = u;
      out.witness_cols = v;
    }
  };
  for (std::size_t x = 0; x < sp.n(); ++x) {
    const Subset centre{x};
    const Subset far = difference(sp.all(), neighborhood(sp, centre, radius));
    if (far.empty()) continue;
    consider(centre, far);
    consider(far, centre);
  }
  for (std::size_t x = 0; x < sp.n(); ++x) {
    for (double g : growth) {
      const Subset ball = neighborhood(sp, Subset{x}, g);
      const Subset far = difference(sp.all(), neighborhood(sp, ball, radius));
      if (far.empty()) continue;
      consider(ball, far);
      consider(far, ball);
    }
  }
  out.bracket.hi = std::max(out.bracket.hi, out.bracket.lo);
  return out;
}

struct QuasiLocalityProfile {
  std::vector<double> radii;
  std::vector<double> eps_lo;
  std::vector<double> eps_hi;
  std::vector<EpsPropagation> raw;  // per-radius results before monotonisation
};

inline QuasiLocalityProfile quasi_locality_profile(const LpOperator& a, const std::vector<double>& radii,
                                                   const EpsOptions& opt = {}) {
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (radii[i] < radii[i - 1]) throw InvalidArgument("profile radii must be ascending");
  QuasiLocalityProfile prof;
  prof.radii = radii;
  for (double r : radii) prof.raw.push_back(eps_propagation(a, r, opt));
  const std::size_t m = radii.size();
  prof.eps_lo.resize(m);
  prof.eps_hi.resize(m);
  double run_hi = kInfinity;
  for (std::size_t i = 0; i < m; ++i) {
    run_hi = std::min(run_hi, prof.raw[i].bracket.hi);
    prof.eps_hi[i] = run_hi;
  }
  double run_lo = 0.0;
  for (std::size_t i = m; i-- > 0;) {
    run_lo = std::max(run_lo, prof.raw[i].bracket.lo);
    prof.eps_lo[i] = run_lo;
  }
  for (std::size_t i = 0; i < m; ++i)
    if (prof.eps_lo[i] > prof.eps_hi[i] * (1.0 + 1e-12) + 1e-12)
      throw BoundViolation("eps-propagation bracket", "lo " + std::to_string(prof.eps_lo[i]) + " exceeds hi " +
                                                          std::to_string(prof.eps_hi[i]) + " at R = " +
                                                          std::to_string(radii[i]));
  return prof;
}

/// Profile at every distance level strictly below the diameter, plus 0.
inline QuasiLocalityProfile level_profile(const LpOperator& a, const EpsOptions& opt = {}) {
  std::vector<double> radii;
  for (double r : a.space()->distance_levels())
    if (r < a.space()->diameter() || a.space()->diameter() == 0.0) radii.push_back(r);
  return quasi_locality_profile(a, radii, opt);
}

// ---------------------------------------------------------------------------
// Commutator certificates

struct CommutWitness {
  double value = 0.0;
  std::optional<ScalarFunction> function;
  std::string kind;  // which candidate family produced it
};

struct CommutCertificate {
  double lipschitz = 0.0;
  double bound = 0.0;
  std::string method;        // "partition", "schur" or "trivial"
  int partition_n = 0;       // minimising N of the partition bound
  double partition_bound = kInfinity;
  double schur_bound = kInfinity;
  double trivial_bound = kInfinity;
  double norm_hi = 0.0;
  double witness_lo = 0.0;
  std::optional<ScalarFunction> witness;
};

namespace detail {

inline Eigen::MatrixXcd schur_majorant(const LpOperator& a, double lipschitz) {
  const auto& sp = *a.space();
  const auto k = static_cast<Eigen::Index>(a.fiber_dim());
  Eigen::MatrixXcd m = a.matrix().cwiseAbs().cast<std::complex<double>>();
  for (std::size_t x = 0; x < sp.n(); ++x)
    for (std::size_t y = 0; y < sp.n(); ++y)
      m.block(static_cast<Eigen::Index>(x) * k, static_cast<Eigen::Index>(y) * k, k, k) *=
          std::min(lipschitz * sp.distance(x, y), 2.0);
  return m;
}

}  // namespace detail

/// The upper-bound half of a certificate; reuses a precomputed tail profile and norm.
inline CommutCertificate commut_upper_bound(const LpOperator& a, double lipschitz, const TailProfile& tail,
                                            double norm_hi) {
  if (!(lipschitz > 0.0)) throw InvalidArgument("Lipschitz constant must be positive");
  CommutCertificate c;
  c.lipschitz = lipschitz;
  c.norm_hi = norm_hi;
  for (int n = 2; n <= kPartitionMaxN; ++n) {
    const double radius = 1.0 / (lipschitz * n);
    const double v = 12.0 * norm_hi / n + 2.0 * n * n * tail.hi_at(radius);
    if (v < c.partition_bound) c.partition_bound = v, c.partition_n = n;
  }
  const Eigen::MatrixXcd k = detail::schur_majorant(a, lipschitz);
  c.schur_bound = detail::matrix_norm_upper(detail::weighted(k, a.space()->weights(), a.fiber_dim(), a.p()), a.p());
  c.trivial_bound = 2.0 * norm_hi;
  c.bound = c.partition_bound;
  c.method = "partition";
  if (c.schur_bound < c.bound) c.bound = c.schur_bound, c.method = "schur";
  if (c.trivial_bound < c.bound) c.bound = c.trivial_bound, c.method = "trivial";
  return c;
}

/// Candidate L-Lipschitz real contractions for the lower-bound search.
inline std::vector<std::pair<std::string, ScalarFunction>> commut_candidates(const SpacePtr& space, double lipschitz,
                                                                             int budget, std::uint64_t seed = 0) {
  std::vector<std::pair<std::string, ScalarFunction>> out;
  const auto& sp = *space;
  const std::size_t n = sp.n();
  const Eigen::Index m = static_cast<Eigen::Index>(n);
  const std::size_t centres = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(budget, 1)));
  const std::size_t stride = std::max<std::size_t>(1, n / centres);
  // Clamped ramps min(L d(., S), 2) - 1 around single points.
  for (std::size_t c = 0; c < n && out.size() < centres; c += stride) {
    Eigen::VectorXd v(m);
    for (std::size_t x = 0; x < n; ++x)
      v(static_cast<Eigen::Index>(x)) = std::min(lipschitz * sp.distance(x, c), 2.0) - 1.0;
    out.emplace_back("ramp", ScalarFunction::from_real(space, v));
  }
  // Coordinate projections on grids.
  if (sp.grid()) {
    const auto& g = *sp.grid();
    for (std::size_t axis = 0; axis < g.dims.size(); ++axis) {
      const int steps = std::min(g.dims[axis], std::max(budget / 2, 1));
      for (int s = 0; s < steps; ++s) {
        const double centre = (g.dims[axis] - 1) * (steps == 1 ? 0.5 : static_cast<double>(s) / (steps - 1));
        Eigen::VectorXd v(m);
        for (std::size_t x = 0; x < n; ++x)
          v(static_cast<Eigen::Index>(x)) = std::clamp(lipschitz * (g.coords[x][axis] - centre), -1.0, 1.0);
        out.emplace_back("coordinate", ScalarFunction::from_real(space, v));
      }
    }
  }
  // McShane extensions of random sign patterns on a (2/L)-separated net.
  std::vector<std::size_t> net;
  for (std::size_t x = 0; x < n; ++x) {
    bool far = true;
    for (auto y : net) far = far && sp.distance(x, y) >= 2.0 / lipschitz;
    if (far) net.push_back(x);
  }
  if (net.size() >= 2) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (int t = 0; t < budget; ++t) {
      std::vector<Anchor> anchors;
      for (std::size_t i = 0; i < net.size(); ++i)
        anchors.push_back({net[i], (t == 0 ? (i % 2 == 0) : rng.uniform() < 0.5) ? 1.0 : -1.0});
      out.emplace_back("mcshane", mcshane_extend(space, anchors, lipschitz));
    }
  }
  return out;
}

/// Best lower bound of sup ||[a, f]|| found over the candidate family.
inline CommutWitness commut_lower_bound(const LpOperator& a, double lipschitz, int budget,
                                        const NormOptions& norm_opt = {2, 200, 1e-10, 0x51ed5eedULL}) {
  if (budget < 1) throw InvalidArgument("commut_lower_bound needs a positive budget");
  if (!(lipschitz > 0.0)) throw InvalidArgument("Lipschitz constant must be positive");
  CommutWitness best;
  for (auto& [kind, f] : commut_candidates(a.space(), lipschitz, budget)) {
    if (lipschitz_constant(f) > lipschitz * (1.0 + 1e-12) || f.sup_norm() > 1.0) continue;
    const double v = op_norm(commutator(a, f), norm_opt).lo;
    if (v > best.value || !best.function) {
      best.value = v;
      best.function = f;
      best.kind = kind;
    }
  }
  return best;
}

inline CommutCertificate commut_upper_bound(const LpOperator& a, double lipschitz, int witness_budget = 8) {
  const TailProfile tail(a);
  CommutCertificate c = commut_upper_bound(a, lipschitz, tail, op_norm_upper(a));
  if (witness_budget > 0) {
    auto w = commut_lower_bound(a, lipschitz, witness_budget);
    c.witness_lo = w.value;
    c.witness = std::move(w.function);
  }
  return c;
}

/// Raised when an operator is not quasi-local enough to certify at the requested scale.
class NotQuasiLocal : public Error {
 public:
  NotQuasiLocal(const std::string& why, QuasiLocalityProfile profile)
      : Error("not quasi-local: " + why), profile_(std::move(profile)) {}
  const QuasiLocalityProfile& profile() const { return profile_; }

 private:
  QuasiLocalityProfile profile_;
};

struct LipschitzScale {
  double lipschitz = 0.0;
  CommutCertificate certificate;
  int gate_n = 0;             // least N with 6 ||a|| / N < eps / 2
  double gate_threshold = 0;  // eps / (2 N^2)
  double gate_radius = 0;     // smallest level below the diameter meeting the threshold
};

/// Largest L = 2^-m (m = 0..40) whose certificate bound is <= eps.
///
/// Admission first requires the operator to have eps/(2N^2)-propagation at most
/// R for some R below the diameter, N the least integer with 6||a||/N < eps/2;
/// otherwise every operator on a finite space would pass at tiny L.
inline LipschitzScale find_lipschitz_scale(const LpOperator& a, double eps, int witness_budget = 8) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  const TailProfile tail(a);
  const double norm_hi = op_norm_upper(a);
  LipschitzScale out;
  out.gate_n = static_cast<int>(std::floor(12.0 * norm_hi / eps)) + 1;
  out.gate_threshold = eps / (2.0 * out.gate_n * static_cast<double>(out.gate_n));
  const double diam = a.space()->diameter();
  bool admitted = false;
  for (double r : tail.levels()) {
    if (diam > 0.0 && r >= diam) break;
    if (tail.hi_at(r) <= out.gate_threshold) {
      admitted = true;
      out.gate_radius = r;
      break;
    }
  }
  if (!admitted)
    throw NotQuasiLocal("no radius below the diameter has eps/(2N^2)-propagation with eps = " + std::to_string(eps) +
                            ", N = " + std::to_string(out.gate_n),
                        level_profile(a));
  double running = 0.0;
  std::vector<CommutCertificate> certs;
  for (int m = kLipschitzGridDepth; m >= 0; --m) {
    CommutCertificate c = commut_upper_bound(a, std::ldexp(1.0, -m), tail, norm_hi);
    running = std::max(running, c.bound);
    c.bound = running;  // nondecreasing in L by construction
    certs.push_back(std::move(c));
  }
  for (auto it = certs.rbegin(); it != certs.rend(); ++it) {
    if (it->bound <= eps) {
      out.lipschitz = it->lipschitz;
      out.certificate = *it;
      if (witness_budget > 0) {
        auto w = commut_lower_bound(a, out.lipschitz, witness_budget);
        out.certificate.witness_lo = w.value;
        out.certificate.witness = std::move(w.function);
      }
      return out;
    }
  }
  throw NotQuasiLocal("no L in {2^0, ..., 2^-40} certifies commutators below " + std::to_string(eps),
                      level_profile(a));
}

}  // namespace qlroe

#endif  // QLROE_LOCALITY_HPP
