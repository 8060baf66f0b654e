#ifndef QLROE_CUTDOWN_HPP
#define QLROE_CUTDOWN_HPP

// Block cutdowns theta(a) = sum_j f_j a e_j, the block conditional expectation,
// and the finite sign group it averages over.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qlroe/error.hpp"
#include "qlroe/locality.hpp"
#include "qlroe/lp_operator.hpp"
#include "qlroe/space.hpp"

namespace qlroe {

/// Largest |J| + 1 for which the sign group is enumerated.
inline constexpr int kMaxSignGroupGenerators = 20;

/// Positive contractions with pairwise disjoint supports.
class CutdownFamily {
 public:
  CutdownFamily(SpacePtr space, std::vector<ScalarFunction> members)
      : space_(std::move(space)), members_(std::move(members)) {
    if (!space_) throw InvalidArgument("cutdown family needs a space");
    for (std::size_t j = 0; j < members_.size(); ++j) {
      const auto& f = members_[j];
      if (!LpOperator::same_space(f.space(), space_)) throw InvalidArgument("family member on a different space");
      if (!f.is_real()) throw InvalidArgument("family member " + std::to_string(j) + " is not real valued");
      const Eigen::VectorXd v = f.real_values();
      if (v.size() && (v.minCoeff() < 0.0 || v.maxCoeff() > 1.0))
        throw InvalidArgument("family member " + std::to_string(j) + " is not a positive contraction");
      supports_.push_back(f.support());
      lipschitz_.push_back(lipschitz_constant(f));
    }
    min_gap_ = kInfinity;
    for (std::size_t i = 0; i < supports_.size(); ++i)
      for (std::size_t j = i + 1; j < supports_.size(); ++j) {
        if (!disjoint(supports_[i], supports_[j]))
          throw InvalidArgument("family members " + std::to_string(i) + " and " + std::to_string(j) +
                                " have overlapping supports");
        if (supports_[i].empty() || supports_[j].empty()) continue;
        min_gap_ = std::min(min_gap_, set_distance(*space_, supports_[i], supports_[j]));
      }
  }

  static CutdownFamily indicators(const SpacePtr& space, const std::vector<Subset>& sets) {
    std::vector<ScalarFunction> m;
    for (const auto& s : sets) m.push_back(ScalarFunction::indicator(space, s));
    return CutdownFamily(space, std::move(m));
  }

  const SpacePtr& space() const { return space_; }
  std::size_t size() const { return members_.size(); }
  const std::vector<ScalarFunction>& members() const { return members_; }
  const std::vector<Subset>& supports() const { return supports_; }
  const std::vector<double>& member_lipschitz() const { return lipschitz_; }
  double max_lipschitz() const { return lipschitz_.empty() ? 0.0 : *std::max_element(lipschitz_.begin(), lipschitz_.end()); }
  /// Exact minimum distance between distinct nonempty supports (+inf if fewer than two).
  double min_gap() const { return min_gap_; }

  /// e = sum_j e_j.
  ScalarFunction sum() const {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space_->n()));
    for (const auto& f : members_) v += f.values();
    return ScalarFunction(space_, v);
  }

 private:
  SpacePtr space_;
  std::vector<ScalarFunction> members_;
  std::vector<Subset> supports_;
  std::vector<double> lipschitz_;
  double min_gap_ = kInfinity;
};

/// sum_j f_j a e_j with f = left (defaults to the same family).
inline LpOperator block_cutdown(const LpOperator& a, const CutdownFamily& right,
                                const std::optional<CutdownFamily>& left = std::nullopt) {
  const CutdownFamily& lf = left ? *left : right;
  if (lf.size() != right.size()) throw InvalidArgument("cutdown families have different index counts");
  if (!LpOperator::same_space(a.space(), right.space()) || !LpOperator::same_space(a.space(), lf.space()))
    throw InvalidArgument("cutdown family and operator live on different spaces");
  const auto k = static_cast<Eigen::Index>(a.fiber_dim());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(a.dim(), a.dim());
  for (std::size_t j = 0; j < right.size(); ++j) {
    const auto& f = lf.members()[j];
    const auto& e = right.members()[j];
    for (auto x : lf.supports()[j])
      for (auto y : right.supports()[j]) {
        const auto xi = static_cast<Eigen::Index>(x) * k;
        const auto yi = static_cast<Eigen::Index>(y) * k;
        out.block(xi, yi, k, k) += (f(x) * e(y)) * a.matrix().block(xi, yi, k, k);
      }
  }
  return a.with_matrix(std::move(out));
}

struct BlockNormReport {
  NormBracket lhs;                  // ||sum_j f_j a e_j||
  std::vector<NormBracket> terms;   // ||f_j a e_j||
  NormBracket rhs;                  // sup_j of terms
  bool intervals_intersect = false;
  double relative_gap = 0.0;        // |lhs.hi - rhs.hi| / max(1, rhs.hi)
  bool pass = false;
};

/// Checks ||sum_j f_j a e_j|| = sup_j ||f_j a e_j|| at bracket level.
inline BlockNormReport verify_block_norm_formula(const LpOperator& a, const CutdownFamily& right,
                                                 const std::optional<CutdownFamily>& left = std::nullopt,
                                                 const NormOptions& opt = {}) {
  const CutdownFamily& lf = left ? *left : right;
  BlockNormReport r;
  r.lhs = op_norm(block_cutdown(a, right, left), opt);
  for (std::size_t j = 0; j < right.size(); ++j) {
    const auto t = op_norm(sandwich(lf.members()[j], a, right.members()[j]), opt);
    r.terms.push_back(t);
    r.rhs.lo = std::max(r.rhs.lo, t.lo);
    r.rhs.hi = std::max(r.rhs.hi, t.hi);
  }
  const double tol = 1e-12 * std::max(1.0, r.rhs.hi);
  r.intervals_intersect = intersects(r.lhs, r.rhs, tol);
  r.relative_gap = std::abs(r.lhs.hi - r.rhs.hi) / std::max(1.0, r.rhs.hi);
  r.pass = r.intervals_intersect;
  return r;
}

/// Blocks A_j and the complement B = X \ union A_j.
class SignPartition {
 public:
  SignPartition(SpacePtr space, std::vector<Subset> blocks) : space_(std::move(space)), blocks_(std::move(blocks)) {
    Subset covered;
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      for (auto x : blocks_[j])
        if (x >= space_->n()) throw InvalidArgument("partition block contains an unknown point");
      if (!disjoint(covered, blocks_[j])) throw InvalidArgument("partition blocks overlap");
      covered = unite(covered, blocks_[j]);
    }
    complement_ = difference(space_->all(), covered);
    label_.assign(space_->n(), blocks_.size());
    for (std::size_t j = 0; j < blocks_.size(); ++j)
      for (auto x : blocks_[j]) label_[x] = j;
  }

  static SignPartition from_family(const CutdownFamily& fam) { return {fam.space(), fam.supports()}; }

  const SpacePtr& space() const { return space_; }
  const std::vector<Subset>& blocks() const { return blocks_; }
  const Subset& complement() const { return complement_; }
  /// Block index of x; blocks().size() stands for the complement.
  std::size_t label(std::size_t x) const { return label_[x]; }
  /// Number of sign generators |J| + 1.
  int generators() const { return static_cast<int>(blocks_.size()) + 1; }

 private:
  SpacePtr space_;
  std::vector<Subset> blocks_;
  Subset complement_;
  std::vector<std::size_t> label_;
};

/// E'(a) = sum_j chi_{A_j} a chi_{A_j} + chi_B a chi_B.
inline LpOperator block_expectation(const LpOperator& a, const SignPartition& part) {
  if (!LpOperator::same_space(a.space(), part.space())) throw InvalidArgument("partition on a different space");
  const auto k = static_cast<Eigen::Index>(a.fiber_dim());
  Eigen::MatrixXcd out = a.matrix();
  for (std::size_t x = 0; x < a.points(); ++x)
    for (std::size_t y = 0; y < a.points(); ++y)
      if (part.label(x) != part.label(y))
        out.block(static_cast<Eigen::Index>(x) * k, static_cast<Eigen::Index>(y) * k, k, k).setZero();
  return a.with_matrix(std::move(out));
}

/// Diagonal of the group element with sign bits `mask` (bit j for A_j, bit |J| for B),
/// expanded to fibers.
inline Eigen::VectorXd sign_element(const SignPartition& part, std::uint32_t mask, int fiber_dim) {
  const std::size_t n = part.space()->n();
  Eigen::VectorXd s(static_cast<Eigen::Index>(n) * fiber_dim);
  for (std::size_t x = 0; x < n; ++x) {
    const double v = ((mask >> part.label(x)) & 1U) ? -1.0 : 1.0;
    for (int i = 0; i < fiber_dim; ++i) s(static_cast<Eigen::Index>(x) * fiber_dim + i) = v;
  }
  return s;
}

inline void check_enumerable(const SignPartition& part) {
  if (part.generators() > kMaxSignGroupGenerators)
    throw InvalidArgument("partition too large for enumeration (" + std::to_string(part.generators()) +
                          " sign generators); use block_expectation");
}

/// (1/|G|) sum_{u in G} u^{-1} a u over all 2^{|J|+1} sign patterns.
inline LpOperator sign_group_average(const LpOperator& a, const SignPartition& part) {
  check_enumerable(part);
  if (!LpOperator::same_space(a.space(), part.space())) throw InvalidArgument("partition on a different space");
  const std::uint32_t order = 1U << part.generators();
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(a.dim(), a.dim());
  for (std::uint32_t mask = 0; mask < order; ++mask) {
    const Eigen::VectorXd s = sign_element(part, mask, a.fiber_dim());
    acc += s.asDiagonal() * a.matrix() * s.asDiagonal();  // u^{-1} = u
  }
  return a.with_matrix(acc / static_cast<double>(order));
}

/// max over u in G of the bracket of ||z u - u z||.
inline NormBracket sign_defect(const LpOperator& z, const SignPartition& part, const NormOptions& opt = {}) {
  check_enumerable(part);
  NormBracket worst;
  const std::uint32_t order = 1U << part.generators();
  // u and -u give the same commutator, so the top generator bit stays 0.
  for (std::uint32_t mask = 0; mask < order / 2; ++mask) {
    const Eigen::VectorXd s = sign_element(part, mask, z.fiber_dim());
    const Eigen::MatrixXcd c = z.matrix() * s.asDiagonal() - s.asDiagonal() * z.matrix();
    const NormBracket b = op_norm(z.with_matrix(c), opt);
    worst.lo = std::max(worst.lo, b.lo);
    worst.hi = std::max(worst.hi, b.hi);
  }
  return worst;
}

struct CutdownEstimateReport {
  double lipschitz = 0.0;
  NormBracket defect;                        // ||e a e - sum_j e_j a e_j||
  CommutCertificate certificate;             // for a at lipschitz
  std::optional<NormBracket> sign_defect_bound;  // sup_u ||(eae)u - u(eae)||
  double ratio = 0.0;                        // defect.lo / certificate.bound (observed tightness)
  bool within_commut_bound = false;
  bool within_sign_bound = true;
  bool pass = false;
};

/// Measures ||e a e - sum_j e_j a e_j|| against the commutator certificate at L
/// for a family with 2/L-disjoint supports.
inline CutdownEstimateReport verify_cutdown_estimate(const LpOperator& a, const CutdownFamily& fam, double lipschitz,
                                                     int max_enumerated_blocks = 8, const NormOptions& opt = {}) {
  if (!(lipschitz > 0.0)) throw InvalidArgument("Lipschitz constant must be positive");
  if (!(fam.min_gap() > 2.0 / lipschitz)) throw InvalidArgument("supports not 2/L-disjoint");
  CutdownEstimateReport r;
  r.lipschitz = lipschitz;
  const ScalarFunction e = fam.sum();
  const LpOperator eae = sandwich(e, a, e);
  r.defect = op_norm(eae - block_cutdown(a, fam), opt);
  r.certificate = commut_upper_bound(a, lipschitz, 4);
  r.ratio = r.certificate.bound > 0.0 ? r.defect.lo / r.certificate.bound : 0.0;
  r.within_commut_bound = r.defect.lo <= r.certificate.bound + 1e-9;
  if (static_cast<int>(fam.size()) <= max_enumerated_blocks) {
    r.sign_defect_bound = sign_defect(eae, SignPartition::from_family(fam), opt);
    r.within_sign_bound = r.defect.lo <= r.sign_defect_bound->hi + 1e-9;
  }
  r.pass = r.within_commut_bound && r.within_sign_bound;
  return r;
}

}  // namespace qlroe

#endif  // QLROE_CUTDOWN_HPP
