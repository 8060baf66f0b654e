#ifndef QLROE_APPROXIMATION_HPP
#define QLROE_APPROXIMATION_HPP

// The single decomposition step and the iterated pipeline that turns a
// quasi-local operator into a finite-propagation approximant.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qlroe/corpus.hpp"
#include "qlroe/cutdown.hpp"
#include "qlroe/decomposition.hpp"
#include "qlroe/error.hpp"
#include "qlroe/locality.hpp"
#include "qlroe/lp_operator.hpp"
#include "qlroe/space.hpp"

namespace qlroe {

/// An operator with op = block_cutdown(op, family); parent_sets[j] contains supp(family[j]).
struct BlockDiagonalTerm {
  LpOperator op;
  CutdownFamily family;
  std::vector<Subset> parent_sets;
  std::vector<std::size_t> parent_ids;  // index into the owning chain family, if any

  /// Entrywise distance between op and its own cutdown.
  double block_defect() const { return max_abs_diff(op, block_cutdown(op, family)); }

  bool supports_in_parents() const {
    for (std::size_t j = 0; j < family.size(); ++j)
      if (!is_subset(family.supports()[j], parent_sets[j])) return false;
    return true;
  }

  static BlockDiagonalTerm whole(const LpOperator& op) {
    const Subset all = op.space()->all();
    return {op, CutdownFamily::indicators(op.space(), {all}), {all}, {0}};
  }
};

inline constexpr double kBlockDiagonalTolerance = 1e-12;

/// Where a child block came from: parent block, color and piece index.
struct PieceRef {
  std::size_t block = 0;
  int color = 0;
  std::size_t piece = 0;
};

struct StepReport {
  double lipschitz = 0.0;
  double eps = 0.0;
  double commut_bound = 0.0;
  NormBracket error;                     // ||a - sum of the four terms||
  std::array<NormBracket, 4> term_errors;  // ||g_i a g_i' - a_ii'||, ordered 00, 01, 10, 11
  double max_ramp_lipschitz = 0.0;
  bool supports_ok = true;
};

struct StepResult {
  std::vector<BlockDiagonalTerm> terms;           // a_00, a_01, a_10, a_11
  std::array<std::vector<PieceRef>, 2> origins;   // per color, aligned with the color's family
  StepReport report;
};

namespace detail {

inline void check_lipschitz(const ScalarFunction& f, double limit, const std::string& what) {
  const double l = lipschitz_constant(f);
  if (l > limit * (1.0 + 1e-12)) {
    const auto [x, y] = lipschitz_witness(f);
    const auto& lab = f.space()->labels();
    throw BoundViolation("ramp Lipschitz constant", what + " has Lipschitz constant " + std::to_string(l) + " > " +
                                                        std::to_string(limit) + " at pair (" + lab[x] + ", " + lab[y] +
                                                        ")");
  }
}

inline Eigen::VectorXd restrict_values(const ScalarFunction& f, const Subset& s) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.size()));
  for (auto x : s) v(static_cast<Eigen::Index>(x)) = f(x).real();
  return v;
}

}  // namespace detail

/// One decomposition step. decs[j] decomposes a set containing block j of
/// term.family at radius >= 4/L + 4. The commutator certificate, when not
/// supplied, is recomputed on term.op.
inline StepResult decompose_step(const BlockDiagonalTerm& term, double lipschitz, double eps,
                                 const std::vector<RDecomposition>& decs,
                                 std::optional<double> commut_bound = std::nullopt) {
  if (!(lipschitz > 0.0) || !(eps > 0.0)) throw InvalidArgument("decompose_step needs L > 0 and eps > 0");
  const auto& space = term.op.space();
  const auto& sp = *space;
  const std::size_t blocks = term.family.size();
  if (decs.size() != blocks) throw InvalidArgument("one decomposition per block is required");
  if (term.block_defect() > kBlockDiagonalTolerance)
    throw InvalidArgument("term is not block diagonal with respect to its family");
  const double needed = 4.0 / lipschitz + 4.0;

  StepResult out;
  StepReport& rep = out.report;
  rep.lipschitz = lipschitz;
  rep.eps = eps;
  rep.commut_bound = commut_bound ? *commut_bound : commut_upper_bound(term.op, lipschitz, 0).bound;
  if (rep.commut_bound > eps)
    throw InvalidArgument("commutator certificate " + std::to_string(rep.commut_bound) + " exceeds eps " +
                          std::to_string(eps));

  const double width = std::min(1.0, 1.0 / lipschitz);
  std::array<Eigen::VectorXd, 2> g = {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.n())),
                                      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.n()))};
  std::array<std::vector<ScalarFunction>, 2> fam_members;
  std::array<std::vector<Subset>, 2> child_blocks, child_parents;

  for (std::size_t b = 0; b < blocks; ++b) {
    const RDecomposition& dec = decs[b];
    const Subset& block = term.family.supports()[b];
    if (block.empty()) continue;
    if (dec.radius < needed * (1.0 - 1e-12))
      throw InvalidArgument("decomposition radius " + std::to_string(dec.radius) + " below 4/L+4 = " +
                            std::to_string(needed));
    const auto vrep = validate_decomposition(sp, dec);
    if (!vrep.valid) throw InvalidArgument("invalid decomposition for block " + std::to_string(b) + ": " + vrep.message);
    if (!is_subset(block, dec.target))
      throw InvalidArgument("block " + std::to_string(b) + " is not inside its decomposition target");

    Subset x0;
    for (const auto& piece : dec.colors[0]) x0 = unite(x0, piece);
    x0 = intersect(x0, block);
    // g_0 is 1 on X_0 and vanishes at distance min(1, 1/L); g_1 = chi_block - g_0.
    if (!x0.empty()) {
      const ScalarFunction ramp = ramp_function(space, x0, 0.0, width);
      detail::check_lipschitz(ramp, std::max(lipschitz, 1.0), "g_0 ramp");
      g[0] += detail::restrict_values(ramp, block);
    }
    for (auto x : block) g[1](static_cast<Eigen::Index>(x)) = 1.0 - g[0](static_cast<Eigen::Index>(x));

    for (int c = 0; c < 2; ++c) {
      std::vector<ScalarFunction> local;
      for (std::size_t j = 0; j < dec.colors[c].size(); ++j) {
        const Subset piece = intersect(dec.colors[c][j], block);
        if (piece.empty()) continue;
        const ScalarFunction f = ramp_function(space, piece, 1.0, 1.0 + 1.0 / lipschitz);
        detail::check_lipschitz(f, lipschitz, "cutdown ramp");
        rep.max_ramp_lipschitz = std::max(rep.max_ramp_lipschitz, lipschitz_constant(f));
        local.push_back(f);
        // Inside the block, f and f chi_block cut down chi_block z chi_block identically.
        fam_members[c].push_back(ScalarFunction::from_real(space, detail::restrict_values(f, block)));
        child_blocks[c].push_back(intersect(f.support(), block));
        child_parents[c].push_back(neighborhood(sp, dec.colors[c][j], 1.0 / lipschitz + 1.0));
        out.origins[c].push_back({b, c, j});
      }
      if (local.empty()) continue;
      const CutdownFamily ramps(space, local);
      if (ramps.size() >= 2 && !(ramps.min_gap() > 2.0 / lipschitz))
        throw BoundViolation("cutdown family separation", "color " + std::to_string(c) + " ramp supports are only " +
                                                              std::to_string(ramps.min_gap()) + " apart");
      detail::check_lipschitz(ramps.sum(), lipschitz, "color " + std::to_string(c) + " ramp sum");
    }
  }

  std::array<CutdownFamily, 2> ramps = {CutdownFamily(space, fam_members[0]), CutdownFamily(space, fam_members[1])};

  const ScalarFunction g0 = ScalarFunction::from_real(space, g[0]);
  const ScalarFunction g1 = ScalarFunction::from_real(space, g[1]);
  const std::array<const ScalarFunction*, 2> gs = {&g0, &g1};
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(term.op.dim(), term.op.dim());
  for (int i = 0; i < 2; ++i)
    for (int ip = 0; ip < 2; ++ip) {
      const LpOperator z = sandwich(*gs[i], term.op, *gs[ip]);
      const LpOperator cut = block_cutdown(z, ramps[i]);
      const int t = 2 * i + ip;
      rep.term_errors[t] = op_norm(z - cut);
      sum += cut.matrix();
      CutdownFamily fam = CutdownFamily::indicators(space, child_blocks[i]);
      std::vector<std::size_t> ids(child_blocks[i].size());
      for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = out.origins[i][j].piece;
      out.terms.push_back(BlockDiagonalTerm{cut, std::move(fam), child_parents[i], std::move(ids)});
      if (out.terms[t].block_defect() > kBlockDiagonalTolerance || !out.terms[t].supports_in_parents())
        rep.supports_ok = false;
    }
  rep.error = op_norm(term.op.with_matrix(term.op.matrix() - sum));
  if (rep.error.lo > 8.0 * eps)
    throw BoundViolation("step decomposition bound", "||a - sum a_ii'|| >= " + std::to_string(rep.error.lo) +
                                                         " > 8 eps = " + std::to_string(8.0 * eps));
  if (!rep.supports_ok) throw BoundViolation("block diagonal supports", "a produced term leaves its parent sets");
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct ScheduleEntry {
  int n = 0;
  double eps_n = 0.0;
  double lipschitz = 0.0;
  double radius = 0.0;
  double commut_bound = 0.0;
  NormBracket step_error;  // ||sum of terms before - sum after|| at this step
  double step_budget = 0.0;  // 4^{n-1} * 8 eps_n
};

struct ApproximationCertificate {
  double eps = 0.0;
  std::vector<ScheduleEntry> schedule;
  std::uint64_t term_count = 1;  // 4^m
  std::size_t stored_terms = 1;
  double final_propagation = 0.0;
  double final_diam = 0.0;
  double space_diam = 0.0;
  double margin = 0.0;  // sum_n (1/L_n + 1)
  NormBracket total_error;
  bool degenerate = false;
};

/// eps / (2 * 8^n), computed exactly as a power-of-two scaling.
inline double schedule_eps(double eps, int n) { return std::ldexp(eps, -(3 * n + 1)); }

/// R_n = 4(1/L_n + 1) + 2 * sum_{k<n} (1/L_k + 1), summed in ascending k.
inline std::vector<double> schedule_radii(const std::vector<double>& lipschitz) {
  std::vector<double> out;
  double s = 0.0;
  for (double l : lipschitz) {
    out.push_back(4.0 * (1.0 / l + 1.0) + 2.0 * s);
    s += 1.0 / l + 1.0;
  }
  return out;
}

inline double schedule_margin(const std::vector<double>& lipschitz) {
  double s = 0.0;
  for (double l : lipschitz) s += 1.0 / l + 1.0;
  return s;
}

struct GridChainStrategy {};
using ChainStrategy = std::variant<GridChainStrategy, DecompositionChain>;

struct ApproximationResult {
  LpOperator approximant;
  ApproximationCertificate certificate;
  DecompositionChain chain;
};

/// Number of steps the strategy will run: the grid dimension or the user chain length.
inline int chain_length(const LpOperator& b, const ChainStrategy& strategy) {
  if (std::holds_alternative<DecompositionChain>(strategy))
    return static_cast<int>(std::get<DecompositionChain>(strategy).length());
  if (!b.space()->grid()) throw InvalidArgument("grid chain strategy needs a grid space");
  return static_cast<int>(b.space()->grid()->dims.size());
}

inline ApproximationResult approximate_finite_propagation(const LpOperator& b, double eps,
                                                          const ChainStrategy& strategy = GridChainStrategy{},
                                                          int witness_budget = 0) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  const SpacePtr& space = b.space();
  const auto& sp = *space;
  const int m = chain_length(b, strategy);
  if (m < 1) throw InvalidArgument("the chain needs at least one step");

  ApproximationCertificate cert;
  cert.eps = eps;
  std::vector<double> ls;
  for (int n = 1; n <= m; ++n) {
    ScheduleEntry e;
    e.n = n;
    e.eps_n = schedule_eps(eps, n);
    try {
      const LipschitzScale scale = find_lipschitz_scale(b, e.eps_n, witness_budget);
      e.lipschitz = scale.lipschitz;
      e.commut_bound = scale.certificate.bound;
    } catch (const NotQuasiLocal&) {
      // Constant functions commute with everything, so L = 0 is always admissible; it forces R_n = inf.
      if (classify(b).kind == LocalityClass::not_quasi_local) throw;
      e.lipschitz = 0.0;
      e.commut_bound = 0.0;
    }
    e.step_budget = std::ldexp(8.0 * e.eps_n, 2 * (n - 1));
    ls.push_back(e.lipschitz);
    cert.schedule.push_back(e);
  }
  const std::vector<double> radii = schedule_radii(ls);
  for (int n = 0; n < m; ++n) cert.schedule[n].radius = radii[n];
  cert.margin = schedule_margin(ls);
  cert.term_count = std::uint64_t{1} << (2 * m);

  cert.space_diam = sp.diameter();
  if (radii[0] >= sp.diameter()) {
    ApproximationResult res{b, cert, DecompositionChain{}};
    res.certificate.degenerate = true;
    res.certificate.final_propagation = propagation(b);
    res.certificate.total_error = {0.0, 0.0};
    res.certificate.stored_terms = 1;
    return res;
  }
  for (int n = 0; n < m; ++n)
    if (!(ls[n] > 0.0))
      throw BoundViolation("commutator certificate", "no positive Lipschitz scale at step " + std::to_string(n + 1));

  DecompositionChain chain = std::holds_alternative<DecompositionChain>(strategy)
                                 ? std::get<DecompositionChain>(strategy)
                                 : grid_chain(space, radii);
  const ChainReport crep = validate_chain(chain, radii);
  if (!crep.valid) throw BoundViolation("chain validity", crep.message);
  cert.final_diam = crep.final_diam;

  ApproximationResult res{b, cert, chain};

  std::vector<BlockDiagonalTerm> terms = {BlockDiagonalTerm::whole(b)};
  double s_prev = 0.0;
  for (int n = 1; n <= m; ++n) {
    ScheduleEntry& e = res.certificate.schedule[n - 1];
    const auto& step = chain.steps[n - 1];
    const MetricFamily& next_family = chain.families[n];
    const double s_now = s_prev + (1.0 / e.lipschitz + 1.0);
    Eigen::MatrixXcd before = Eigen::MatrixXcd::Zero(b.dim(), b.dim());
    Eigen::MatrixXcd after = Eigen::MatrixXcd::Zero(b.dim(), b.dim());
    std::vector<BlockDiagonalTerm> next;
    for (const auto& term : terms) {
      before += term.op.matrix();
      std::vector<RDecomposition> decs;
      for (std::size_t j = 0; j < term.family.size(); ++j)
        decs.push_back(fatten_decomposition(sp, step[term.parent_ids[j]], s_prev));
      StepResult sr = decompose_step(term, e.lipschitz, e.eps_n, decs, e.commut_bound);
      for (int i = 0; i < 2; ++i) {
        // a_i0 + a_i1 share color i's family, so they are stored as one term.
        BlockDiagonalTerm merged = sr.terms[2 * i];
        merged.op = sr.terms[2 * i].op + sr.terms[2 * i + 1].op;
        for (std::size_t j = 0; j < merged.family.size(); ++j) {
          const PieceRef& ref = sr.origins[i][j];
          const Subset& piece = step[term.parent_ids[ref.block]].colors[i][ref.piece];
          const auto id = next_family.find(piece);
          if (!id) throw InvalidArgument("chain piece missing from the next family");
          merged.parent_ids[j] = *id;
          merged.parent_sets[j] = neighborhood(sp, piece, s_now);
        }
        if (!merged.supports_in_parents())
          throw BoundViolation("block diagonal supports", "a step " + std::to_string(n) + " term leaves N_s(X_n)");
        after += merged.op.matrix();
        next.push_back(std::move(merged));
      }
    }
    e.step_error = op_norm(b.with_matrix(before - after));
    if (e.step_error.lo > e.step_budget)
      throw BoundViolation("step decomposition bound", "step " + std::to_string(n) + " error " +
                                                           std::to_string(e.step_error.lo) + " > " +
                                                           std::to_string(e.step_budget));
    terms = std::move(next);
    s_prev = s_now;
  }

  Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(b.dim(), b.dim());
  for (const auto& t : terms) total += t.op.matrix();
  res.approximant = b.with_matrix(std::move(total));
  res.certificate.stored_terms = terms.size();
  res.certificate.final_propagation = propagation(res.approximant);
  res.certificate.total_error = op_norm(b - res.approximant);
  if (res.certificate.final_propagation > res.certificate.final_diam + 2.0 * res.certificate.margin)
    throw BoundViolation("final propagation bound", "propagation " + std::to_string(res.certificate.final_propagation) +
                                                        " exceeds final_diam + 2 sum(1/L_n + 1)");
  if (res.certificate.total_error.lo > eps)
    throw BoundViolation("approximation error bound", "||b - b'|| >= " + std::to_string(res.certificate.total_error.lo) +
                                                          " > eps = " + std::to_string(eps));
  return res;
}

// ---------------------------------------------------------------------------
// Certificate audit

struct CertificateCheck {
  std::string name;
  bool ok = true;
  std::string detail;
};

/// Re-derives every recorded inequality and schedule identity from the certificate's own fields.
inline std::vector<CertificateCheck> audit_certificate(const ApproximationCertificate& c) {
  std::vector<CertificateCheck> out;
  auto add = [&](std::string name, bool ok, std::string detail) { out.push_back({std::move(name), ok, std::move(detail)}); };
  std::vector<double> ls;
  double budget = 0.0;
  bool eps_ok = true, budget_ok = true, commut_ok = true, step_ok = true;
  for (std::size_t i = 0; i < c.schedule.size(); ++i) {
    const auto& e = c.schedule[i];
    eps_ok = eps_ok && e.n == static_cast<int>(i) + 1 && e.eps_n == schedule_eps(c.eps, e.n);
    budget_ok = budget_ok && e.step_budget == std::ldexp(8.0 * e.eps_n, 2 * (e.n - 1));
    commut_ok = commut_ok && e.commut_bound <= e.eps_n && e.lipschitz >= 0.0;
    step_ok = step_ok && (c.degenerate || e.step_error.lo <= e.step_budget);
    ls.push_back(e.lipschitz);
    budget += e.step_budget;
  }
  add("eps schedule", eps_ok, "eps_n = eps / (2 * 8^n)");
  add("step budget", budget_ok, "budget_n = 4^{n-1} * 8 eps_n");
  add("commutator certificate", commut_ok, "commut bound <= eps_n");
  add("step decomposition bound", step_ok, "step error <= 4^{n-1} * 8 eps_n");
  const auto radii = schedule_radii(ls);
  bool radii_ok = true;
  for (std::size_t i = 0; i < c.schedule.size(); ++i) radii_ok = radii_ok && c.schedule[i].radius == radii[i];
  add("radius schedule", radii_ok, "R_n = 4(1/L_n + 1) + 2 sum_{k<n}(1/L_k + 1)");
  add("margin", c.margin == schedule_margin(ls), "sum_n (1/L_n + 1)");
  const auto m = static_cast<int>(c.schedule.size());
  const double telescoped = c.eps * (1.0 - std::ldexp(1.0, -m));
  add("error telescoping", std::abs(budget - telescoped) <= 4.0 * std::numeric_limits<double>::epsilon() * c.eps && budget <= c.eps,
      "sum_n 4^{n-1} 8 eps_n = eps (1 - 2^-m)");
  add("term count", c.term_count == (std::uint64_t{1} << (2 * m)) && c.stored_terms <= c.term_count, "4^m terms");
  add("approximation error bound", c.total_error.lo <= c.eps && c.total_error.lo <= c.total_error.hi,
      "||b - b'||.lo <= eps");
  add("final propagation bound",
      c.degenerate || c.final_propagation <= c.final_diam + 2.0 * c.margin, "propagation <= final_diam + 2 margin");
  add("degenerate flag", c.schedule.empty() || c.degenerate == (c.schedule[0].radius >= c.space_diam),
      "degenerate iff R_1 >= diam(X)");
  return out;
}

}  // namespace qlroe

#endif  // QLROE_APPROXIMATION_HPP
