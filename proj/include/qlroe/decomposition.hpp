#ifndef QLROE_DECOMPOSITION_HPP
#define QLROE_DECOMPOSITION_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qlroe/error.hpp"
#include "qlroe/space.hpp"

namespace qlroe {

/// A list of nonempty subsets of one space.
struct MetricFamily {
  SpacePtr space;
  std::vector<Subset> sets;

  MetricFamily() = default;
  MetricFamily(SpacePtr sp, std::vector<Subset> s) : space(std::move(sp)), sets(std::move(s)) {
    if (!space) throw InvalidArgument("metric family needs a space");
    for (const auto& x : sets) {
      if (x.empty()) throw InvalidArgument("metric family sets must be nonempty");
      if (x.indices().back() >= space->n()) throw InvalidArgument("metric family set has an unknown point");
    }
  }

  /// Index of `s` in the family, if present.
  std::optional<std::size_t> find(const Subset& s) const {
    for (std::size_t i = 0; i < sets.size(); ++i)
      if (sets[i] == s) return i;
    return std::nullopt;
  }

  double max_diameter() const {
    double d = 0.0;
    for (const auto& s : sets) d = std::max(d, diameter(*space, s));
    return d;
  }
};

/// Two colors of pieces, each color pairwise R-disjoint, jointly covering target.
struct RDecomposition {
  Subset target;
  std::vector<Subset> colors[2];
  double radius = 0.0;
};

struct PieceViolation {
  int color = 0;
  std::size_t first = 0, second = 0;
  double distance = 0.0;
};

struct DecompositionReport {
  bool valid = true;
  bool covers = true;
  bool contained = true;
  std::vector<PieceViolation> violations;
  std::string message;
};

inline DecompositionReport validate_decomposition(const FiniteMetricSpace& space, const RDecomposition& dec) {
  DecompositionReport r;
  std::ostringstream msg;
  Subset covered;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < dec.colors[c].size(); ++i) {
      const Subset& piece = dec.colors[c][i];
      if (!is_subset(piece, dec.target)) {
        r.contained = false;
        msg << "piece " << c << ":" << i << " leaves the target; ";
      }
      covered = unite(covered, piece);
    }
  if (!is_subset(dec.target, covered)) {
    r.covers = false;
    msg << "pieces miss " << to_string(difference(dec.target, covered)) << "; ";
  }
  for (int c = 0; c < 2; ++c) {
    const auto& ps = dec.colors[c];
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = i + 1; j < ps.size(); ++j) {
        if (ps[i].empty() || ps[j].empty()) continue;
        const double d = set_distance(space, ps[i], ps[j]);
        if (!(d > dec.radius)) {
          r.violations.push_back({c, i, j, d});
          msg << "color " << c << " pieces " << i << "," << j << " at distance " << d << " <= " << dec.radius << "; ";
        }
      }
  }
  r.valid = r.covers && r.contained && r.violations.empty();
  r.message = msg.str();
  return r;
}

/// X_0 = {X} -> X_1 -> ... -> X_m, where steps[n-1][t] decomposes families[n-1].sets[t].
struct DecompositionChain {
  std::vector<MetricFamily> families;
  std::vector<std::vector<RDecomposition>> steps;
  std::vector<double> radii;
  double final_diam = 0.0;

  std::size_t length() const { return steps.size(); }
  const SpacePtr& space() const { return families.front().space; }
};

struct ChainReport {
  bool valid = true;
  std::optional<std::size_t> failing_step;  // 1-based
  double final_diam = 0.0;
  std::string message;
};

inline ChainReport validate_chain(const DecompositionChain& chain, const std::vector<double>& radii) {
  ChainReport r;
  auto fail = [&](std::size_t step, const std::string& why) {
    if (r.valid) r.failing_step = step;
    r.valid = false;
    r.message += "step " + std::to_string(step) + ": " + why + "; ";
  };
  if (chain.families.empty()) {
    r.valid = false;
    r.message = "chain has no families";
    return r;
  }
  if (radii.size() != chain.steps.size()) {
    r.valid = false;
    r.message = "expected " + std::to_string(chain.steps.size()) + " radii, got " + std::to_string(radii.size());
    return r;
  }
  if (chain.families.size() != chain.steps.size() + 1) {
    r.valid = false;
    r.message = "families and steps disagree in length";
    return r;
  }
  const auto& sp = *chain.space();
  if (chain.families[0].sets.size() != 1 || chain.families[0].sets[0] != sp.all()) fail(0, "first family is not {X}");
  for (std::size_t n = 1; n <= chain.steps.size(); ++n) {
    const auto& prev = chain.families[n - 1];
    const auto& next = chain.families[n];
    const auto& step = chain.steps[n - 1];
    if (step.size() != prev.sets.size()) {
      fail(n, "decomposition count does not match the family");
      continue;
    }
    for (std::size_t t = 0; t < step.size(); ++t) {
      const RDecomposition& dec = step[t];
      if (dec.target != prev.sets[t]) fail(n, "decomposition " + std::to_string(t) + " has the wrong target");
      RDecomposition at = dec;
      at.radius = radii[n - 1];
      const auto rep = validate_decomposition(sp, at);
      if (!rep.valid) fail(n, "set " + std::to_string(t) + ": " + rep.message);
      for (int c = 0; c < 2; ++c)
        for (const auto& piece : dec.colors[c])
          if (!next.find(piece)) fail(n, "piece " + to_string(piece) + " is not in the next family");
    }
  }
  r.final_diam = chain.families.back().max_diameter();
  return r;
}

/// Splits along axis n into global coordinate intervals of ceil(R_n)+1 points,
/// colored alternately.
inline DecompositionChain grid_chain(const SpacePtr& space, const std::vector<double>& radii) {
  if (!space->grid()) throw InvalidArgument("grid_chain needs a grid space");
  const auto& g = *space->grid();
  if (radii.size() > g.dims.size())
    throw InvalidArgument("more radii (" + std::to_string(radii.size()) + ") than axes (" +
                          std::to_string(g.dims.size()) + ")");
  DecompositionChain chain;
  chain.radii = radii;
  chain.families.emplace_back(space, std::vector<Subset>{space->all()});
  for (std::size_t axis = 0; axis < radii.size(); ++axis) {
    const double r = radii[axis];
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("grid_chain radii must be positive and finite");
    const double w = std::ceil(r) + 1.0;
    std::vector<RDecomposition> step;
    std::vector<Subset> next;
    for (const auto& set : chain.families.back().sets) {
      std::map<long long, std::vector<std::size_t>> buckets;
      for (auto x : set) buckets[static_cast<long long>(std::floor(g.coords[x][axis] / w))].push_back(x);
      RDecomposition dec;
      dec.target = set;
      dec.radius = r;
      for (auto& [slot, pts] : buckets) {
        Subset piece(std::move(pts));
        dec.colors[slot % 2 == 0 ? 0 : 1].push_back(piece);
        next.push_back(piece);
      }
      step.push_back(std::move(dec));
    }
    chain.steps.push_back(std::move(step));
    chain.families.emplace_back(space, std::move(next));
  }
  chain.final_diam = chain.families.back().max_diameter();
  return chain;
}

inline MetricFamily fatten_family(const MetricFamily& fam, double s) {
  if (!(s >= 0.0)) throw InvalidArgument("fattening radius must be nonnegative");
  MetricFamily out;
  out.space = fam.space;
  for (const auto& x : fam.sets) out.sets.push_back(neighborhood(*fam.space, x, s));
  return out;
}

/// Target and pieces replaced by s-neighborhoods; the radius drops by 2s.
inline RDecomposition fatten_decomposition(const FiniteMetricSpace& space, const RDecomposition& dec, double s) {
  if (!(s >= 0.0)) throw InvalidArgument("fattening radius must be nonnegative");
  RDecomposition out;
  out.target = neighborhood(space, dec.target, s);
  for (int c = 0; c < 2; ++c)
    for (const auto& piece : dec.colors[c]) out.colors[c].push_back(neighborhood(space, piece, s));
  out.radius = dec.radius - 2.0 * s;
  return out;
}

}  // namespace qlroe

#endif  // QLROE_DECOMPOSITION_HPP
