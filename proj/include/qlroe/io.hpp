#ifndef QLROE_IO_HPP
#define QLROE_IO_HPP

// JSON formats for spaces, operators, families, chains, generator specs and
// certificates. Doubles round-trip exactly; infinities are written as "inf".

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "qlroe/approximation.hpp"
#include "qlroe/corpus.hpp"
#include "qlroe/cutdown.hpp"
#include "qlroe/decomposition.hpp"
#include "qlroe/error.hpp"
#include "qlroe/locality.hpp"
#include "qlroe/lp_operator.hpp"
#include "qlroe/space.hpp"

namespace qlroe::io {

using json = nlohmann::json;

inline json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

inline double to_double(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return kInfinity;
    if (s == "-inf") return -kInfinity;
  }
  throw InvalidArgument("expected a number for '" + what + "'");
}

inline const json& field(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidArgument("missing field '" + key + "'");
  return j.at(key);
}

// ---------------------------------------------------------------------------
// Files

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("cannot parse '" + path + "': " + e.what());
  }
}

/// Writes through a temporary file in the same directory and renames it into place.
inline void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) throw InvalidArgument("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw InvalidArgument("cannot rename into '" + path + "': " + ec.message());
  }
}

inline void write_json(const std::string& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Subsets and functions

inline json to_json(const Subset& s) { return s.indices(); }

inline Subset subset_from_json(const json& j, std::size_t n) {
  if (!j.is_array()) throw InvalidArgument("a point set must be an array of ids");
  std::vector<std::size_t> idx;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw InvalidArgument("point ids must be nonnegative integers");
    const auto x = v.get<std::size_t>();
    if (x >= n) throw InvalidArgument("point id " + std::to_string(x) + " out of range");
    idx.push_back(x);
  }
  return Subset(std::move(idx));
}

inline json to_json(const ScalarFunction& f) {
  json v = json::array();
  for (std::size_t x = 0; x < f.size(); ++x) {
    if (f.is_real()) v.push_back(f(x).real());
    else v.push_back(json::array({f(x).real(), f(x).imag()}));
  }
  return v;
}

// ---------------------------------------------------------------------------
// Spaces

inline json to_json(const FiniteMetricSpace& sp) {
  json j;
  if (sp.grid()) {
    j["grid"] = {{"dims", sp.grid()->dims}, {"metric", to_string(sp.grid()->metric)}};
  } else {
    j["points"] = sp.labels();
    json d = json::array();
    for (std::size_t x = 0; x < sp.n(); ++x) {
      json row = json::array();
      for (std::size_t y = 0; y < sp.n(); ++y) row.push_back(sp.distance(x, y));
      d.push_back(row);
    }
    j["dist"] = d;
  }
  if (!sp.counting_measure()) {
    json w = json::array();
    for (Eigen::Index i = 0; i < sp.weights().size(); ++i) w.push_back(sp.weights()(i));
    j["weights"] = w;
  }
  return j;
}

inline SpacePtr space_from_json(const json& j) {
  // Accept the report written by the space verb as well as a bare space.
  if (j.is_object() && j.contains("space") && !j.contains("grid") && !j.contains("points"))
    return space_from_json(j.at("space"));
  std::optional<Eigen::VectorXd> weights;
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (!w.is_array()) throw InvalidArgument("weights must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_double(w[i], "weights");
    weights = v;
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    std::vector<int> dims;
    for (const auto& d : field(g, "dims")) {
      if (!d.is_number_integer()) throw InvalidArgument("grid dims must be integers");
      dims.push_back(d.get<int>());
    }
    const GridMetric metric = grid_metric_from_string(g.value("metric", std::string("l1")));
    return weights ? build_grid_space(dims, metric, *weights) : build_grid_space(dims, metric);
  }
  const auto& pts = field(j, "points");
  const auto& dist = field(j, "dist");
  if (!pts.is_array() || !dist.is_array()) throw InvalidArgument("points and dist must be arrays");
  std::vector<std::string> labels;
  for (const auto& p : pts) labels.push_back(p.is_string() ? p.get<std::string>() : p.dump());
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (static_cast<Eigen::Index>(dist.size()) != n) throw InvalidArgument("dist must be a square matrix over the points");
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const auto& row = dist[static_cast<std::size_t>(x)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
      throw InvalidArgument("dist must be a square matrix over the points");
    for (Eigen::Index y = 0; y < n; ++y) d(x, y) = to_double(row[static_cast<std::size_t>(y)], "dist");
  }
  return make_space(std::move(labels), std::move(d), weights ? *weights : Eigen::VectorXd::Ones(n));
}

// ---------------------------------------------------------------------------
// Operators

inline json to_json(const LpOperator& a) {
  json j;
  j["space"] = to_json(*a.space());
  j["p"] = number(a.p());
  j["fiber_dim"] = a.fiber_dim();
  json entries = json::array();
  const int k = a.fiber_dim();
  for (std::size_t x = 0; x < a.points(); ++x)
    for (std::size_t y = 0; y < a.points(); ++y) {
      if (a.block_is_zero(x, y)) continue;
      json block = json::array();
      const Eigen::MatrixXcd b = a.block(x, y);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
          block.push_back(b(r, c).real());
          block.push_back(b(r, c).imag());
        }
      entries.push_back(json::array({x, y, block}));
    }
  j["entries"] = entries;
  return j;
}

inline LpOperator operator_from_json(const json& j, SpacePtr space = nullptr) {
  if (!space) space = space_from_json(field(j, "space"));
  const double p = to_double(field(j, "p"), "p");
  const int k = j.value("fiber_dim", 1);
  if (k < 1) throw InvalidArgument("fiber_dim must be positive");
  const auto dim = static_cast<Eigen::Index>(space->n()) * k;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& e : field(j, "entries")) {
    if (!e.is_array() || e.size() != 3) throw InvalidArgument("operator entries are [x, y, block]");
    const auto x = e[0].get<std::size_t>();
    const auto y = e[1].get<std::size_t>();
    if (x >= space->n() || y >= space->n()) throw InvalidArgument("operator entry index out of range");
    const auto& b = e[2];
    if (!b.is_array() || b.size() != static_cast<std::size_t>(2 * k * k))
      throw InvalidArgument("operator block must hold 2*k*k numbers");
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) {
        const std::size_t t = static_cast<std::size_t>(2 * (r * k + c));
        m(static_cast<Eigen::Index>(x) * k + r, static_cast<Eigen::Index>(y) * k + c) =
            std::complex<double>(to_double(b[t], "entry"), to_double(b[t + 1], "entry"));
      }
  }
  return {std::move(space), p, k, std::move(m)};
}

// ---------------------------------------------------------------------------
// Families and partitions

inline json to_json(const CutdownFamily& fam) {
  json sets = json::array(), values = json::array();
  for (std::size_t j = 0; j < fam.size(); ++j) {
    sets.push_back(to_json(fam.supports()[j]));
    json v = json::array();
    for (auto x : fam.supports()[j]) v.push_back(fam.members()[j](x).real());
    values.push_back(v);
  }
  return {{"sets", sets}, {"values", values}};
}

/// {"sets": [[ids]...], "values": [[v on set]...]}; values default to indicators.
inline CutdownFamily family_from_json(const json& j, const SpacePtr& space) {
  const auto& sets = field(j, "sets");
  const bool has_values = j.contains("values");
  if (has_values && j.at("values").size() != sets.size()) throw InvalidArgument("family values and sets differ in length");
  std::vector<ScalarFunction> members;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const Subset s = subset_from_json(sets[i], space->n());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space->n()));
    if (has_values) {
      const auto& vals = j.at("values")[i];
      if (vals.size() != s.size()) throw InvalidArgument("family member values must match its set");
      std::size_t t = 0;
      for (auto x : s) v(static_cast<Eigen::Index>(x)) = to_double(vals[t++], "values");
    } else {
      for (auto x : s) v(static_cast<Eigen::Index>(x)) = 1.0;
    }
    members.push_back(ScalarFunction::from_real(space, v));
  }
  return {space, std::move(members)};
}

inline json to_json(const SignPartition& part) {
  json blocks = json::array();
  for (const auto& b : part.blocks()) blocks.push_back(to_json(b));
  return {{"blocks", blocks}, {"complement", to_json(part.complement())}};
}

inline SignPartition partition_from_json(const json& j, const SpacePtr& space) {
  std::vector<Subset> blocks;
  for (const auto& b : field(j, j.contains("blocks") ? "blocks" : "sets")) blocks.push_back(subset_from_json(b, space->n()));
  return {space, std::move(blocks)};
}

// ---------------------------------------------------------------------------
// Chains

inline json to_json(const RDecomposition& d) {
  json colors = json::array();
  for (int c = 0; c < 2; ++c) {
    json pieces = json::array();
    for (const auto& p : d.colors[c]) pieces.push_back(to_json(p));
    colors.push_back(pieces);
  }
  return {{"target", to_json(d.target)}, {"colors", colors}, {"R", number(d.radius)}};
}

inline RDecomposition decomposition_from_json(const json& j, std::size_t n) {
  RDecomposition d;
  d.target = subset_from_json(field(j, "target"), n);
  const auto& colors = field(j, "colors");
  if (!colors.is_array() || colors.size() != 2) throw InvalidArgument("a decomposition has exactly two colors");
  for (int c = 0; c < 2; ++c)
    for (const auto& p : colors[static_cast<std::size_t>(c)]) d.colors[c].push_back(subset_from_json(p, n));
  d.radius = to_double(field(j, "R"), "R");
  return d;
}

inline json to_json(const DecompositionChain& c) {
  json fams = json::array(), steps = json::array();
  for (const auto& f : c.families) {
    json sets = json::array();
    for (const auto& s : f.sets) sets.push_back(to_json(s));
    fams.push_back(sets);
  }
  for (const auto& st : c.steps) {
    json decs = json::array();
    for (const auto& d : st) decs.push_back(to_json(d));
    steps.push_back(decs);
  }
  json radii = json::array();
  for (double r : c.radii) radii.push_back(number(r));
  return {{"families", fams}, {"steps", steps}, {"radii", radii}, {"final_diam", number(c.final_diam)}};
}

inline DecompositionChain chain_from_json(const json& j, const SpacePtr& space) {
  if (j.is_object() && j.contains("chain") && j.at("chain").is_object()) return chain_from_json(j.at("chain"), space);
  DecompositionChain c;
  for (const auto& f : field(j, "families")) {
    std::vector<Subset> sets;
    for (const auto& s : f) sets.push_back(subset_from_json(s, space->n()));
    c.families.emplace_back(space, std::move(sets));
  }
  for (const auto& st : field(j, "steps")) {
    std::vector<RDecomposition> decs;
    for (const auto& d : st) decs.push_back(decomposition_from_json(d, space->n()));
    c.steps.push_back(std::move(decs));
  }
  if (j.contains("radii"))
    for (const auto& r : j.at("radii")) c.radii.push_back(to_double(r, "radii"));
  if (c.families.empty()) throw InvalidArgument("a chain needs at least one family");
  c.final_diam = c.families.back().max_diameter();
  return c;
}

// ---------------------------------------------------------------------------
// Generator specs

inline json to_json(const GenSpec& g) {
  return {{"kind", to_string(g.kind)}, {"space", to_json(*g.space)}, {"p", number(g.p)},
          {"fiber_dim", g.fiber_dim},  {"R", number(g.radius)},       {"lambda", g.lambda},
          {"norm_target", g.norm_target}, {"seed", g.seed}};
}

inline GenSpec genspec_from_json(const json& j) {
  GenSpec g;
  g.kind = gen_kind_from_string(field(j, "kind").get<std::string>());
  g.space = space_from_json(field(j, "space"));
  if (j.contains("p")) g.p = to_double(j.at("p"), "p");
  g.fiber_dim = j.value("fiber_dim", 1);
  if (j.contains("R")) g.radius = to_double(j.at("R"), "R");
  g.lambda = j.value("lambda", 0.5);
  g.norm_target = j.value("norm_target", 1.0);
  g.seed = j.value("seed", std::uint64_t{0});
  return g;
}

// ---------------------------------------------------------------------------
// Analysis records

inline json to_json(const NormBracket& b) { return json::array({number(b.lo), number(b.hi)}); }

inline NormBracket bracket_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("a bracket is [lo, hi]");
  return {to_double(j[0], "lo"), to_double(j[1], "hi")};
}

inline json to_json(const EpsPropagation& e) {
  return {{"R", number(e.radius)},
          {"bracket", to_json(e.bracket)},
          {"witness", {{"U", to_json(e.witness_rows)}, {"V", to_json(e.witness_cols)}, {"lower_bound", number(e.bracket.lo)}}}};
}

inline json to_json(const QuasiLocalityProfile& p) {
  json radii = json::array(), lo = json::array(), hi = json::array(), raw = json::array();
  for (std::size_t i = 0; i < p.radii.size(); ++i) {
    radii.push_back(number(p.radii[i]));
    lo.push_back(number(p.eps_lo[i]));
    hi.push_back(number(p.eps_hi[i]));
    raw.push_back(to_json(p.raw[i]));
  }
  return {{"radii", radii}, {"eps_lo", lo}, {"eps_hi", hi}, {"raw", raw}};
}

inline json to_json(const CommutCertificate& c) {
  json j = {{"L", number(c.lipschitz)},
            {"bound", number(c.bound)},
            {"method", c.method},
            {"partition_N", c.partition_n},
            {"partition_bound", number(c.partition_bound)},
            {"schur_bound", number(c.schur_bound)},
            {"trivial_bound", number(c.trivial_bound)},
            {"norm_hi", number(c.norm_hi)},
            {"witness_lo", number(c.witness_lo)}};
  if (c.witness) j["witness_function"] = to_json(*c.witness);
  return j;
}

inline json to_json(const Classification& c) {
  json j = {{"class", to_string(c.kind)}, {"propagation", number(c.propagation)}, {"convention", c.convention}};
  if (c.kind != LocalityClass::finite_propagation) {
    j["radius"] = number(c.radius);
    j["threshold"] = number(c.threshold);
    j["at_radius"] = to_json(c.at_radius);
    if (c.profile) j["profile"] = to_json(*c.profile);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Approximation certificates

inline json to_json(const ApproximationCertificate& c) {
  json sched = json::array();
  for (const auto& e : c.schedule)
    sched.push_back({{"n", e.n},
                     {"eps_n", number(e.eps_n)},
                     {"L_n", number(e.lipschitz)},
                     {"R_n", number(e.radius)},
                     {"commut_bound", number(e.commut_bound)},
                     {"step_error", to_json(e.step_error)},
                     {"step_budget", number(e.step_budget)}});
  return {{"eps", number(c.eps)},
          {"schedule", sched},
          {"term_count", c.term_count},
          {"stored_terms", c.stored_terms},
          {"final_propagation", number(c.final_propagation)},
          {"final_diam", number(c.final_diam)},
          {"space_diam", number(c.space_diam)},
          {"margin", number(c.margin)},
          {"total_error", to_json(c.total_error)},
          {"degenerate", c.degenerate}};
}

inline ApproximationCertificate certificate_from_json(const json& j) {
  ApproximationCertificate c;
  c.eps = to_double(field(j, "eps"), "eps");
  for (const auto& e : field(j, "schedule")) {
    ScheduleEntry s;
    s.n = field(e, "n").get<int>();
    s.eps_n = to_double(field(e, "eps_n"), "eps_n");
    s.lipschitz = to_double(field(e, "L_n"), "L_n");
    s.radius = to_double(field(e, "R_n"), "R_n");
    s.commut_bound = to_double(field(e, "commut_bound"), "commut_bound");
    s.step_error = bracket_from_json(field(e, "step_error"));
    s.step_budget = to_double(field(e, "step_budget"), "step_budget");
    c.schedule.push_back(s);
  }
  c.term_count = field(j, "term_count").get<std::uint64_t>();
  c.stored_terms = j.value("stored_terms", std::size_t{1});
  c.final_propagation = to_double(field(j, "final_propagation"), "final_propagation");
  c.final_diam = to_double(field(j, "final_diam"), "final_diam");
  c.space_diam = to_double(field(j, "space_diam"), "space_diam");
  c.margin = to_double(field(j, "margin"), "margin");
  c.total_error = bracket_from_json(field(j, "total_error"));
  c.degenerate = field(j, "degenerate").get<bool>();
  return c;
}

}  // namespace qlroe::io

#endif  // QLROE_IO_HPP
