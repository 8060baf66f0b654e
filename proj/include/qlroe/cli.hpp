#ifndef QLROE_CLI_HPP
#define QLROE_CLI_HPP

// Batch front end. Exit codes: 0 all assertions hold, 1 an assertion failed
// (the report names it), 2 usage or IO error.

#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlroe/io.hpp"

namespace qlroe::cli {

using io::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitUsage = 2;
inline constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string space, op, family, left, partition, chain = "grid", spec, cert, out, format = "json", kind, metric = "l1";
  std::string grid, radii, p;
  double eps = 0.0, lipschitz = 0.0, lambda = 0.5, radius = 1.0, norm_target = 1.0;
  int fiber_dim = 1, witness_budget = 8;
  std::uint64_t seed = 0;
  bool check_average = false;
};

/// Raised inside a verb when a checked inequality fails; carries the report.
struct AssertionFailed {
  std::string inequality;
  json report;
};

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("cannot parse number '" + item + "'");
    }
  }
  return out;
}

inline double parse_exponent(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInfinity;
  const auto v = parse_list(s);
  if (v.size() != 1) throw InvalidArgument("--p takes one exponent");
  return v[0];
}

class Runner {
 public:
  Runner(const Options& o, std::ostream& out) : o_(o), out_(out) {}

  void emit(const json& report) {
    if (!o_.out.empty()) io::write_json(o_.out, report);
    out_ << report.dump(2) << "\n";
  }

  SpacePtr load_space() {
    if (!o_.space.empty()) return io::space_from_json(io::read_json(o_.space));
    if (!o_.grid.empty()) {
      std::vector<int> dims;
      for (double d : parse_list(o_.grid)) {
        if (d != std::floor(d)) throw InvalidArgument("--grid takes integer dimensions");
        dims.push_back(static_cast<int>(d));
      }
      return build_grid_space(dims, grid_metric_from_string(o_.metric));
    }
    throw InvalidArgument("a space is required (--space file or --grid dims)");
  }

  LpOperator load_op() {
    if (o_.op.empty()) throw InvalidArgument("--op is required");
    LpOperator a = io::operator_from_json(io::read_json(o_.op));
    if (!o_.p.empty()) a = a.with_p(parse_exponent(o_.p));
    return a;
  }

  NormOptions norm_options() const {
    NormOptions n;
    n.seed = o_.seed;
    return n;
  }

  int space() {
    const SpacePtr sp = load_space();
    json r = {{"space", io::to_json(*sp)}, {"n", sp->n()}, {"diameter", sp->diameter()},
              {"min_gap", io::number(sp->min_gap())}, {"valid", true}};
    emit(r);
    return kExitOk;
  }

  GenSpec gen_spec() {
    if (!o_.spec.empty()) return io::genspec_from_json(io::read_json(o_.spec));
    if (o_.kind.empty()) throw InvalidArgument("gen needs --spec or --kind");
    GenSpec g;
    g.kind = gen_kind_from_string(o_.kind);
    g.space = load_space();
    g.p = o_.p.empty() ? 2.0 : parse_exponent(o_.p);
    g.fiber_dim = o_.fiber_dim;
    g.radius = o_.radius;
    g.lambda = o_.lambda;
    g.norm_target = o_.norm_target;
    g.seed = o_.seed;
    return g;
  }

  int gen() {
    const GenSpec g = gen_spec();
    json r = io::to_json(qlroe::gen(g));
    r["generator"] = io::to_json(g);
    emit(r);
    return kExitOk;
  }

  int norm() {
    const LpOperator a = load_op();
    const NormBracket b = op_norm(a, norm_options());
    emit({{"p", io::number(a.p())}, {"bracket", io::to_json(b)}, {"seed", o_.seed}});
    return kExitOk;
  }

  int profile() {
    const LpOperator a = load_op();
    json r;
    if (!o_.radii.empty()) r["profile"] = io::to_json(quasi_locality_profile(a, parse_list(o_.radii)));
    r["classification"] = io::to_json(classify(a));
    r["propagation"] = io::number(propagation(a));
    emit(r);
    return kExitOk;
  }

  int commut() {
    const LpOperator a = load_op();
    if (o_.lipschitz > 0.0) {
      emit({{"certificate", io::to_json(commut_upper_bound(a, o_.lipschitz, o_.witness_budget))}});
      return kExitOk;
    }
    if (!(o_.eps > 0.0)) throw InvalidArgument("commut needs --L or --eps");
    const LipschitzScale s = find_lipschitz_scale(a, o_.eps, o_.witness_budget);
    emit({{"eps", o_.eps},
          {"L", io::number(s.lipschitz)},
          {"certificate", io::to_json(s.certificate)},
          {"gate", {{"N", s.gate_n}, {"threshold", io::number(s.gate_threshold)}, {"radius", io::number(s.gate_radius)}}}});
    return kExitOk;
  }

  int cutdown() {
    const LpOperator a = load_op();
    if (o_.family.empty()) throw InvalidArgument("cutdown needs --family");
    const CutdownFamily fam = io::family_from_json(io::read_json(o_.family), a.space());
    std::optional<CutdownFamily> left;
    if (!o_.left.empty()) left = io::family_from_json(io::read_json(o_.left), a.space());
    const LpOperator cut = block_cutdown(a, fam, left);
    const BlockNormReport bn = verify_block_norm_formula(a, fam, left, norm_options());
    json terms = json::array();
    for (const auto& t : bn.terms) terms.push_back(io::to_json(t));
    json r = {{"cutdown", io::to_json(cut)},
              {"block_norm_identity",
               {{"lhs", io::to_json(bn.lhs)}, {"rhs", io::to_json(bn.rhs)}, {"terms", terms}, {"pass", bn.pass}}}};
    bool ok = bn.pass;
    std::string failed = ok ? "" : "block norm identity";
    if (o_.lipschitz > 0.0) {
      const CutdownEstimateReport ce = verify_cutdown_estimate(a, fam, o_.lipschitz, 8, norm_options());
      json c = {{"L", o_.lipschitz},
                {"defect", io::to_json(ce.defect)},
                {"commut_bound", io::number(ce.certificate.bound)},
                {"ratio", io::number(ce.ratio)},
                {"pass", ce.pass}};
      if (ce.sign_defect_bound) c["sign_defect"] = io::to_json(*ce.sign_defect_bound);
      r["cutdown_defect_bound"] = c;
      if (!ce.pass && ok) failed = "cutdown defect bound";
      ok = ok && ce.pass;
    }
    if (!ok) throw AssertionFailed{failed, r};
    emit(r);
    return kExitOk;
  }

  int expect() {
    const LpOperator a = load_op();
    if (o_.partition.empty()) throw InvalidArgument("expect needs --partition");
    const SignPartition part = io::partition_from_json(io::read_json(o_.partition), a.space());
    const LpOperator e = block_expectation(a, part);
    const NormBracket na = op_norm(a, norm_options()), ne = op_norm(e, norm_options());
    const double idem = max_abs_diff(block_expectation(e, part), e);
    json r = {{"expectation", io::to_json(e)},
              {"partition", io::to_json(part)},
              {"norm_input", io::to_json(na)},
              {"norm_output", io::to_json(ne)},
              {"idempotence_defect", idem}};
    std::string failed;
    if (idem != 0.0) failed = "expectation idempotence";
    if (ne.lo > na.hi * (1.0 + 1e-12) + 1e-12 && failed.empty()) failed = "expectation contraction";
    if (o_.check_average || part.generators() <= 9) {
      const double diff = max_abs_diff(sign_group_average(a, part), e);
      r["average_difference"] = diff;
      if (diff > 1e-12 && failed.empty()) failed = "expectation average identity";
    }
    if (!failed.empty()) throw AssertionFailed{failed, r};
    emit(r);
    return kExitOk;
  }

  int chain() {
    const SpacePtr sp = load_space();
    const std::vector<double> radii = parse_list(o_.radii);
    DecompositionChain c;
    if (o_.chain == "grid") c = grid_chain(sp, radii);
    else c = io::chain_from_json(io::read_json(o_.chain), sp);
    const ChainReport rep = validate_chain(c, radii.empty() ? c.radii : radii);
    json r = {{"chain", io::to_json(c)},
              {"valid", rep.valid},
              {"final_diam", io::number(rep.final_diam)},
              {"message", rep.message}};
    if (rep.failing_step) r["failing_step"] = *rep.failing_step;
    if (!rep.valid) throw AssertionFailed{"chain validity", r};
    emit(r);
    return kExitOk;
  }

  static ApproximationResult run_approx(const LpOperator& b, double eps, const json& chain_input) {
    if (chain_input.is_string() && chain_input.get<std::string>() == "grid")
      return approximate_finite_propagation(b, eps, GridChainStrategy{});
    return approximate_finite_propagation(b, eps, io::chain_from_json(chain_input, b.space()));
  }

  int approx() {
    const LpOperator b = load_op();
    if (!(o_.eps > 0.0)) throw InvalidArgument("approx needs --eps > 0");
    json chain_input = o_.chain == "grid" ? json("grid") : io::read_json(o_.chain);
    const ApproximationResult res = run_approx(b, o_.eps, chain_input);
    json checks = json::array();
    bool ok = true;
    std::string failed;
    for (const auto& c : audit_certificate(res.certificate)) {
      checks.push_back({{"name", c.name}, {"ok", c.ok}});
      if (!c.ok && ok) failed = c.name;
      ok = ok && c.ok;
    }
    json r = {{"certificate", io::to_json(res.certificate)},
              {"checks", checks},
              {"chain", io::to_json(res.chain)},
              {"approximant", io::to_json(res.approximant)},
              {"inputs", {{"operator", io::to_json(b)}, {"eps", o_.eps}, {"chain", chain_input}, {"seed", o_.seed}}},
              {"version", kVersion}};
    if (!ok) throw AssertionFailed{failed, r};
    emit(r);
    return kExitOk;
  }

  int verify() {
    if (o_.cert.empty()) throw InvalidArgument("verify needs --cert");
    const json bundle = io::read_json(o_.cert);
    const ApproximationCertificate recorded = io::certificate_from_json(io::field(bundle, "certificate"));
    const json& inputs = io::field(bundle, "inputs");
    const LpOperator b = io::operator_from_json(io::field(inputs, "operator"));
    const double eps = io::to_double(io::field(inputs, "eps"), "eps");
    json checks = json::array();
    std::string failed;
    auto record = [&](const std::string& name, bool ok) {
      checks.push_back({{"name", name}, {"ok", ok}});
      if (!ok && failed.empty()) failed = name;
    };
    for (const auto& c : audit_certificate(recorded)) record(c.name, c.ok);
    record("recorded eps matches input", recorded.eps == eps);
    const ApproximationResult replay = run_approx(b, eps, io::field(inputs, "chain"));
    const json fresh = io::to_json(replay.certificate);
    const json& old = io::field(bundle, "certificate");
    for (auto it = fresh.begin(); it != fresh.end(); ++it)
      record("replay " + it.key(), old.contains(it.key()) && old.at(it.key()) == it.value());
    if (bundle.contains("approximant"))
      record("replay approximant", io::to_json(replay.approximant) == bundle.at("approximant"));
    json r = {{"checks", checks}, {"ok", failed.empty()}};
    if (!failed.empty()) throw AssertionFailed{failed, r};
    out_ << r.dump(2) << "\n";
    return kExitOk;
  }

 private:
  const Options& o_;
  std::ostream& out_;
};

/// Parses `args` (without the program name) and runs one verb.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Certified quasi-locality and finite-propagation approximation on finite metric spaces", "qlroe"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--out", o.out, "write the report atomically to this path");
    s->add_option("--seed", o.seed, "seed for every randomised step (default 0)");
    s->add_option("--format", o.format, "output format")->check(CLI::IsMember({"json"}));
  };
  auto space_opts = [&](CLI::App* s) {
    s->add_option("--space", o.space, "space JSON file");
    s->add_option("--grid", o.grid, "grid dimensions, e.g. 32 or 8,8");
    s->add_option("--metric", o.metric, "grid metric: l1, linf or euclidean");
  };

  auto* sp = app.add_subcommand("space", "build or validate a finite metric space");
  space_opts(sp);
  common(sp);
  auto* gn = app.add_subcommand("gen", "generate a corpus operator");
  space_opts(gn);
  common(gn);
  gn->add_option("--spec", o.spec, "generator spec JSON");
  gn->add_option("--kind", o.kind, "finite_prop, exp_decay, averaging or random_dense");
  gn->add_option("--p", o.p, "exponent (number or inf)");
  gn->add_option("--fiber-dim", o.fiber_dim, "fiber dimension");
  gn->add_option("--R", o.radius, "propagation for finite_prop");
  gn->add_option("--lambda", o.lambda, "decay rate for exp_decay");
  gn->add_option("--norm-target", o.norm_target, "norm bound for finite_prop");
  auto* nm = app.add_subcommand("norm", "certified operator norm bracket");
  auto* pf = app.add_subcommand("profile", "eps-propagation profile and classification");
  auto* cm = app.add_subcommand("commut", "commutator certificate at --L, or Lipschitz scale for --eps");
  auto* cd = app.add_subcommand("cutdown", "block cutdown with norm identity and defect checks");
  auto* ex = app.add_subcommand("expect", "block conditional expectation and sign-group average");
  auto* ap = app.add_subcommand("approx", "finite-propagation approximation with certificate");
  for (auto* s : {nm, pf, cm, cd, ex, ap}) {
    s->add_option("--op", o.op, "operator JSON file")->required();
    s->add_option("--p", o.p, "override the operator exponent (number or inf)");
    common(s);
  }
  pf->add_option("--radii", o.radii, "comma-separated radii");
  cm->add_option("--L", o.lipschitz, "Lipschitz constant");
  cm->add_option("--eps", o.eps, "target commutator bound");
  cm->add_option("--witness-budget", o.witness_budget, "candidate functions for the lower bound");
  cd->add_option("--family", o.family, "cutdown family JSON")->required();
  cd->add_option("--left", o.left, "left family JSON");
  cd->add_option("--L", o.lipschitz, "check the cutdown defect against the commutator certificate at L");
  ex->add_option("--partition", o.partition, "partition JSON")->required();
  ex->add_flag("--check-average", o.check_average, "always compare with the sign-group average");
  ap->add_option("--eps", o.eps, "target error")->required();
  ap->add_option("--chain", o.chain, "grid or a chain JSON file");
  auto* ch = app.add_subcommand("chain", "generate or validate a decomposition chain");
  space_opts(ch);
  common(ch);
  ch->add_option("--radii", o.radii, "comma-separated radii R_1..R_m");
  ch->add_option("--chain", o.chain, "grid or a chain JSON file to validate");
  auto* vf = app.add_subcommand("verify", "replay a certificate and re-check every inequality");
  vf->add_option("--cert", o.cert, "certificate bundle written by approx")->required();
  common(vf);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  Runner r(o, out);
  try {
    if (*sp) return r.space();
    if (*gn) return r.gen();
    if (*nm) return r.norm();
    if (*pf) return r.profile();
    if (*cm) return r.commut();
    if (*cd) return r.cutdown();
    if (*ex) return r.expect();
    if (*ch) return r.chain();
    if (*ap) return r.approx();
    if (*vf) return r.verify();
  } catch (const AssertionFailed& a) {
    json rep = {{"ok", false}, {"failed", a.inequality}, {"report", a.report}};
    out << rep.dump(2) << "\n";
    err << "assertion failed: " << a.inequality << "\n";
    return kExitAssertion;
  } catch (const NotQuasiLocal& e) {
    const Classification c = classify(r.load_op());
    json rep = {{"ok", false},
                {"failed", "not quasi-local"},
                {"message", e.what()},
                {"profile", io::to_json(e.profile())},
                {"witness", io::to_json(c.at_radius)["witness"]}};
    out << rep.dump(2) << "\n";
    err << "assertion failed: not quasi-local: " << e.what() << "\n";
    return kExitAssertion;
  } catch (const BoundViolation& e) {
    out << json{{"ok", false}, {"failed", e.inequality()}, {"message", e.what()}}.dump(2) << "\n";
    err << "assertion failed: " << e.inequality() << ": " << e.what() << "\n";
    return kExitAssertion;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace qlroe::cli

#endif  // QLROE_CLI_HPP
