// Approximates an exponentially decaying operator on a path by a finite-propagation one,
// then shows the pipeline refusing the averaging operator.

#include <cstdio>

#include "qlroe/qlroe.hpp"

using namespace qlroe;

int main() {
  GenSpec g;
  g.kind = GenKind::exp_decay;
  g.space = build_path_space(32);
  g.lambda = 0.5;
  const LpOperator b = gen(g);
  const NormBracket nb = op_norm(b);
  std::printf("exp_decay on P32: ||b|| in [%.6f, %.6f], propagation %g\n", nb.lo, nb.hi, propagation(b));

  const auto res = approximate_finite_propagation(b, 16.0);
  const auto& c = res.certificate;
  for (const auto& e : c.schedule)
    std::printf("  step %d: eps_n=%g L_n=%g R_n=%g commutator<=%.4f step error %.4f (budget %g)\n", e.n, e.eps_n,
                e.lipschitz, e.radius, e.commut_bound, e.step_error.lo, e.step_budget);
  std::printf("  approximant: propagation %g, ||b - b'|| in [%.4f, %.4f], %zu terms\n", c.final_propagation,
              c.total_error.lo, c.total_error.hi, c.term_count);
  for (const auto& chk : audit_certificate(c))
    if (!chk.ok) std::printf("  audit failed: %s (%s)\n", chk.name.c_str(), chk.detail.c_str());

  g.kind = GenKind::averaging;
  g.p = 1.0;
  try {
    approximate_finite_propagation(gen(g), 0.1);
    std::printf("averaging operator: unexpectedly approximated\n");
    return 1;
  } catch (const NotQuasiLocal& e) {
    std::printf("averaging operator refused: %s\n", e.what());
  }
  return 0;
}
