#include "uvqa/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "uvqa/errors.hpp"

namespace uvqa {

namespace {

double evaluate(const LossBuilder& loss, Graph::Mode mode) {
  Graph g(mode);
  const double v = g.value(loss(g))[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check_report(const LossBuilder& loss, std::span<Parameter* const> params, double step) {
  for (Parameter* p : params) p->zero_grad();
  Graph g;
  const Var out = loss(g);
  if (g.value(out).size() != 1) throw DimensionError("grad_check: loss must be a scalar");
  if (!std::isfinite(g.value(out)[0])) throw NumericError("grad_check: loss is not finite");
  g.backward(out);

  GradCheckResult result;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double up = evaluate(loss, Graph::Mode::inference);
      p->value[i] = saved - step;
      const double down = evaluate(loss, Graph::Mode::inference);
      p->value[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad[i];
      const double err = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ++result.coordinates;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace uvqa
