#pragma once

#include <functional>
#include <span>
#include <string>

#include "uvqa/autograd.hpp"

namespace uvqa {

/// Builds a scalar loss in the given graph from the parameters it closes over.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients with central differences at every
/// coordinate of every parameter. The relative error of a coordinate is
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
/// Parameter gradients are overwritten. Throws NumericError on a non-finite loss.
GradCheckResult grad_check_report(const LossBuilder& loss, std::span<Parameter* const> params, double step = 1e-6);

inline double grad_check(const LossBuilder& loss, std::span<Parameter* const> params, double step = 1e-6) {
  return grad_check_report(loss, params, step).max_rel_error;
}

}  // namespace uvqa
