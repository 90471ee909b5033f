#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dancenet/diff/param_store.hpp"
#include "dancenet/diff/tape.hpp"

namespace dancenet::diff {

// Builds the scalar loss on the given tape from the store's current values.
using LossFn = std::function<Var(Tape&, ParamStore&)>;

struct ParamCheck {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  std::size_t worst_entry = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
};

// |a - n| / max(|a|, |n|, 1e-8) with n = (f(x + eps) - f(x - eps)) / 2eps.
double relative_error(double analytic, double numeric);

// Central differences over every entry of every parameter in the store,
// against the analytic gradient of one recorded backward pass. Throws a
// determinism error if two evaluations at the same point disagree. Leaves
// the store's values unchanged and its gradients cleared.
GradCheckReport grad_check(const LossFn& loss, ParamStore& store, double eps = 1e-5);

struct DirectionalCheck {
  double analytic = 0.0;  // g . v
  double numeric = 0.0;   // (f(x + eps v) - f(x - eps v)) / 2eps
  double rel_error = 0.0;
};

// Directional derivative along each given direction (one value per
// parameter entry, store order). Values are restored bit for bit.
std::vector<DirectionalCheck> directional_check(const LossFn& loss, ParamStore& store,
                                                const std::vector<std::vector<double>>& directions,
                                                double eps = 1e-5);

}  // namespace dancenet::diff
