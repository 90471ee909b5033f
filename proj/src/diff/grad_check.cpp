#include "dancenet/diff/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "dancenet/error.hpp"

namespace dancenet::diff {

namespace {

double evaluate(const LossFn& loss, ParamStore& store) {
  Tape tape(TapeMode::kInference);
  return tape.value(loss(tape, store)).item();
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const LossFn& loss, ParamStore& store, double eps) {
  store.clear_grads();
  {
    Tape tape;
    Var l = loss(tape, store);
    tape.backward(l);
  }
  const double f0 = evaluate(loss, store);
  const double f1 = evaluate(loss, store);
  if (std::bit_cast<std::uint64_t>(f0) != std::bit_cast<std::uint64_t>(f1)) {
    fail(ErrorCode::kDeterminism, "grad_check: loss differs between two evaluations at the same point");
  }

  GradCheckReport report;
  for (std::size_t i = 0; i < store.size(); ++i) {
    ParamCheck pc;
    pc.name = store.name(i);
    pc.entries = store.value(i).size();
    const Tensor analytic = store.grad(i);
    for (std::size_t k = 0; k < pc.entries; ++k) {
      double& theta = store.value(i)[k];
      const double saved = theta;
      theta = saved + eps;
      const double fp = evaluate(loss, store);
      theta = saved - eps;
      const double fm = evaluate(loss, store);
      theta = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = relative_error(analytic[k], numeric);
      if (err > pc.max_rel_error) {
        pc.max_rel_error = err;
        pc.worst_entry = k;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.params.push_back(std::move(pc));
  }
  store.clear_grads();
  return report;
}

std::vector<DirectionalCheck> directional_check(const LossFn& loss, ParamStore& store,
                                                const std::vector<std::vector<double>>& directions,
                                                double eps) {
  const std::size_t total = store.parameter_count();
  for (const auto& v : directions) {
    if (v.size() != total) fail(ErrorCode::kShape, "directional_check: direction length differs from parameter count");
  }
  store.clear_grads();
  {
    Tape tape;
    Var l = loss(tape, store);
    tape.backward(l);
  }
  std::vector<double> grad, saved;
  grad.reserve(total);
  saved.reserve(total);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& g = store.grad(i).values();
    const auto& x = store.value(i).values();
    grad.insert(grad.end(), g.begin(), g.end());
    saved.insert(saved.end(), x.begin(), x.end());
  }
  store.clear_grads();

  auto place = [&](const std::vector<double>* v, double s) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < store.size(); ++i) {
      for (double& x : store.value(i).values()) {
        x = v ? saved[k] + s * (*v)[k] : saved[k];
        ++k;
      }
    }
  };

  std::vector<DirectionalCheck> out;
  for (const auto& v : directions) {
    DirectionalCheck d;
    for (std::size_t k = 0; k < total; ++k) d.analytic += grad[k] * v[k];
    place(&v, eps);
    const double fp = evaluate(loss, store);
    place(&v, -eps);
    const double fm = evaluate(loss, store);
    place(nullptr, 0.0);
    d.numeric = (fp - fm) / (2.0 * eps);
    d.rel_error = relative_error(d.analytic, d.numeric);
    out.push_back(d);
  }
  return out;
}

}  // namespace dancenet::diff
