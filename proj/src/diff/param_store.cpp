#include "dancenet/diff/param_store.hpp"

#include <cmath>

#include "dancenet/error.hpp"

namespace dancenet::diff {

std::size_t ParamStore::add(std::string name, Tensor init) {
  if (by_name_.contains(name)) fail(ErrorCode::kConfig, "duplicate parameter name '" + name + "'");
  const std::size_t i = entries_.size();
  Entry e;
  e.grad = Tensor(init.shape(), 0.0);
  e.adam.first_moment = Tensor(init.shape(), 0.0);
  e.adam.second_moment = Tensor(init.shape(), 0.0);
  e.value = std::move(init);
  e.name = name;
  entries_.push_back(std::move(e));
  by_name_.emplace(std::move(name), i);
  return i;
}

bool ParamStore::contains(std::string_view name) const { return by_name_.find(name) != by_name_.end(); }

std::size_t ParamStore::index(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) fail(ErrorCode::kConfig, "unknown parameter '" + std::string(name) + "'");
  return it->second;
}

void ParamStore::accumulate_grad(std::size_t i, const Tensor& g) {
  Entry& e = entries_[i];
  if (g.size() != e.value.size()) {
    fail(ErrorCode::kShape, "gradient shape mismatch for parameter '" + e.name + "'");
  }
  for (std::size_t k = 0; k < g.size(); ++k) e.grad[k] += g[k];
  e.has_grad = true;
}

void ParamStore::clear_grads() {
  for (Entry& e : entries_) {
    e.grad.fill(0.0);
    e.has_grad = false;
  }
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.value.size();
  return n;
}

void adam_step(ParamStore& store, double learning_rate, const AdamOptions& options) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!store.has_grad(i)) {
      fail(ErrorCode::kState, "adam_step: parameter '" + store.name(i) + "' has no gradient");
    }
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor& theta = store.value(i);
    const Tensor& g = store.grad(i);
    AdamState& st = store.adam(i);
    st.steps += 1;
    const double t = static_cast<double>(st.steps);
    const double c1 = 1.0 - std::pow(options.beta1, t);
    const double c2 = 1.0 - std::pow(options.beta2, t);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      st.first_moment[k] = options.beta1 * st.first_moment[k] + (1.0 - options.beta1) * g[k];
      st.second_moment[k] =
          options.beta2 * st.second_moment[k] + (1.0 - options.beta2) * g[k] * g[k];
      const double m_hat = st.first_moment[k] / c1;
      const double v_hat = st.second_moment[k] / c2;
      theta[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
  store.clear_grads();
}

}  // namespace dancenet::diff
