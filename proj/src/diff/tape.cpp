#include "dancenet/diff/tape.hpp"

#include "dancenet/error.hpp"

namespace dancenet::diff {

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(ParamStore& store, std::string_view name) {
  const std::size_t entry = store.index(name);
  auto& per_store = bound_[&store];
  if (auto it = per_store.find(entry); it != per_store.end()) return Var{it->second};
  Node n;
  n.value = store.value(entry);
  n.needs_grad = recording();
  nodes_.push_back(std::move(n));
  const std::size_t id = nodes_.size() - 1;
  per_store.emplace(entry, id);
  bindings_.push_back({&store, entry, id});
  return Var{id};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  if (consumed_) fail(ErrorCode::kState, "tape already consumed by backward()");
  Node n;
  n.value = std::move(value);
  if (recording()) {
    for (Var in : inputs) {
      if (nodes_[in.id].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.values().empty() && n.value.size() != 0) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!recording()) fail(ErrorCode::kState, "backward() on an inference tape");
  if (consumed_) fail(ErrorCode::kState, "backward() called twice on the same tape");
  if (nodes_[loss.id].value.size() != 1) {
    fail(ErrorCode::kShape, "backward() requires a scalar loss");
  }
  consumed_ = true;
  grad(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.values().empty()) continue;
    n.backward(*this, id);
  }
  for (const Binding& b : bindings_) {
    Tensor& g = grad(b.node);
    b.store->accumulate_grad(b.entry, g);
  }
}

}  // namespace dancenet::diff
