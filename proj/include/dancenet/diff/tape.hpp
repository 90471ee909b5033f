#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dancenet/diff/param_store.hpp"
#include "dancenet/diff/tensor.hpp"

namespace dancenet::diff {

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

enum class TapeMode {
  kRecord,     // gradients available after backward()
  kInference,  // values only, no backward closures kept
};

// Append-only record of a forward computation. Nodes are stored in creation
// order, which is a topological order by construction.
class Tape {
 public:
  // Receives the tape and the id of the node whose output gradient is ready.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(TapeMode mode = TapeMode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  TapeMode mode() const { return mode_; }
  bool recording() const { return mode_ == TapeMode::kRecord; }

  Var constant(Tensor value);

  // Leaf bound to a store entry; repeated requests return the same leaf.
  // Reads the store's current value.
  Var parameter(ParamStore& store, std::string_view name);

  // Records an operation. needs_grad is true when any input needs it;
  // backward is dropped otherwise and in inference mode.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  // Gradient buffer of a node, allocated as zeros on first access.
  Tensor& grad(std::size_t id);
  Tensor& grad(Var v) { return grad(v.id); }
  bool has_grad(Var v) const { return !nodes_[v.id].grad.values().empty(); }

  // Reverse sweep from a scalar loss; accumulates into every bound store
  // entry (zeros for parameters the loss does not reach). May run once.
  void backward(Var loss);
  bool consumed() const { return consumed_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  struct Binding {
    ParamStore* store;
    std::size_t entry;
    std::size_t node;
  };

  TapeMode mode_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::vector<Binding> bindings_;
  std::unordered_map<const ParamStore*, std::unordered_map<std::size_t, std::size_t>> bound_;
};

}  // namespace dancenet::diff
