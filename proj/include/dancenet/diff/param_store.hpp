#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dancenet/diff/tensor.hpp"

namespace dancenet::diff {

struct AdamState {
  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t steps = 0;
};

// Named trainable tensors in insertion order, each with a gradient slot and
// Adam moments of the same shape.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const { return entries_.size(); }
  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;
  const std::string& name(std::size_t i) const { return entries_[i].name; }

  Tensor& value(std::size_t i) { return entries_[i].value; }
  const Tensor& value(std::size_t i) const { return entries_[i].value; }
  Tensor& value(std::string_view name) { return entries_[index(name)].value; }
  const Tensor& value(std::string_view name) const { return entries_[index(name)].value; }

  const Tensor& grad(std::size_t i) const { return entries_[i].grad; }
  bool has_grad(std::size_t i) const { return entries_[i].has_grad; }
  // Adds into the gradient slot and marks it populated.
  void accumulate_grad(std::size_t i, const Tensor& g);
  void clear_grads();

  AdamState& adam(std::size_t i) { return entries_[i].adam; }
  const AdamState& adam(std::size_t i) const { return entries_[i].adam; }

  std::size_t parameter_count() const;

 private:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    AdamState adam;
  };

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over every parameter, then clears gradients.
// Throws a state error if any parameter has no populated gradient.
void adam_step(ParamStore& store, double learning_rate, const AdamOptions& options = {});

}  // namespace dancenet::diff
