#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dancenet/diff/tape.hpp"

namespace dancenet {
class Rng;
}

namespace dancenet::diff {

// Primitive differentiable operations over rank-2 values. Bias-like
// operands may be rank 1 (viewed as 1 x n).

Var matmul(Tape& t, Var a, Var b);                 // (r x k)(k x c)
Var add(Tape& t, Var a, Var b);                    // same shape
Var sub(Tape& t, Var a, Var b);                    // same shape
Var mul(Tape& t, Var a, Var b);                    // elementwise, same shape
Var add_row(Tape& t, Var a, Var row);              // a[r x c] + row[1 x c]
Var mul_col(Tape& t, Var a, Var col);              // a[r x c] * col[r x 1]
Var scale(Tape& t, Var a, double s);
Var add_scalar(Tape& t, Var a, double s);

Var relu(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var softplus(Tape& t, Var a);
Var log(Tape& t, Var a);
Var reciprocal(Tape& t, Var a);
// Values clamped into [lo, hi]; gradient passes only where lo < x < hi.
Var clamp(Tape& t, Var a, double lo, double hi);

Var concat_cols(Tape& t, Var a, Var b);
Var gather_rows(Tape& t, Var a, std::span<const std::size_t> rows);
// Per-segment row sums; segment s spans rows [row_begin[s], row_begin[s+1]).
Var segment_sum(Tape& t, Var a, std::span<const std::size_t> row_begin);
// Column-wise maximum over all rows (1 x c). Gradient goes to the first
// row attaining the maximum.
Var max_rows(Tape& t, Var a);

Var sum(Tape& t, Var a);
Var mean(Tape& t, Var a);

enum class Activation { kNone, kRelu, kSigmoid, kSoftplus };

Var activate(Tape& t, Var a, Activation act);

// Glorot-uniform weights "<prefix>.w<i>" (in x out) and zero biases
// "<prefix>.b<i>" for consecutive pairs of widths.
void mlp_init(ParamStore& store, const std::string& prefix, std::span<const std::size_t> widths,
              Rng& rng);

// Affine layers with ReLU between them and `last` after the final one.
// Every row of `input` goes through the same weights.
Var mlp_forward(Tape& t, ParamStore& store, const std::string& prefix, Var input,
                std::span<const std::size_t> widths, Activation last = Activation::kNone);

namespace testing {
// Scales the weight gradient of matmul by (1 + 1e-2) while enabled, to give
// gradient checks a negative control. Process-wide.
void set_corrupt_matmul_backward(bool enabled);
bool corrupt_matmul_backward();
}  // namespace testing

}  // namespace dancenet::diff
