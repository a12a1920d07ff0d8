// Copyright 2026 The groc-lm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GROC_OPS_HPP
#define GROC_OPS_HPP

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groc/tensor.hpp"

// Differentiable primitives. Every op checks operand shapes and throws
// DimensionError naming the primitive and the offending shapes. 2-D tensors
// are [rows, cols] row-major.
namespace groc::ops {

enum class Activation { identity, tanh, sigmoid, relu, selu };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation act);

/// Ragged row groups: group i owns rows [offsets[i], offsets[i+1]).
struct Segments {
  std::vector<std::size_t> offsets{0};

  std::size_t count() const { return offsets.size() - 1; }
  std::size_t length(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  std::size_t total() const { return offsets.back(); }
  void push(std::size_t len) { offsets.push_back(offsets.back() + len); }
};

/// a[m,k] x b[k,n], or a[m,k] x b[n,k]^T when `transpose_b`.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// x[m,n] + row[n] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& row);

/// Concatenates 2-D tensors along axis 0 (rows) or 1 (columns).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

/// Half-open range [begin, end) along axis 0 or 1 of a 2-D tensor.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

/// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

/// Rows of a 2-D table picked by index; repeated indices accumulate grads.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

/// Mean of each row segment of x[rows, n]. Empty segments yield zero rows.
Tensor segment_mean(const Tensor& x, const Segments& segments);

/// Mean over axis 0 or 1 of a 2-D tensor: [m,n] -> [n] or [m].
Tensor mean(const Tensor& x, std::size_t axis);

/// Sum of all entries as a [1] tensor.
Tensor sum(const Tensor& x);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor selu(const Tensor& x);
Tensor activate(const Tensor& x, Activation act);

/// 1-D convolution along the character axis of a ragged batch.
///
/// x is [total_chars, channels] with one segment per word; weight is
/// [filters, width, channels], bias [filters]. The output is
/// [sum(len_i - width + 1), filters], segmented by conv_segments().
/// Every segment must be at least `width` rows long.
Tensor conv1d(const Tensor& x, const Segments& segments, const Tensor& weight, const Tensor& bias);
Segments conv_segments(const Segments& segments, std::size_t width);

/// max_pool_time(conv1d(...)) in one pass, without materializing the
/// per-position outputs as a graph node. Same values, sparse backward.
Tensor conv1d_max_pool(const Tensor& x, const Segments& segments, const Tensor& weight,
                       const Tensor& bias);

/// Max over each segment of x[rows, n] -> [segments, n].
Tensor max_pool_time(const Tensor& x, const Segments& segments);

/// gate * transform + (1 - gate) * carry.
Tensor highway(const Tensor& gate, const Tensor& transform, const Tensor& carry);

/// x * mask with the mask a constant [period, cols] block; row r of x uses
/// mask row r % period. Masks already carry the inverted-dropout scaling.
Tensor dropout(const Tensor& x, std::span<const double> mask, std::size_t period);

/// Row-wise log-softmax of x[m, n].
Tensor log_softmax(const Tensor& x);

/// Mean negative log likelihood of targets under row log-probabilities.
Tensor nll(const Tensor& log_probs, std::span<const std::size_t> targets);

/// Fused log_softmax + nll. When `row_losses` is non-null it receives the
/// per-row negative log likelihoods.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                             std::vector<double>* row_losses = nullptr);

}  // namespace groc::ops

#endif  // GROC_OPS_HPP
