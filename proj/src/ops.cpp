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

#include "groc/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gemm.hpp"
#include "groc/errors.hpp"

namespace groc::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedConstMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

constexpr double kSeluScale = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

[[noreturn]] void shape_fail(const char* op, const std::vector<Tensor>& xs,
                             const std::string& detail = {}) {
  std::string msg = std::string(op) + ": incompatible shapes";
  for (const auto& x : xs) msg += " " + shape_str(x.shape());
  if (!detail.empty()) msg += " (" + detail + ")";
  throw DimensionError(msg);
}

void require_2d(const char* op, const Tensor& x) {
  if (x.ndim() != 2) shape_fail(op, {x}, "expected 2-D");
}

// Grad buffer of parent i, or nullptr when that parent needs no gradient.
double* parent_grad(TensorNode& out, std::size_t i) {
  auto& p = out.parents[i];
  return p->requires_grad ? p->ensure_grad().data() : nullptr;
}

ConstMatMap as_mat(const TensorNode& n) {
  return ConstMatMap(n.data.data(), static_cast<Eigen::Index>(n.shape[0]),
                     static_cast<Eigen::Index>(n.shape[1]));
}

MatMap as_mat(double* ptr, std::size_t r, std::size_t c) {
  return MatMap(ptr, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    const auto& xin = o.parents[0]->data;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * deriv(xin[i], o.data[i]);
  });
}

// Splits a 2-D shape around `axis` into (outer, axis length, inner).
void axis_split(const Tensor& x, std::size_t axis, std::size_t& outer, std::size_t& len,
                std::size_t& inner) {
  outer = axis == 0 ? 1 : x.dim(0);
  len = x.dim(axis);
  inner = axis == 0 ? x.dim(1) : 1;
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  if (name == "selu") return Activation::selu;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::selu: return "selu";
  }
  return "?";
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.ndim() != 2 || b.ndim() != 2) shape_fail("matmul", {a, b}, "expected 2-D operands");
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t bk = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (k != bk) shape_fail("matmul", {a, b}, transpose_b ? "a x b^T" : "a x b");

  std::vector<double> out(m * n);
  detail::gemm_rows(m, n, k, a.data().data(), k, b.data().data(), transpose_b ? k : n, transpose_b,
                    out.data(), n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n, transpose_b](TensorNode& o) {
    auto dc = ConstMatMap(o.grad.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    const auto& an = *o.parents[0];
    const auto& bn = *o.parents[1];
    if (double* ga = parent_grad(o, 0)) {
      auto da = as_mat(ga, m, k);
      if (transpose_b) {
        da.noalias() += dc * as_mat(bn);
      } else {
        da.noalias() += dc * as_mat(bn).transpose();
      }
    }
    if (double* gb = parent_grad(o, 1)) {
      if (transpose_b) {
        auto db = as_mat(gb, n, k);
        db.noalias() += dc.transpose() * as_mat(an);
      } else {
        auto db = as_mat(gb, k, n);
        db.noalias() += as_mat(an).transpose() * dc;
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("add", {a, b});
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = parent_grad(o, p)) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", {a, b});
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& o) {
    if (double* g = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (double* g = parent_grad(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", {a, b});
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& o) {
    const auto& ad = o.parents[0]->data;
    const auto& bd = o.parents[1]->data;
    if (double* g = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * bd[i];
    }
    if (double* g = parent_grad(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * ad[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](TensorNode& o) {
    if (double* g = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
    }
  });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_2d("add_row", x);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row.numel() != n) shape_fail("add_row", {x, row});
  std::vector<double> out(x.data().begin(), x.data().end());
  auto r = row.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += r[j];
  }
  return make_result(x.shape(), std::move(out), {x, row}, [m, n](TensorNode& o) {
    if (double* g = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (double* g = parent_grad(o, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
      }
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  if (axis > 1) shape_fail("concat", parts, "axis must be 0 or 1");
  for (const auto& p : parts) require_2d("concat", p);
  const std::size_t other = 1 - axis;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.dim(other) != parts[0].dim(other)) shape_fail("concat", parts);
    total += p.dim(axis);
  }
  Shape shape = parts[0].shape();
  shape[axis] = total;
  const std::size_t rows = shape[0], cols = shape[1];
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> starts;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    starts.push_back(offset);
    auto d = p.data();
    if (axis == 0) {
      std::copy(d.begin(), d.end(), out.begin() + static_cast<std::ptrdiff_t>(offset * cols));
    } else {
      const std::size_t w = p.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(i * w), w,
                    out.begin() + static_cast<std::ptrdiff_t>(i * cols + offset));
      }
    }
    offset += p.dim(axis);
  }
  return make_result(shape, std::move(out), parts, [axis, cols, rows, starts](TensorNode& o) {
    for (std::size_t k = 0; k < o.parents.size(); ++k) {
      double* g = parent_grad(o, k);
      if (!g) continue;
      const auto& ps = o.parents[k]->shape;
      if (axis == 0) {
        const std::size_t base = starts[k] * cols;
        for (std::size_t i = 0; i < ps[0] * cols; ++i) g[i] += o.grad[base + i];
      } else {
        const std::size_t w = ps[1];
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < w; ++j) g[i * w + j] += o.grad[i * cols + starts[k] + j];
        }
      }
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require_2d("slice", x);
  if (axis > 1 || begin > end || end > x.dim(axis)) {
    shape_fail("slice", {x}, "range [" + std::to_string(begin) + "," + std::to_string(end) +
                                 ") on axis " + std::to_string(axis));
  }
  std::size_t outer, len, inner;
  axis_split(x, axis, outer, len, inner);
  const std::size_t width = end - begin;
  Shape shape = x.shape();
  shape[axis] = width;
  std::vector<double> out(outer * width * inner);
  auto d = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>((o * len + begin) * inner), width * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * width * inner));
  }
  return make_result(shape, std::move(out), {x},
                     [outer, len, inner, begin, width](TensorNode& o) {
                       double* g = parent_grad(o, 0);
                       if (!g) return;
                       for (std::size_t k = 0; k < outer; ++k) {
                         const std::size_t src = k * width * inner;
                         const std::size_t dst = (k * len + begin) * inner;
                         for (std::size_t i = 0; i < width * inner; ++i) g[dst + i] += o.grad[src + i];
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    shape_fail("reshape", {x}, "target " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_2d("gather_rows", table);
  const std::size_t n = table.dim(1), r = table.dim(0);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * n);
  auto d = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r) {
      shape_fail("gather_rows", {table}, "row index " + std::to_string(idx[i]) + " out of range");
    }
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(idx[i] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return make_result({idx.size(), n}, std::move(out), {table}, [idx, n](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < n; ++j) g[idx[i] * n + j] += o.grad[i * n + j];
    }
  });
}

Tensor segment_mean(const Tensor& x, const Segments& segments) {
  require_2d("segment_mean", x);
  if (segments.total() != x.dim(0)) {
    shape_fail("segment_mean", {x}, "segments cover " + std::to_string(segments.total()) + " rows");
  }
  const std::size_t n = x.dim(1), count = segments.count();
  std::vector<double> out(count * n, 0.0);
  auto d = x.data();
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t len = segments.length(s);
    if (len == 0) continue;
    for (std::size_t r = segments.offsets[s]; r < segments.offsets[s + 1]; ++r) {
      for (std::size_t j = 0; j < n; ++j) out[s * n + j] += d[r * n + j];
    }
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t j = 0; j < n; ++j) out[s * n + j] *= inv;
  }
  return make_result({count, n}, std::move(out), {x}, [segments, n](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t s = 0; s < segments.count(); ++s) {
      const std::size_t len = segments.length(s);
      if (len == 0) continue;
      const double inv = 1.0 / static_cast<double>(len);
      for (std::size_t r = segments.offsets[s]; r < segments.offsets[s + 1]; ++r) {
        for (std::size_t j = 0; j < n; ++j) g[r * n + j] += o.grad[s * n + j] * inv;
      }
    }
  });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  require_2d("mean", x);
  if (axis > 1) shape_fail("mean", {x}, "axis must be 0 or 1");
  const std::size_t m = x.dim(0), n = x.dim(1);
  const std::size_t out_len = axis == 0 ? n : m;
  const double inv = 1.0 / static_cast<double>(axis == 0 ? m : n);
  std::vector<double> out(out_len, 0.0);
  auto d = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += d[i * n + j];
  }
  for (auto& v : out) v *= inv;
  return make_result({out_len}, std::move(out), {x}, [m, n, axis, inv](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[axis == 0 ? j : i] * inv;
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total}, {x}, [](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    const std::size_t n = o.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[0];
  });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor selu(const Tensor& x) {
  return unary(
      x,
      [](double v) { return v > 0.0 ? kSeluScale * v : kSeluScale * kSeluAlpha * std::expm1(v); },
      [](double v, double y) { return v > 0.0 ? kSeluScale : y + kSeluScale * kSeluAlpha; });
}

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::relu: return relu(x);
    case Activation::selu: return selu(x);
  }
  return x;
}

Segments conv_segments(const Segments& segments, std::size_t width) {
  Segments out;
  out.offsets.reserve(segments.offsets.size());
  for (std::size_t s = 0; s < segments.count(); ++s) out.push(segments.length(s) + 1 - width);
  return out;
}

Tensor conv1d(const Tensor& x, const Segments& segments, const Tensor& weight, const Tensor& bias) {
  require_2d("conv1d", x);
  if (weight.ndim() != 3 || weight.dim(2) != x.dim(1) || bias.numel() != weight.dim(0)) {
    shape_fail("conv1d", {x, weight, bias});
  }
  if (segments.total() != x.dim(0)) {
    shape_fail("conv1d", {x}, "segments cover " + std::to_string(segments.total()) + " rows");
  }
  const std::size_t channels = x.dim(1), filters = weight.dim(0), width = weight.dim(1);
  for (std::size_t s = 0; s < segments.count(); ++s) {
    if (segments.length(s) < width) {
      shape_fail("conv1d", {x, weight},
                 "segment " + std::to_string(s) + " shorter than filter width " +
                     std::to_string(width));
    }
  }
  const std::size_t total = x.dim(0);
  if (total < width) shape_fail("conv1d", {x, weight});

  // Every window of `width` consecutive rows is contiguous in memory, so the
  // windows form an overlapping strided matrix [total - width + 1, width*C].
  const std::size_t windows = total - width + 1;
  const std::size_t span_len = width * channels;
  std::vector<double> full(windows * filters);
  detail::gemm_rows(windows, filters, span_len, x.data().data(), channels, weight.data().data(),
                    span_len, true, full.data(), filters);

  const Segments out_seg = conv_segments(segments, width);
  std::vector<std::size_t> rows;  // window row feeding each output row
  rows.reserve(out_seg.total());
  for (std::size_t s = 0; s < segments.count(); ++s) {
    for (std::size_t p = 0; p < out_seg.length(s); ++p) rows.push_back(segments.offsets[s] + p);
  }
  std::vector<double> out(rows.size() * filters);
  auto b = bias.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t f = 0; f < filters; ++f) out[i * filters + f] = full[rows[i] * filters + f] + b[f];
  }

  return make_result(
      {rows.size(), filters}, std::move(out), {x, weight, bias},
      [rows, windows, span_len, channels, filters](TensorNode& o) {
        RowMat dfull = RowMat::Zero(static_cast<Eigen::Index>(windows), static_cast<Eigen::Index>(filters));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          for (std::size_t f = 0; f < filters; ++f) {
            dfull(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(f)) = o.grad[i * filters + f];
          }
        }
        const auto& xn = *o.parents[0];
        const auto& wn = *o.parents[1];
        if (double* gx = parent_grad(o, 0)) {
          ConstMatMap w(wn.data.data(), static_cast<Eigen::Index>(filters),
                        static_cast<Eigen::Index>(span_len));
          RowMat dwin = dfull * w;
          for (std::size_t r = 0; r < windows; ++r) {
            double* dst = gx + r * channels;
            const double* src = dwin.data() + r * span_len;
            for (std::size_t k = 0; k < span_len; ++k) dst[k] += src[k];
          }
        }
        if (double* gw = parent_grad(o, 1)) {
          StridedConstMap win(xn.data.data(), static_cast<Eigen::Index>(windows),
                              static_cast<Eigen::Index>(span_len), Eigen::OuterStride<>(channels));
          as_mat(gw, filters, span_len).noalias() += dfull.transpose() * win;
        }
        if (double* gb = parent_grad(o, 2)) {
          for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t f = 0; f < filters; ++f) gb[f] += o.grad[i * filters + f];
          }
        }
      });
}

Tensor conv1d_max_pool(const Tensor& x, const Segments& segments, const Tensor& weight,
                       const Tensor& bias) {
  require_2d("conv1d_max_pool", x);
  if (weight.ndim() != 3 || weight.dim(2) != x.dim(1) || bias.numel() != weight.dim(0)) {
    shape_fail("conv1d_max_pool", {x, weight, bias});
  }
  if (segments.total() != x.dim(0)) {
    shape_fail("conv1d_max_pool", {x}, "segments cover " + std::to_string(segments.total()) + " rows");
  }
  const std::size_t channels = x.dim(1), filters = weight.dim(0), width = weight.dim(1);
  for (std::size_t s = 0; s < segments.count(); ++s) {
    if (segments.length(s) < width) {
      shape_fail("conv1d_max_pool", {x, weight},
                 "segment " + std::to_string(s) + " shorter than filter width " + std::to_string(width));
    }
  }
  const std::size_t count = segments.count();
  const std::size_t windows = x.dim(0) - width + 1;
  const std::size_t span_len = width * channels;
  std::vector<double> full(windows * filters);
  detail::gemm_rows(windows, filters, span_len, x.data().data(), channels, weight.data().data(),
                    span_len, true, full.data(), filters);

  std::vector<std::size_t> argmax(count * filters);
  std::vector<double> out(count * filters);
  auto b = bias.data();
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t first = segments.offsets[s], last = segments.offsets[s + 1] - width;
    for (std::size_t f = 0; f < filters; ++f) {
      std::size_t best = first;
      for (std::size_t r = first + 1; r <= last; ++r) {
        if (full[r * filters + f] > full[best * filters + f]) best = r;
      }
      argmax[s * filters + f] = best;
      out[s * filters + f] = full[best * filters + f] + b[f];
    }
  }
  // Only the winning window of each (word, filter) receives gradient.
  return make_result(
      {count, filters}, std::move(out), {x, weight, bias},
      [argmax, filters, channels, span_len](TensorNode& o) {
        const auto& xd = o.parents[0]->data;
        const auto& wd = o.parents[1]->data;
        double* gx = parent_grad(o, 0);
        double* gw = parent_grad(o, 1);
        double* gb = parent_grad(o, 2);
        for (std::size_t i = 0; i < argmax.size(); ++i) {
          const double g = o.grad[i];
          if (g == 0.0) continue;
          const std::size_t f = i % filters, r = argmax[i];
          if (gx) {
            double* dst = gx + r * channels;
            const double* w = wd.data() + f * span_len;
            for (std::size_t k = 0; k < span_len; ++k) dst[k] += g * w[k];
          }
          if (gw) {
            double* dst = gw + f * span_len;
            const double* src = xd.data() + r * channels;
            for (std::size_t k = 0; k < span_len; ++k) dst[k] += g * src[k];
          }
          if (gb) gb[f] += g;
        }
      });
}

Tensor max_pool_time(const Tensor& x, const Segments& segments) {
  require_2d("max_pool_time", x);
  if (segments.total() != x.dim(0)) {
    shape_fail("max_pool_time", {x}, "segments cover " + std::to_string(segments.total()) + " rows");
  }
  const std::size_t n = x.dim(1), count = segments.count();
  std::vector<double> out(count * n);
  std::vector<std::size_t> argmax(count * n);
  auto d = x.data();
  for (std::size_t s = 0; s < count; ++s) {
    if (segments.length(s) == 0) shape_fail("max_pool_time", {x}, "empty segment");
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t best = segments.offsets[s];
      for (std::size_t r = best + 1; r < segments.offsets[s + 1]; ++r) {
        if (d[r * n + j] > d[best * n + j]) best = r;
      }
      argmax[s * n + j] = best;
      out[s * n + j] = d[best * n + j];
    }
  }
  return make_result({count, n}, std::move(out), {x}, [argmax, n](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i] * n + i % n] += o.grad[i];
  });
}

Tensor highway(const Tensor& gate, const Tensor& transform, const Tensor& carry) {
  if (gate.shape() != transform.shape() || gate.shape() != carry.shape()) {
    shape_fail("highway", {gate, transform, carry});
  }
  std::vector<double> out(gate.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = gate.at(i);
    out[i] = t * transform.at(i) + (1.0 - t) * carry.at(i);
  }
  return make_result(gate.shape(), std::move(out), {gate, transform, carry}, [](TensorNode& o) {
    const auto& t = o.parents[0]->data;
    const auto& h = o.parents[1]->data;
    const auto& c = o.parents[2]->data;
    if (double* g = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * (h[i] - c[i]);
    }
    if (double* g = parent_grad(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * t[i];
    }
    if (double* g = parent_grad(o, 2)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * (1.0 - t[i]);
    }
  });
}

Tensor dropout(const Tensor& x, std::span<const double> mask, std::size_t period) {
  require_2d("dropout", x);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (period == 0 || mask.size() != period * n || m % period != 0) {
    shape_fail("dropout", {x}, "mask of " + std::to_string(mask.size()) + " values, period " +
                                   std::to_string(period));
  }
  std::vector<double> keep(mask.begin(), mask.end());
  std::vector<double> out(m * n);
  auto d = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* mrow = keep.data() + (i % period) * n;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = d[i * n + j] * mrow[j];
  }
  return make_result(x.shape(), std::move(out), {x}, [keep, period, m, n](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* mrow = keep.data() + (i % period) * n;
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[i * n + j] * mrow[j];
    }
  });
}

namespace {

// Stable row-wise log-sum-exp.
double row_logsumexp(const double* row, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
  return mx + std::log(s);
}

void check_targets(const char* op, const Tensor& x, std::span<const std::size_t> targets) {
  if (targets.size() != x.dim(0)) {
    shape_fail(op, {x}, std::to_string(targets.size()) + " targets");
  }
  for (auto t : targets) {
    if (t >= x.dim(1)) shape_fail(op, {x}, "target " + std::to_string(t) + " out of range");
  }
}

}  // namespace

Tensor log_softmax(const Tensor& x) {
  require_2d("log_softmax", x);
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  auto d = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double lse = row_logsumexp(d.data() + i * n, n);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = d[i * n + j] - lse;
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += o.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        g[i * n + j] += o.grad[i * n + j] - std::exp(o.data[i * n + j]) * gs;
      }
    }
  });
}

Tensor nll(const Tensor& log_probs, std::span<const std::size_t> targets) {
  require_2d("nll", log_probs);
  check_targets("nll", log_probs, targets);
  const std::size_t m = log_probs.dim(0), n = log_probs.dim(1);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total -= log_probs.at(i * n + tg[i]);
  const double inv = 1.0 / static_cast<double>(m);
  return make_result({1}, {total * inv}, {log_probs}, [tg, n, inv](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t i = 0; i < tg.size(); ++i) g[i * n + tg[i]] -= o.grad[0] * inv;
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                             std::vector<double>* row_losses) {
  require_2d("softmax_cross_entropy", logits);
  check_targets("softmax_cross_entropy", logits, targets);
  const std::size_t m = logits.dim(0), n = logits.dim(1);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  auto d = logits.data();
  std::vector<double> lse(m);
  double total = 0.0;
  if (row_losses) row_losses->resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    lse[i] = row_logsumexp(d.data() + i * n, n);
    const double loss = lse[i] - d[i * n + tg[i]];
    if (std::isnan(loss)) {
      throw NumericError("softmax_cross_entropy: NaN loss at row " + std::to_string(i));
    }
    if (row_losses) (*row_losses)[i] = loss;
    total += loss;
  }
  const double inv = 1.0 / static_cast<double>(m);
  return make_result({1}, {total * inv}, {logits}, [tg, lse, n, inv](TensorNode& o) {
    double* g = parent_grad(o, 0);
    if (!g) return;
    const auto& z = o.parents[0]->data;
    const double scale_ = o.grad[0] * inv;
    for (std::size_t i = 0; i < tg.size(); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        g[i * n + j] += std::exp(z[i * n + j] - lse[i]) * scale_;
      }
      g[i * n + tg[i]] -= scale_;
    }
  });
}

}  // namespace groc::ops
