#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "pvg/core/autograd.hpp"

namespace pvg {

enum class ReduceMode { kMax, kMean, kSum };

namespace detail {

inline void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank)
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_str(s));
}

inline void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw DimensionError(std::string(op) + " shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// Splits `shape` around `axis` into (outer, length, inner) extents.
inline std::array<Index, 3> axis_split(const Shape& shape, Index axis) {
  Index outer = 1, inner = 1;
  for (Index i = 0; i < axis; ++i) outer *= shape[i];
  for (Index i = axis + 1; i < static_cast<Index>(shape.size()); ++i) inner *= shape[i];
  return {outer, shape[axis], inner};
}

template <typename Scalar, typename Fwd, typename Deriv>
Var<Scalar> unary(const Var<Scalar>& x, Fwd fwd, Deriv deriv, const char* name) {
  Tensor<Scalar> out(x.shape());
  const auto& xv = x.value().data();
  for (Index i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return make_result<Scalar>(
      std::move(out), {x},
      [x, deriv](Node<Scalar>& self) {
        const auto& xv = x.value().data();
        Vector<Scalar> g(xv.size());
        for (Index i = 0; i < xv.size(); ++i) g[i] = self.grad[i] * deriv(xv[i]);
        accumulate(*x.node(), g);
      },
      name);
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_rank(a.shape(), 2, "matmul");
  detail::require_rank(b.shape(), 2, "matmul");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul inner extents differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  Tensor<Scalar> out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return make_result<Scalar>(
      std::move(out), {a, b},
      [a, b](Node<Scalar>& self) {
        const auto g = self.grad.matrix();
        if (a.requires_grad()) accumulate(*a.node(), g * b.value().matrix().transpose());
        if (b.requires_grad()) accumulate(*b.node(), a.value().matrix().transpose() * g);
      },
      "matmul");
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same(a.shape(), b.shape(), "add");
  Tensor<Scalar> out(a.shape(), a.value().data() + b.value().data());
  return make_result<Scalar>(
      std::move(out), {a, b},
      [a, b](Node<Scalar>& self) {
        accumulate(*a.node(), self.grad.data());
        accumulate(*b.node(), self.grad.data());
      },
      "add");
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same(a.shape(), b.shape(), "sub");
  Tensor<Scalar> out(a.shape(), a.value().data() - b.value().data());
  return make_result<Scalar>(
      std::move(out), {a, b},
      [a, b](Node<Scalar>& self) {
        accumulate(*a.node(), self.grad.data());
        accumulate(*b.node(), -self.grad.data());
      },
      "sub");
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same(a.shape(), b.shape(), "mul");
  Tensor<Scalar> out(a.shape(), a.value().data().cwiseProduct(b.value().data()));
  return make_result<Scalar>(
      std::move(out), {a, b},
      [a, b](Node<Scalar>& self) {
        accumulate(*a.node(), self.grad.data().cwiseProduct(b.value().data()));
        accumulate(*b.node(), self.grad.data().cwiseProduct(a.value().data()));
      },
      "mul");
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out(a.shape(), a.value().data() * s);
  return make_result<Scalar>(
      std::move(out), {a}, [a, s](Node<Scalar>& self) { accumulate(*a.node(), self.grad.data() * s); },
      "scale");
}

// Scalar-with-tensor broadcast: `s` holds a single element.
template <typename Scalar>
Var<Scalar> scale_by(const Var<Scalar>& a, const Var<Scalar>& s) {
  if (s.value().size() != 1) throw DimensionError("scale_by expects a one-element scalar tensor");
  const Scalar sv = s.value()[0];
  Tensor<Scalar> out(a.shape(), a.value().data() * sv);
  return make_result<Scalar>(
      std::move(out), {a, s},
      [a, s, sv](Node<Scalar>& self) {
        accumulate(*a.node(), self.grad.data() * sv);
        if (s.requires_grad()) {
          Vector<Scalar> gs(1);
          gs[0] = self.grad.data().dot(a.value().data());
          accumulate(*s.node(), gs);
        }
      },
      "scale_by");
}

template <typename Scalar>
Var<Scalar> erf(const Var<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return std::erf(v); },
      [](Scalar v) { return Scalar(2) / std::sqrt(std::numbers::pi_v<Scalar>) * std::exp(-v * v); },
      "erf");
}

// max(0, x); the derivative at exactly 0 is taken as 0.
template <typename Scalar>
Var<Scalar> max0(const Var<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return v > Scalar(0) ? v : Scalar(0); },
      [](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); }, "max0");
}

// Reduction along `axis`. Max routes the gradient to the lowest maximal index.
template <typename Scalar>
Var<Scalar> reduce(const Var<Scalar>& x, Index axis, ReduceMode mode) {
  const Shape& in_shape = x.shape();
  if (axis < 0 || axis >= static_cast<Index>(in_shape.size()))
    throw DimensionError("reduce axis " + std::to_string(axis) + " out of range for " +
                         shape_str(in_shape));
  const auto [outer, len, inner] = detail::axis_split(in_shape, axis);
  if (len == 0) throw EmptyReductionError("reduction over an empty axis");
  Shape out_shape;
  for (Index i = 0; i < static_cast<Index>(in_shape.size()); ++i)
    if (i != axis) out_shape.push_back(in_shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  const auto& xv = x.value().data();
  Tensor<Scalar> out(out_shape);
  std::vector<Index> argmax;
  if (mode == ReduceMode::kMax) argmax.resize(static_cast<std::size_t>(outer * inner));
  for (Index o = 0; o < outer; ++o) {
    for (Index in = 0; in < inner; ++in) {
      const Index base = o * len * inner + in;
      if (mode == ReduceMode::kMax) {
        Index best = 0;
        Scalar best_v = xv[base];
        for (Index l = 1; l < len; ++l) {
          const Scalar v = xv[base + l * inner];
          if (v > best_v) {
            best_v = v;
            best = l;
          }
        }
        out[o * inner + in] = best_v;
        argmax[static_cast<std::size_t>(o * inner + in)] = best;
      } else {
        Scalar acc = 0;
        for (Index l = 0; l < len; ++l) acc += xv[base + l * inner];
        out[o * inner + in] = mode == ReduceMode::kMean ? acc / static_cast<Scalar>(len) : acc;
      }
    }
  }
  return make_result<Scalar>(
      std::move(out), {x},
      [x, mode, outer, len, inner, argmax = std::move(argmax)](Node<Scalar>& self) {
        Vector<Scalar> g = Vector<Scalar>::Zero(x.value().size());
        const Scalar w = mode == ReduceMode::kMean ? Scalar(1) / static_cast<Scalar>(len) : Scalar(1);
        for (Index o = 0; o < outer; ++o) {
          for (Index in = 0; in < inner; ++in) {
            const Index base = o * len * inner + in;
            const Scalar go = self.grad[o * inner + in];
            if (mode == ReduceMode::kMax) {
              g[base + argmax[static_cast<std::size_t>(o * inner + in)] * inner] += go;
            } else {
              for (Index l = 0; l < len; ++l) g[base + l * inner] += go * w;
            }
          }
        }
        accumulate(*x.node(), g);
      },
      "reduce");
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& x, Shape shape) {
  Tensor<Scalar> out = x.value().reshaped(std::move(shape));
  return make_result<Scalar>(
      std::move(out), {x}, [x](Node<Scalar>& self) { accumulate(*x.node(), self.grad.data()); },
      "reshape");
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  return reduce(reshape(x, {x.value().size()}), 0, ReduceMode::kSum);
}

template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, Index axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis < 0 || axis >= static_cast<Index>(first.size()))
    throw DimensionError("concat axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (static_cast<Index>(d) != axis && s[d] != first[d]) ok = false;
    if (!ok)
      throw DimensionError("concat non-axis extents differ: " + shape_str(first) + " vs " +
                           shape_str(s));
    out_shape[axis] += s[axis];
  }
  const auto [outer, total, inner] = detail::axis_split(out_shape, axis);
  Tensor<Scalar> out(out_shape);
  std::vector<Index> offsets;
  Index offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const Index len = p.shape()[axis];
    const auto& pv = p.value().data();
    for (Index o = 0; o < outer; ++o)
      out.data().segment((o * total + offset) * inner, len * inner) = pv.segment(o * len * inner, len * inner);
    offset += len;
  }
  return make_result<Scalar>(
      std::move(out), parts,
      [parts, offsets, axis, outer = outer, total = total, inner = inner](Node<Scalar>& self) {
        for (std::size_t k = 0; k < parts.size(); ++k) {
          if (!parts[k].requires_grad()) continue;
          const Index len = parts[k].shape()[axis];
          Vector<Scalar> g(parts[k].value().size());
          for (Index o = 0; o < outer; ++o)
            g.segment(o * len * inner, len * inner) =
                self.grad.data().segment((o * total + offsets[k]) * inner, len * inner);
          accumulate(*parts[k].node(), g);
        }
      },
      "concat");
}

// Contiguous slab [begin, begin + length) along `axis`.
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& x, Index axis, Index begin, Index length) {
  const Shape& s = x.shape();
  if (axis < 0 || axis >= static_cast<Index>(s.size()) || begin < 0 || length <= 0 ||
      begin + length > s[axis])
    throw DimensionError("slice out of range on " + shape_str(s));
  const auto [outer, total, inner] = detail::axis_split(s, axis);
  Shape out_shape = s;
  out_shape[axis] = length;
  Tensor<Scalar> out(out_shape);
  for (Index o = 0; o < outer; ++o)
    out.data().segment(o * length * inner, length * inner) =
        x.value().data().segment((o * total + begin) * inner, length * inner);
  return make_result<Scalar>(
      std::move(out), {x},
      [x, begin, length, outer = outer, total = total, inner = inner](Node<Scalar>& self) {
        Vector<Scalar> g = Vector<Scalar>::Zero(x.value().size());
        for (Index o = 0; o < outer; ++o)
          g.segment((o * total + begin) * inner, length * inner) =
              self.grad.data().segment(o * length * inner, length * inner);
        accumulate(*x.node(), g);
      },
      "slice");
}

template <typename Scalar>
std::vector<Var<Scalar>> split(const Var<Scalar>& x, Index axis, std::span<const Index> sizes) {
  std::vector<Var<Scalar>> parts;
  Index begin = 0;
  for (Index len : sizes) {
    parts.push_back(slice(x, axis, begin, len));
    begin += len;
  }
  if (begin != x.shape().at(static_cast<std::size_t>(axis)))
    throw DimensionError("split sizes do not cover the axis");
  return parts;
}

// out.flat[i] = x.flat[index[i]], or 0 where index[i] < 0.
template <typename Scalar>
Var<Scalar> gather(const Var<Scalar>& x, std::vector<Index> index, Shape out_shape) {
  if (static_cast<Index>(index.size()) != shape_size(out_shape))
    throw DimensionError("gather index count does not match output shape " + shape_str(out_shape));
  const Index n = x.value().size();
  Tensor<Scalar> out(out_shape);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const Index src = index[i];
    if (src >= n) throw DimensionError("gather index out of range");
    out[static_cast<Index>(i)] = src < 0 ? Scalar(0) : x.value()[src];
  }
  return make_result<Scalar>(
      std::move(out), {x},
      [x, index = std::move(index)](Node<Scalar>& self) {
        Vector<Scalar> g = Vector<Scalar>::Zero(x.value().size());
        for (std::size_t i = 0; i < index.size(); ++i)
          if (index[i] >= 0) g[index[i]] += self.grad[static_cast<Index>(i)];
        accumulate(*x.node(), g);
      },
      "gather");
}

// x[n x c] + b[c] on every row.
template <typename Scalar>
Var<Scalar> add_rowwise(const Var<Scalar>& x, const Var<Scalar>& b) {
  detail::require_rank(x.shape(), 2, "add_rowwise");
  if (b.value().size() != x.dim(1)) throw DimensionError("add_rowwise bias width mismatch");
  Tensor<Scalar> out = x.value();
  out.matrix().rowwise() += b.value().data().transpose();
  return make_result<Scalar>(
      std::move(out), {x, b},
      [x, b](Node<Scalar>& self) {
        accumulate(*x.node(), self.grad.data());
        if (b.requires_grad()) accumulate(*b.node(), self.grad.matrix().colwise().sum().transpose());
      },
      "add_rowwise");
}

// x[n x c] * g[c] on every row.
template <typename Scalar>
Var<Scalar> mul_rowwise(const Var<Scalar>& x, const Var<Scalar>& g) {
  detail::require_rank(x.shape(), 2, "mul_rowwise");
  if (g.value().size() != x.dim(1)) throw DimensionError("mul_rowwise scale width mismatch");
  Tensor<Scalar> out = x.value();
  out.matrix() *= g.value().data().asDiagonal();
  return make_result<Scalar>(
      std::move(out), {x, g},
      [x, g](Node<Scalar>& self) {
        if (x.requires_grad()) accumulate(*x.node(), self.grad.matrix() * g.value().data().asDiagonal());
        if (g.requires_grad())
          accumulate(*g.node(),
                     self.grad.matrix().cwiseProduct(x.value().matrix()).colwise().sum().transpose());
      },
      "mul_rowwise");
}

// Normalizes each row of x[n x c] to zero mean and unit variance, then applies
// the per-channel affine gamma/beta.
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       Scalar eps = Scalar(1e-5)) {
  detail::require_rank(x.shape(), 2, "layer_norm");
  const Index n = x.dim(0), c = x.dim(1);
  if (gamma.value().size() != c || beta.value().size() != c)
    throw DimensionError("layer_norm affine width mismatch");
  RowMatrix<Scalar> xhat(n, c);
  Vector<Scalar> inv_std(n);
  const auto xm = x.value().matrix();
  for (Index i = 0; i < n; ++i) {
    const Scalar mean = xm.row(i).mean();
    const auto centered = (xm.row(i).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(c);
    inv_std[i] = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = centered * inv_std[i];
  }
  Tensor<Scalar> out({n, c});
  out.matrix() = (xhat * gamma.value().data().asDiagonal()).rowwise() + beta.value().data().transpose();
  return make_result<Scalar>(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c](Node<Scalar>& self) {
        const auto g = self.grad.matrix();
        if (gamma.requires_grad())
          accumulate(*gamma.node(), g.cwiseProduct(xhat).colwise().sum().transpose());
        if (beta.requires_grad()) accumulate(*beta.node(), g.colwise().sum().transpose());
        if (!x.requires_grad()) return;
        RowMatrix<Scalar> gx(n, c);
        const RowMatrix<Scalar> gh = g * gamma.value().data().asDiagonal();
        for (Index i = 0; i < n; ++i) {
          const Scalar mean_g = gh.row(i).mean();
          const Scalar mean_gx = gh.row(i).dot(xhat.row(i)) / static_cast<Scalar>(c);
          gx.row(i) = inv_std[i] * (gh.row(i).array() - mean_g - xhat.row(i).array() * mean_gx).matrix();
        }
        accumulate(*x.node(), gx);
      },
      "layer_norm");
}

// Mean softmax cross-entropy of logits[b x k] against integer labels.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, std::vector<int> labels) {
  detail::require_rank(logits.shape(), 2, "softmax_cross_entropy");
  const Index b = logits.dim(0), k = logits.dim(1);
  if (static_cast<Index>(labels.size()) != b) throw DimensionError("label count does not match batch");
  RowMatrix<Scalar> prob(b, k);
  Scalar loss = 0;
  const auto lm = logits.value().matrix();
  for (Index i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw RangeError("label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    const Scalar mx = lm.row(i).maxCoeff();
    prob.row(i) = (lm.row(i).array() - mx).exp().matrix();
    const Scalar z = prob.row(i).sum();
    prob.row(i) /= z;
    loss += std::log(z) + mx - lm(i, y);
  }
  loss /= static_cast<Scalar>(b);
  return make_result<Scalar>(
      Tensor<Scalar>::scalar(loss), {logits},
      [logits, prob = std::move(prob), labels = std::move(labels), b](Node<Scalar>& self) {
        RowMatrix<Scalar> g = prob;
        for (Index i = 0; i < b; ++i) g(i, labels[static_cast<std::size_t>(i)]) -= Scalar(1);
        g *= self.grad[0] / static_cast<Scalar>(b);
        accumulate(*logits.node(), g);
      },
      "softmax_cross_entropy");
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) { return mul(a, b); }

}  // namespace pvg
