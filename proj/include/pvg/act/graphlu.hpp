#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "pvg/core/ops.hpp"

namespace pvg {

// kDerived: 0.5 x (1 + erf(x / (sqrt2 (1+eps)))), i.e. x * Phi(x) for a
// Gaussian with standard deviation 1+eps. kPrinted: 0.5 x erf(x / (sqrt2
// (1+eps)) + 1), kept only for side-by-side comparison.
enum class GraphLUForm { kDerived, kPrinted };

GraphLUForm parse_graphlu_form(const std::string& name);
std::string to_string(GraphLUForm form);

inline constexpr double kMinEpsilon = -0.99;

template <typename Scalar>
struct GraphLUParams {
  Scalar epsilon = Scalar(0);

  // Standard deviation 1 + eps after clamping eps to kMinEpsilon.
  Scalar sigma() const { return Scalar(1) + std::max(epsilon, Scalar(kMinEpsilon)); }
};

// P(X <= x) for X ~ N(0, (1+eps)^2).
template <typename Scalar>
Scalar phi(Scalar x, Scalar epsilon) {
  const Scalar sigma = GraphLUParams<Scalar>{epsilon}.sigma();
  return Scalar(0.5) * std::erfc(-x / (std::numbers::sqrt2_v<Scalar> * sigma));
}

template <typename Scalar>
Scalar graphlu_value(Scalar x, Scalar epsilon, GraphLUForm form = GraphLUForm::kDerived) {
  const Scalar sigma = GraphLUParams<Scalar>{epsilon}.sigma();
  const Scalar u = x / (std::numbers::sqrt2_v<Scalar> * sigma);
  if (form == GraphLUForm::kPrinted) return Scalar(0.5) * x * std::erf(u + Scalar(1));
  return Scalar(0.5) * x * std::erfc(-u);
}

template <typename Scalar>
Scalar gelu_exact(Scalar x) {
  return Scalar(0.5) * x * std::erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

// Elementwise GraphLU with a learnable one-element epsilon. The gradient
// reaches epsilon unless it sits below the clamp.
template <typename Scalar>
Var<Scalar> graphlu(const Var<Scalar>& x, const Var<Scalar>& epsilon, GraphLUForm form = GraphLUForm::kDerived) {
  if (epsilon.value().size() != 1) throw DimensionError("graphlu epsilon must be a single scalar");
  const Scalar eps = epsilon.value()[0];
  const bool clamped = eps < Scalar(kMinEpsilon);
  const Scalar sigma = GraphLUParams<Scalar>{eps}.sigma();
  const Scalar inv = Scalar(1) / (std::numbers::sqrt2_v<Scalar> * sigma);
  const Scalar two_over_sqrt_pi = Scalar(2) / std::sqrt(std::numbers::pi_v<Scalar>);
  const Scalar shift = form == GraphLUForm::kPrinted ? Scalar(1) : Scalar(0);

  const auto& xv = x.value().data();
  Tensor<Scalar> out(x.shape());
  for (Index i = 0; i < xv.size(); ++i) {
    const Scalar u = xv[i] * inv + shift;
    // erfc keeps the far negative tail from cancelling to zero.
    out[i] = form == GraphLUForm::kPrinted ? Scalar(0.5) * xv[i] * std::erf(u) : Scalar(0.5) * xv[i] * std::erfc(-u);
  }
  return make_result<Scalar>(
      std::move(out), {x, epsilon},
      [=](Node<Scalar>& self) {
        const auto& xv = x.value().data();
        Vector<Scalar> gx(xv.size());
        Scalar geps = 0;
        for (Index i = 0; i < xv.size(); ++i) {
          const Scalar u = xv[i] * inv + shift;
          const Scalar de = two_over_sqrt_pi * std::exp(-u * u);
          const Scalar base = form == GraphLUForm::kPrinted ? std::erf(u) : std::erfc(-u);
          const Scalar g = self.grad[i];
          // d/dx [0.5 x base(u)], with du/dx = inv
          gx[i] = g * Scalar(0.5) * (base + xv[i] * de * inv);
          // du/dsigma = -x * inv / sigma
          geps += g * Scalar(0.5) * xv[i] * de * (-xv[i] * inv / sigma);
        }
        accumulate(*x.node(), gx);
        if (epsilon.requires_grad() && !clamped) {
          Vector<Scalar> ge(1);
          ge[0] = geps;
          accumulate(*epsilon.node(), ge);
        }
      },
      "graphlu");
}

template <typename Scalar>
Tensor<Scalar> graphlu(const Tensor<Scalar>& x, const GraphLUParams<Scalar>& params,
                       GraphLUForm form = GraphLUForm::kDerived) {
  NoGradGuard guard;
  return graphlu(Var<Scalar>(x), Var<Scalar>(Tensor<Scalar>::scalar(params.epsilon)), form).value();
}

}  // namespace pvg
