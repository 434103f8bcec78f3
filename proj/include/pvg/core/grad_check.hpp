#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pvg/core/autograd.hpp"

namespace pvg {

struct GradCheckReport {
  std::string op_name;
  double max_rel_error = 0.0;
  bool passed = false;
  int probe_count = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  int probes = 20;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
  // Denominator floor: |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-6;
};

namespace detail {
template <typename F>
double eval_scalar(F& f, const Tensor<double>& x) {
  NoGradGuard guard;
  double v = 0.0;
  try {
    Var<double> out = f(Var<double>(x));
    if (out.value().size() != 1) throw DimensionError("grad_check objective must be scalar");
    v = out.value()[0];
  } catch (const NonFiniteError& e) {
    throw EvaluationError(std::string("objective produced a non-finite value: ") + e.what());
  }
  if (!std::isfinite(v)) throw EvaluationError("objective produced a non-finite value");
  return v;
}
}  // namespace detail

// Compares the reverse-mode gradient of scalar `f` at `x` with central
// differences on `probes` randomly chosen coordinates (all of them when x is
// smaller). Runs in double precision.
template <typename F>
GradCheckReport grad_check(std::string name, F&& f, const Tensor<double>& x,
                           const GradCheckOptions& options = {}) {
  Var<double> leaf = Var<double>::leaf(x);
  Var<double> out;
  try {
    out = f(leaf);
  } catch (const NonFiniteError& e) {
    throw EvaluationError(std::string("objective produced a non-finite value: ") + e.what());
  }
  if (out.value().size() != 1) throw DimensionError("grad_check objective must be scalar");
  if (!std::isfinite(out.value()[0])) throw EvaluationError("objective produced a non-finite value");
  backward(out);
  const Tensor<double> analytic = leaf.grad();

  std::vector<Index> coords(static_cast<std::size_t>(x.size()));
  std::iota(coords.begin(), coords.end(), Index{0});
  if (static_cast<Index>(options.probes) < x.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(options.probes));
  }

  GradCheckReport report;
  report.op_name = std::move(name);
  Tensor<double> probe = x;
  for (Index c : coords) {
    const double saved = probe[c];
    probe[c] = saved + options.step;
    const double up = detail::eval_scalar(f, probe);
    probe[c] = saved - options.step;
    const double down = detail::eval_scalar(f, probe);
    probe[c] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic[c];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(a - numeric) / denom);
    ++report.probe_count;
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace pvg
