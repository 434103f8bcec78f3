#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "pvg/core/autograd.hpp"

namespace pvg {

// Ordered, named parameter tensors. Order is the registration order and is
// what optimizer state and bound variable lists follow.
template <typename Scalar>
class ParameterSet {
 public:
  std::size_t add(const std::string& name, Tensor<Scalar> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
    index_.emplace(name, names_.size());
    names_.push_back(name);
    values_.push_back(std::move(value));
    return names_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<Scalar>& operator[](std::size_t i) { return values_[i]; }
  const Tensor<Scalar>& operator[](std::size_t i) const { return values_[i]; }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t index_of(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + name);
    return it->second;
  }
  Tensor<Scalar>& at(const std::string& name) { return values_[index_of(name)]; }
  const Tensor<Scalar>& at(const std::string& name) const { return values_[index_of(name)]; }

  Index total_count() const {
    Index total = 0;
    for (const auto& v : values_) total += v.size();
    return total;
  }

  // Variables over the current values; leaves when `requires_grad`.
  std::vector<Var<Scalar>> bind(bool requires_grad) const {
    std::vector<Var<Scalar>> vars;
    vars.reserve(values_.size());
    for (const auto& v : values_) vars.emplace_back(v, requires_grad);
    return vars;
  }

  template <typename Other>
  ParameterSet<Other> cast() const {
    ParameterSet<Other> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<Other>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<Scalar>> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace pvg
