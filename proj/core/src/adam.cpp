#include "cardioprop/adam.hpp"

#include <cmath>

#include "cardioprop/error.hpp"

namespace cardioprop {

AdamState make_adam_state(const ParameterSet& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params.items()) {
    if (!p.trainable) continue;
    s.first.emplace_back(p.value.size(), 0.0);
    s.second.emplace_back(p.value.size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, ParameterSet& params) {
  std::size_t slot = 0;
  for (const auto& p : params.items()) {
    if (!p.trainable) continue;
    if (slot >= state.first.size() || state.first[slot].size() != p.value.size())
      throw Error("shape", "optimizer state does not match parameter '" + p.name + "'");
    if (p.value.has_grad())
      for (double g : p.value.grad())
        if (!std::isfinite(g)) throw Error("nonfinite", "non-finite gradient in parameter '" + p.name + "'");
    ++slot;
  }
  if (slot != state.first.size()) throw Error("shape", "optimizer state has extra parameters");

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  slot = 0;
  for (auto& p : params.items()) {
    if (!p.trainable) continue;
    auto& m = state.first[slot];
    auto& v = state.second[slot];
    ++slot;
    if (!p.value.has_grad()) continue;
    const auto& g = p.value.grad();
    auto w = p.value.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / correction1;
      const double vhat = v[i] / correction2;
      w[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

}  // namespace cardioprop
