#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cardioprop/network_spec.hpp"
#include "cardioprop/tensor.hpp"

namespace cardioprop {

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Named weights and buffers of one network, ordered as parameter_decls().
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::vector<Parameter> params);

  /// Fan-in scaled uniform weights, zero biases, unit BN scale.
  static ParameterSet initialize(const NetworkSpec& spec, std::uint64_t seed);

  std::vector<Parameter>& items() noexcept { return params_; }
  const std::vector<Parameter>& items() const noexcept { return params_; }
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  const Parameter* find(std::string_view name) const;

  std::size_t trainable_count() const;
  void zero_grad();

  /// Throws unless every declared parameter is present with matching shape.
  void validate_against(const NetworkSpec& spec) const;

 private:
  std::vector<Parameter> params_;
};

enum class Mode { train, infer };

/// Executes a NetworkSpec graph and back-propagates through it.
///
/// forward() caches every activation; backward() consumes that cache and
/// accumulates into the parameter gradients. One instance is not thread-safe,
/// separate instances share nothing.
class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t seed);
  Network(NetworkSpec spec, ParameterSet params);

  const NetworkSpec& spec() const noexcept { return spec_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  /// Inputs are NCHW tensors keyed by input-slot name; every slot is required.
  TensorMap forward(const TensorMap& inputs, Mode mode);

  /// Upstream gradients keyed by output name (missing outputs count as zero).
  void backward(const TensorMap& output_grads);

  void zero_grad() { params_.zero_grad(); }
  void release_cache();

 private:
  struct LayerCache {
    Buffer aux;           // BN: normalized activations; pool: argmax offsets
    Buffer inv_std;       // BN per-channel 1/sqrt(var + eps)
  };

  int node_index(const std::string& name) const;

  NetworkSpec spec_;
  ParameterSet params_;
  std::vector<NodeShape> shapes_;
  std::vector<std::vector<int>> layer_inputs_;  // node indices; inputs come first
  std::vector<int> output_nodes_;
  std::vector<Tensor> nodes_;                   // inputs then layer outputs
  std::vector<LayerCache> cache_;
  std::vector<Buffer> grad_buf_;   // reused across backward calls
  std::vector<bool> grad_live_;
  std::vector<int> layer_param_;                // index of a layer's first parameter, or -1
  int batch_ = 0;
  bool have_forward_ = false;
  Mode last_mode_ = Mode::infer;
};

}  // namespace cardioprop
