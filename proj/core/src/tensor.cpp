#include "cardioprop/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "cardioprop/error.hpp"

namespace cardioprop {

std::size_t shape_volume(const std::vector<int>& shape) {
  std::size_t v = 1;
  for (int e : shape) {
    if (e <= 0) throw Error("shape", "tensor extent must be positive, got " + shape_string(shape));
    v *= static_cast<std::size_t>(e);
  }
  return v;
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, const std::vector<double>& data)
    : Tensor(std::move(shape), Buffer(data.begin(), data.end())) {}

Tensor::Tensor(std::vector<int> shape, Buffer data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_volume(shape_)) {
    throw Error("shape", "tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
  }
}

Buffer& Tensor::grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

const Buffer& Tensor::grad() const {
  if (!grad_) throw Error("state", "tensor has no gradient");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

}  // namespace cardioprop
