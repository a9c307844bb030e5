#pragma once

#include <cstddef>
#include <map>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cardioprop {

// 64-byte aligned storage. Eigen picks its vectorised paths from the runtime
// address, so unaligned buffers make results depend on where malloc put them.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major array of doubles with an optional gradient slot.
///
/// Activations use NCHW layout; convolution weights are [out, in, k, k].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, const std::vector<double>& data);
  Tensor(std::vector<int> shape, Buffer data);

  const std::vector<int>& shape() const noexcept { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  Buffer& values() noexcept { return data_; }
  const Buffer& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // NCHW element access; only valid on rank-4 tensors.
  double& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool has_grad() const noexcept { return grad_.has_value(); }
  /// Allocates a zeroed gradient on first use.
  Buffer& grad();
  const Buffer& grad() const;
  void zero_grad();
  void drop_grad() noexcept { grad_.reset(); }

 private:
  std::vector<int> shape_;
  Buffer data_;
  std::optional<Buffer> grad_;
};

std::size_t shape_volume(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

using TensorMap = std::map<std::string, Tensor>;

}  // namespace cardioprop
