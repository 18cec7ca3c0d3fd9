#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dkrg::nn {

/// Allocates on 64-byte boundaries. Vectorized kernels pick their loop
/// peeling from the buffer address, so a fixed alignment keeps results
/// independent of where the heap happens to place an array.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

/// Dense NCHW array.
template <typename T>
class Array4 {
 public:
  using value_type = T;
  using Storage = std::vector<T, AlignedAllocator<T>>;

  Array4() = default;
  Array4(int n, int c, int h, int w, T fill = T(0)) : dims_{n, c, h, w} {
    for (int d : dims_) {
      if (d < 0) throw std::invalid_argument("Array4: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }
  explicit Array4(std::array<int, 4> dims, T fill = T(0))
      : Array4(dims[0], dims[1], dims[2], dims[3], fill) {}

  int n() const { return dims_[0]; }
  int c() const { return dims_[1]; }
  int h() const { return dims_[2]; }
  int w() const { return dims_[3]; }
  const std::array<int, 4>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Elements per (n, c) plane.
  std::size_t plane() const { return static_cast<std::size_t>(dims_[2]) * dims_[3]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T& operator()(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  T operator()(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + y) * dims_[3] + x;
  }

  bool same_shape(const Array4& other) const { return dims_ == other.dims_; }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_string() const {
    return "(" + std::to_string(dims_[0]) + ", " + std::to_string(dims_[1]) + ", " +
           std::to_string(dims_[2]) + ", " + std::to_string(dims_[3]) + ")";
  }

  template <typename U>
  Array4<U> cast() const {
    Array4<U> out(dims_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Array4&, const Array4&) = default;

 private:
  std::array<int, 4> dims_{0, 0, 0, 0};
  Storage data_;
};

}  // namespace dkrg::nn
