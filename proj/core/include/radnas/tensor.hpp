#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace radnas {

// Fixed 64-byte alignment keeps vectorized kernels on the same summation
// order regardless of where the allocator places a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

// NCHW extents. Vectors are stored as {C,1,1,1} and scalars as {1,1,1,1} so
// that every parameter slices as a prefix along each of the four axes.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool contains(const Shape& inner) const {
    return inner.n <= n && inner.c <= c && inner.h <= h && inner.w <= w;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w +
           w;
  }
  double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const {
    return data_[offset(n, c, h, w)];
  }

  void fill(double v);

  // Copies the leading `extent` block of this tensor into a new tensor.
  Tensor prefix(const Shape& extent) const;
  // Adds `block` into the leading block of this tensor.
  void add_prefix(const Tensor& block);
  // Overwrites the leading block of this tensor with `block`.
  void assign_prefix(const Tensor& block);

  bool all_finite() const;

 private:
  Shape shape_{0, 0, 0, 0};
  AlignedVector data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace radnas
