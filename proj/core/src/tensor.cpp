#include "radnas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radnas {

std::string Shape::str() const {
  return "[" + std::to_string(n) + "x" + std::to_string(c) + "x" +
         std::to_string(h) + "x" + std::to_string(w) + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), data_(values.begin(), values.end()) {
  if (data_.size() != shape_.numel()) {
    throw std::invalid_argument("Tensor: " + std::to_string(data_.size()) +
                                " values for shape " + shape_.str());
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

namespace {

// Calls fn(src_offset, dst_offset, run_length) for every contiguous row of
// the leading `extent` block of a tensor shaped `full`.
template <typename Fn>
void for_each_prefix_row(const Shape& full, const Shape& extent, Fn&& fn) {
  if (!full.contains(extent)) {
    throw std::invalid_argument("prefix " + extent.str() +
                                " exceeds tensor " + full.str());
  }
  std::size_t dst = 0;
  for (int n = 0; n < extent.n; ++n) {
    for (int c = 0; c < extent.c; ++c) {
      for (int h = 0; h < extent.h; ++h) {
        const std::size_t src =
            ((static_cast<std::size_t>(n) * full.c + c) * full.h + h) * full.w;
        fn(src, dst, static_cast<std::size_t>(extent.w));
        dst += extent.w;
      }
    }
  }
}

}  // namespace

Tensor Tensor::prefix(const Shape& extent) const {
  if (extent == shape_) return *this;
  Tensor out(extent);
  for_each_prefix_row(shape_, extent,
                      [&](std::size_t src, std::size_t dst, std::size_t len) {
                        std::copy_n(data_.data() + src, len, out.data() + dst);
                      });
  return out;
}

void Tensor::add_prefix(const Tensor& block) {
  for_each_prefix_row(shape_, block.shape(),
                      [&](std::size_t dst, std::size_t src, std::size_t len) {
                        for (std::size_t i = 0; i < len; ++i) {
                          data_[dst + i] += block[src + i];
                        }
                      });
}

void Tensor::assign_prefix(const Tensor& block) {
  for_each_prefix_row(shape_, block.shape(),
                      [&](std::size_t dst, std::size_t src, std::size_t len) {
                        std::copy_n(block.data() + src, len, data_.data() + dst);
                      });
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument("max_abs_diff: shape " + a.shape().str() +
                                " vs " + b.shape().str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace radnas
