#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vqwave::nn {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using Shape = std::vector<std::int64_t>;

namespace detail {
void* acquire_block(std::size_t bytes);
void release_block(void* p, std::size_t bytes) noexcept;
}  // namespace detail

/// Allocator for tensor storage. Large blocks are recycled by exact size:
/// training allocates the same shapes every step, and reusing them avoids
/// faulting fresh pages in each time.
template <class T>
struct BlockAllocator {
  using value_type = T;
  BlockAllocator() = default;
  template <class U>
  BlockAllocator(const BlockAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(detail::acquire_block(n * sizeof(T))); }
  void deallocate(T* p, std::size_t n) noexcept { detail::release_block(p, n * sizeof(T)); }
  template <class U>
  bool operator==(const BlockAllocator<U>&) const noexcept { return true; }
};

/// Scratch vector on the tensor allocator (cache-line aligned).
using ScalarVector = std::vector<Scalar, BlockAllocator<Scalar>>;

/// Bytes currently parked in the tensor block cache.
std::size_t cached_block_bytes();
/// Frees every cached block.
void release_cached_blocks();

/// Dense row-major tensor. Most of the engine treats it as a 2-D matrix whose
/// column count is the last dimension.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = 0);
  Tensor(Shape shape, std::vector<Scalar> values);
  static Tensor matrix(std::int64_t rows, std::int64_t cols, Scalar fill = 0) { return Tensor({rows, cols}, fill); }
  static Tensor from_matrix(const Matrix& m);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::int64_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  std::int64_t rows() const { return cols() == 0 ? 0 : static_cast<std::int64_t>(size()) / cols(); }

  std::span<Scalar> values() { return values_; }
  std::span<const Scalar> values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }
  Scalar& operator[](std::size_t i) { return values_[i]; }
  Scalar operator[](std::size_t i) const { return values_[i]; }
  Scalar& at(std::int64_t r, std::int64_t c) { return values_[static_cast<std::size_t>(r * cols() + c)]; }
  Scalar at(std::int64_t r, std::int64_t c) const { return values_[static_cast<std::size_t>(r * cols() + c)]; }
  std::span<Scalar> row(std::int64_t r) { return {values_.data() + r * cols(), static_cast<std::size_t>(cols())}; }
  std::span<const Scalar> row(std::int64_t r) const {
    return {values_.data() + r * cols(), static_cast<std::size_t>(cols())};
  }

  MatrixMap mat() { return {values_.data(), rows(), cols()}; }
  ConstMatrixMap mat() const { return {values_.data(), rows(), cols()}; }

  void fill(Scalar v);
  bool all_finite() const;
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_string() const;

  /// Releases storage; the tensor becomes empty.
  void clear();

 private:
  Shape shape_;
  std::vector<Scalar, BlockAllocator<Scalar>> values_;
};

std::string shape_to_string(const Shape& s);

}  // namespace vqwave::nn
