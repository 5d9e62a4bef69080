#include "vqwave/nn/tensor.hpp"

#include <sys/mman.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <new>
#include <unordered_map>

#include "vqwave/error.hpp"

namespace vqwave::nn {

namespace {

constexpr std::size_t kCacheMinBytes = std::size_t{1} << 18;
constexpr std::size_t kCacheMaxBytes = std::size_t{3} << 30;
constexpr std::size_t kHugePage = std::size_t{1} << 21;
constexpr std::size_t kLineBytes = 64;

struct BlockCache {
  std::mutex mu;
  std::unordered_map<std::size_t, std::vector<void*>> free;
  std::size_t cached = 0;

  ~BlockCache() { clear(); }
  void clear() {
    std::lock_guard lock(mu);
    for (auto& [bytes, blocks] : free)
      for (void* p : blocks) std::free(p);
    free.clear();
    cached = 0;
  }
};

BlockCache& cache() {
  static BlockCache c;
  return c;
}

}  // namespace

namespace detail {

void* acquire_block(std::size_t bytes) {
  if (bytes >= kCacheMinBytes) {
    auto& c = cache();
    std::lock_guard lock(c.mu);
    auto it = c.free.find(bytes);
    if (it != c.free.end() && !it->second.empty()) {
      void* p = it->second.back();
      it->second.pop_back();
      c.cached -= bytes;
      return p;
    }
  }
  if (bytes >= kHugePage) {
    const std::size_t rounded = (bytes + kHugePage - 1) / kHugePage * kHugePage;
    void* p = std::aligned_alloc(kHugePage, rounded);
    if (p == nullptr) throw std::bad_alloc();
    madvise(p, rounded, MADV_HUGEPAGE);
    return p;
  }
  // Every block starts on a cache line. Eigen picks its vectorised loop
  // split from the start address, so a fixed alignment keeps reductions
  // bit-reproducible from run to run.
  const std::size_t rounded = (std::max<std::size_t>(bytes, 1) + kLineBytes - 1) / kLineBytes * kLineBytes;
  void* p = std::aligned_alloc(kLineBytes, rounded);
  if (p == nullptr) throw std::bad_alloc();
  return p;
}

void release_block(void* p, std::size_t bytes) noexcept {
  if (p == nullptr) return;
  if (bytes >= kCacheMinBytes) {
    auto& c = cache();
    std::lock_guard lock(c.mu);
    if (c.cached + bytes <= kCacheMaxBytes) {
      try {
        c.free[bytes].push_back(p);
        c.cached += bytes;
        return;
      } catch (...) {
      }
    }
  }
  std::free(p);
}

}  // namespace detail

std::size_t cached_block_bytes() {
  std::lock_guard lock(cache().mu);
  return cache().cached;
}

void release_cached_blocks() { cache().clear(); }

namespace {

std::size_t element_count(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw invalid_input("negative tensor dimension");
    n *= d;
  }
  return static_cast<std::size_t>(n);
}
}  // namespace

Tensor::Tensor(Shape shape, Scalar fill) : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<Scalar> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (values_.size() != element_count(shape_)) {
    throw invalid_input("tensor value count " + std::to_string(values_.size()) + " does not match shape " +
                        shape_to_string(shape_));
  }
}

Tensor Tensor::from_matrix(const Matrix& m) {
  Tensor t = matrix(m.rows(), m.cols());
  t.mat() = m;
  return t;
}

void Tensor::fill(Scalar v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](Scalar v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const { return shape_to_string(shape_); }

void Tensor::clear() {
  decltype(values_)().swap(values_);
  shape_.clear();
}

std::string shape_to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace vqwave::nn
