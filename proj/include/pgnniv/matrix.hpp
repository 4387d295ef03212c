#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "pgnniv/errors.hpp"

namespace pgnniv {

namespace detail {

// Training rebuilds hundreds of small matrices per step; recycling buffers by
// power-of-two size class keeps the allocator out of the profile.
class BufferPool {
 public:
  static constexpr std::size_t kClasses = 21;  // up to 2^20 doubles

  ~BufferPool() {
    for (auto& list : free_)
      for (double* p : list) ::operator delete(p);
  }

  static std::size_t size_class(std::size_t n) { return std::bit_width(std::max<std::size_t>(n, 4) - 1); }

  double* take(std::size_t n) {
    const std::size_t c = size_class(n);
    if (c >= kClasses) return static_cast<double*>(::operator new(n * sizeof(double)));
    auto& list = free_[c];
    if (!list.empty()) {
      double* p = list.back();
      list.pop_back();
      return p;
    }
    return static_cast<double*>(::operator new((std::size_t{1} << c) * sizeof(double)));
  }

  void give(double* p, std::size_t n) {
    const std::size_t c = size_class(n);
    if (c >= kClasses) {
      ::operator delete(p);
      return;
    }
    free_[c].push_back(p);
  }

  /// Null once the calling thread's pool has been torn down (static
  /// destructors running after thread-local ones); callers then use the heap.
  static BufferPool* local() {
    struct Holder {
      BufferPool pool;
      bool alive = true;
      ~Holder() { alive = false; }
    };
    thread_local Holder holder;
    return holder.alive ? &holder.pool : nullptr;
  }

 private:
  std::vector<double*> free_[kClasses];
};

template <typename T>
struct PoolAllocator {
  using value_type = T;
  PoolAllocator() = default;
  template <typename U>
  PoolAllocator(const PoolAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    if (BufferPool* pool = BufferPool::local()) return pool->take(n);
    return static_cast<T*>(::operator new(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    if (BufferPool* pool = BufferPool::local()) return pool->give(p, n);
    ::operator delete(p);
  }
  friend bool operator==(const PoolAllocator&, const PoolAllocator&) { return true; }
};

}  // namespace detail

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

/// Dense row-major matrix of doubles. Rows index samples, columns index neurons.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape_{rows, cols}, data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    shape_.rows = rows.size();
    shape_.cols = rows.size() == 0 ? 0 : rows.begin()->size();
    data_.reserve(shape_.size());
    for (const auto& r : rows) {
      if (r.size() != shape_.cols) throw ShapeError("ragged matrix initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix column(std::span<const double> values) {
    Matrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
  }
  static Matrix row(std::span<const double> values) {
    Matrix m(1, values.size());
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
  }

  Shape shape() const noexcept { return shape_; }
  std::size_t rows() const noexcept { return shape_.rows; }
  std::size_t cols() const noexcept { return shape_.cols; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * shape_.cols, shape_.cols);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  /// Copies values from `other` without allowing the shape to change.
  void assign(const Matrix& other) {
    if (other.shape_ != shape_) {
      throw ShapeError("cannot assign " + to_string(other.shape_) + " into " + to_string(shape_));
    }
    data_ = other.data_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  Shape shape_;
  std::vector<double, detail::PoolAllocator<double>> data_;
};

/// out = a * b (accumulating when `accumulate`). Loop order keeps the inner loop contiguous.
inline void gemm(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (!accumulate) out.fill(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += aip * b(p, j);
    }
  }
}

/// out += a * b^T
inline void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a(i, p) * b(j, p);
      out(i, j) += acc;
    }
  }
}

/// out += a^T * b
inline void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(p, j) += aip * b(i, j);
    }
  }
}

}  // namespace pgnniv
