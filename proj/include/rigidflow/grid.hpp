#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rigidflow/error.hpp"

namespace rigidflow {

/// Row-major H x W image of values.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, const T& fill = T{})
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
    if (rows < 0 || cols < 0) {
      throw Error(ErrorCode::kInvalidArgument, "negative grid extent");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }
  bool contains(int r, int c) const {
    return r >= 0 && c >= 0 && r < rows_ && c < cols_;
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  bool operator==(const Grid&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kShapeMismatch,
                what + " (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace rigidflow
