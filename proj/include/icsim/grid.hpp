#pragma once

#include <cstddef>
#include <vector>

#include "icsim/errors.hpp"

namespace icsim {

/// Dense row-major 2-D grid. x indexes columns, y indexes rows.
template <typename T>
class Grid {
public:
  Grid() = default;

  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw ConfigError("grid dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

}  // namespace icsim
