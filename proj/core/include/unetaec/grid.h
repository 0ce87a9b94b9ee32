#ifndef UNETAEC_GRID_H_
#define UNETAEC_GRID_H_

#include <cstddef>
#include <span>
#include <vector>

#include "unetaec/common.h"

namespace unetaec {

// Dense 2-D time-frequency grid stored bin-major: element (bin, frame) lives
// at bin * frames + frame.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t bins, std::size_t frames, T fill = T{})
      : bins_(bins), frames_(frames), data_(bins * frames, fill) {}

  std::size_t bins() const { return bins_; }
  std::size_t frames() const { return frames_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t bin, std::size_t frame) {
    return data_[bin * frames_ + frame];
  }
  const T& operator()(std::size_t bin, std::size_t frame) const {
    return data_[bin * frames_ + frame];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool SameShape(const Grid& other) const {
    return bins_ == other.bins_ && frames_ == other.frames_;
  }

  void Resize(std::size_t bins, std::size_t frames) {
    bins_ = bins;
    frames_ = frames;
    data_.assign(bins * frames, T{});
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t bins_ = 0;
  std::size_t frames_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;

}  // namespace unetaec

#endif  // UNETAEC_GRID_H_
