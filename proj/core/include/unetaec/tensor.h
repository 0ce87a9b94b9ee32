#ifndef UNETAEC_TENSOR_H_
#define UNETAEC_TENSOR_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "unetaec/common.h"

namespace unetaec {

// Feature map indexed (freq, time, channel). Storage is planar: each channel
// is a contiguous freq x time plane, laid out like a Grid.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t freq, std::size_t time, std::size_t channels,
         T fill = T{})
      : freq_(freq),
        time_(time),
        channels_(channels),
        data_(freq * time * channels, fill) {}

  std::size_t freq() const { return freq_; }
  std::size_t time() const { return time_; }
  std::size_t channels() const { return channels_; }
  std::size_t plane_size() const { return freq_ * time_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t f, std::size_t t, std::size_t c) {
    return data_[(c * freq_ + f) * time_ + t];
  }
  const T& operator()(std::size_t f, std::size_t t, std::size_t c) const {
    return data_[(c * freq_ + f) * time_ + t];
  }

  std::span<T> plane(std::size_t c) {
    return std::span<T>(data_).subspan(c * plane_size(), plane_size());
  }
  std::span<const T> plane(std::size_t c) const {
    return std::span<const T>(data_).subspan(c * plane_size(), plane_size());
  }

  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool SameShape(const Tensor& other) const {
    return freq_ == other.freq_ && time_ == other.time_ &&
           channels_ == other.channels_;
  }

  // Reshapes without releasing capacity; contents are unspecified unless
  // `fill` is requested.
  void Resize(std::size_t freq, std::size_t time, std::size_t channels) {
    freq_ = freq;
    time_ = time;
    channels_ = channels;
    data_.resize(freq * time * channels);
  }
  void Fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool AllFinite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t freq_ = 0;
  std::size_t time_ = 0;
  std::size_t channels_ = 0;
  std::vector<T> data_;
};

}  // namespace unetaec

#endif  // UNETAEC_TENSOR_H_
