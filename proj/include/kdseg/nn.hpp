#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kdseg/rng.hpp"

namespace kdseg::nn {

/// Float storage aligned for Eigen's packets. Vectorized kernels pick their
/// peeling from the buffer address, so a fixed alignment keeps results
/// independent of where the heap places a buffer.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Dense NCHW float tensor.
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  FloatBuffer data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  std::size_t size() const { return data.size(); }
  float* sample(int i) { return data.data() + i * sample_size(); }
  const float* sample(int i) const { return data.data() + i * sample_size(); }
  float& at(int i, int ch, int y, int x) { return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x]; }
  float at(int i, int ch, int y, int x) const {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// Trainable array with its accumulated gradient.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  FloatBuffer value;
  FloatBuffer grad;
};

/// Square convolution, stride 1, zero "same" padding (k / 2 on each side).
/// Weight layout is [out][in][k][k].
class Conv2d {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }

  /// He-normal weights, zero bias.
  void initialize(Rng& rng);

  Tensor forward(const Tensor& x) const;
  /// Accumulates weight/bias gradients and returns dL/dx.
  Tensor backward(const Tensor& x, const Tensor& dy);

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

 private:
  int in_;
  int out_;
  int k_;
  Parameter weight_;
  Parameter bias_;
};

void relu_inplace(Tensor& x);
/// dy *= (y > 0), where y is the ReLU output.
void relu_backward(const Tensor& y, Tensor& dy);

/// Inverted dropout. Fills `mask` with 0 or 1/(1-rate) and scales x in place.
void dropout_inplace(Tensor& x, double rate, Rng& rng, std::vector<float>& mask);
void dropout_backward(std::span<const float> mask, Tensor& dy);

/// 2x2 max pooling with stride 2; input sides must be even. `argmax` receives
/// the flat input index of each selected element.
Tensor maxpool2x2(const Tensor& x, std::vector<std::uint32_t>& argmax);
Tensor maxpool2x2_backward(const Tensor& dy, std::span<const std::uint32_t> argmax, const Tensor& x_shape);

/// Parameter-free 2x nearest-neighbour upsampling.
Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& dy);

/// Channel concatenation [a; b] and its inverse split.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, int a_channels, Tensor& da, Tensor& db);

/// Zero-pads bottom/right to (h, w) and crops back.
Tensor pad_to(const Tensor& x, int h, int w);
Tensor crop_to(const Tensor& x, int h, int w);

}  // namespace kdseg::nn
