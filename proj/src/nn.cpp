#include "kdseg/nn.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "kdseg/errors.hpp"

namespace kdseg::nn {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXf>;

// cols has (c * k * k) rows and (h * w) columns.
void im2col(const float* x, int c, int h, int w, int k, float* cols) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = x + ch * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = cols + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * hw;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          float* out = row + static_cast<std::size_t>(y) * w;
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h || x_lo >= x_hi) {
            std::fill(out, out + w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(sy) * w;
          std::fill(out, out + x_lo, 0.0f);
          std::copy(src + x_lo + dx, src + x_hi + dx, out + x_lo);
          std::fill(out + x_hi, out + w, 0.0f);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds cols back into dx.
void col2im(const float* cols, int c, int h, int w, int k, float* dx) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    float* plane = dx + ch * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = cols + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * hw;
        const int dxo = kx - pad;
        const int x_lo = std::max(0, -dxo);
        const int x_hi = std::min(w, w - dxo);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const float* in = row + static_cast<std::size_t>(y) * w;
          float* dst = plane + static_cast<std::size_t>(sy) * w;
          for (int x = x_lo; x < x_hi; ++x) dst[x + dxo] += in[x];
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel)
    : in_(in_channels), out_(out_channels), k_(kernel) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("invalid convolution geometry for " + name);
  }
  const std::size_t wsize = static_cast<std::size_t>(out_) * in_ * k_ * k_;
  weight_ = Parameter{name + ".weight", {out_, in_, k_, k_}, FloatBuffer(wsize, 0.0f), FloatBuffer(wsize, 0.0f)};
  bias_ = Parameter{name + ".bias", {out_}, FloatBuffer(out_, 0.0f), FloatBuffer(out_, 0.0f)};
}

void Conv2d::initialize(Rng& rng) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_) * k_ * k_));
  for (auto& v : weight_.value) v = static_cast<float>(stddev * standard_normal(rng));
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.c != in_) {
    throw DimensionError(weight_.name + ": expected " + std::to_string(in_) + " input channels, got " +
                         std::to_string(x.c));
  }
  Tensor y(x.n, out_, x.h, x.w);
  const int hw = x.h * x.w;
  const int patch = in_ * k_ * k_;
  ConstMatrixMap weights(weight_.value.data(), out_, patch);
  Eigen::Map<const Eigen::VectorXf> bias(bias_.value.data(), out_);
  FloatBuffer cols(k_ == 1 ? 0 : static_cast<std::size_t>(patch) * hw);
  for (int i = 0; i < x.n; ++i) {
    const float* src = x.sample(i);
    if (k_ != 1) {
      im2col(src, in_, x.h, x.w, k_, cols.data());
      src = cols.data();
    }
    MatrixMap out(y.sample(i), out_, hw);
    out.noalias() = weights * ConstMatrixMap(src, patch, hw);
    out.colwise() += bias;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy) {
  if (dy.c != out_ || dy.n != x.n || dy.h != x.h || dy.w != x.w) {
    throw DimensionError(weight_.name + ": gradient shape mismatch");
  }
  Tensor dx(x.n, in_, x.h, x.w);
  const int hw = x.h * x.w;
  const int patch = in_ * k_ * k_;
  ConstMatrixMap weights(weight_.value.data(), out_, patch);
  MatrixMap dweights(weight_.grad.data(), out_, patch);
  VectorMap dbias(bias_.grad.data(), out_);
  FloatBuffer cols(k_ == 1 ? 0 : static_cast<std::size_t>(patch) * hw);
  FloatBuffer dcols(k_ == 1 ? 0 : static_cast<std::size_t>(patch) * hw);
  for (int i = 0; i < x.n; ++i) {
    const float* src = x.sample(i);
    if (k_ != 1) {
      im2col(src, in_, x.h, x.w, k_, cols.data());
      src = cols.data();
    }
    ConstMatrixMap grad_out(dy.sample(i), out_, hw);
    dweights.noalias() += grad_out * ConstMatrixMap(src, patch, hw).transpose();
    for (int o = 0; o < out_; ++o) {
      const float* g = dy.sample(i) + static_cast<std::size_t>(o) * hw;
      double total = 0.0;
      for (int j = 0; j < hw; ++j) total += g[j];
      dbias[o] += static_cast<float>(total);
    }
    if (k_ == 1) {
      MatrixMap(dx.sample(i), patch, hw).noalias() = weights.transpose() * grad_out;
    } else {
      MatrixMap(dcols.data(), patch, hw).noalias() = weights.transpose() * grad_out;
      col2im(dcols.data(), in_, x.h, x.w, k_, dx.sample(i));
    }
  }
  return dx;
}

void relu_inplace(Tensor& x) {
  for (auto& v : x.data) v = v < 0.0f ? 0.0f : v;  // NaN passes through
}

void relu_backward(const Tensor& y, Tensor& dy) {
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    if (!(y.data[i] > 0.0f)) dy.data[i] = 0.0f;
  }
}

void dropout_inplace(Tensor& x, double rate, Rng& rng, std::vector<float>& mask) {
  mask.assign(x.size(), 0.0f);
  const float keep_scale = static_cast<float>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = uniform01(rng) < rate ? 0.0f : keep_scale;
    x.data[i] *= mask[i];
  }
}

void dropout_backward(std::span<const float> mask, Tensor& dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) dy.data[i] *= mask[i];
}

Tensor maxpool2x2(const Tensor& x, std::vector<std::uint32_t>& argmax) {
  if (x.h % 2 != 0 || x.w % 2 != 0) throw DimensionError("maxpool2x2 needs even spatial sides");
  Tensor y(x.n, x.c, x.h / 2, x.w / 2);
  argmax.resize(y.size());
  std::size_t o = 0;
  for (int i = 0; i < x.n; ++i) {
    for (int ch = 0; ch < x.c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(i) * x.c + ch) * x.plane();
      for (int yy = 0; yy < y.h; ++yy) {
        for (int xx = 0; xx < y.w; ++xx, ++o) {
          std::size_t best = base + static_cast<std::size_t>(2 * yy) * x.w + 2 * xx;
          const std::size_t cand[3] = {best + 1, best + x.w, best + x.w + 1};
          for (auto c : cand) {
            if (x.data[c] > x.data[best]) best = c;
          }
          y.data[o] = x.data[best];
          argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return y;
}

Tensor maxpool2x2_backward(const Tensor& dy, std::span<const std::uint32_t> argmax, const Tensor& x_shape) {
  Tensor dx(x_shape.n, x_shape.c, x_shape.h, x_shape.w);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax[o]] += dy.data[o];
  return dx;
}

Tensor upsample2x(const Tensor& x) {
  Tensor y(x.n, x.c, x.h * 2, x.w * 2);
  for (int p = 0; p < x.n * x.c; ++p) {
    const float* src = x.data.data() + p * x.plane();
    float* dst = y.data.data() + p * y.plane();
    for (int yy = 0; yy < y.h; ++yy) {
      const float* srow = src + static_cast<std::size_t>(yy / 2) * x.w;
      float* drow = dst + static_cast<std::size_t>(yy) * y.w;
      for (int xx = 0; xx < y.w; ++xx) drow[xx] = srow[xx / 2];
    }
  }
  return y;
}

Tensor upsample2x_backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
  for (int p = 0; p < dy.n * dy.c; ++p) {
    const float* src = dy.data.data() + p * dy.plane();
    float* dst = dx.data.data() + p * dx.plane();
    for (int yy = 0; yy < dy.h; ++yy) {
      const float* srow = src + static_cast<std::size_t>(yy) * dy.w;
      float* drow = dst + static_cast<std::size_t>(yy / 2) * dx.w;
      for (int xx = 0; xx < dy.w; ++xx) drow[xx / 2] += srow[xx];
    }
  }
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw DimensionError("concat_channels: shape mismatch");
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::copy(a.sample(i), a.sample(i) + a.sample_size(), y.sample(i));
    std::copy(b.sample(i), b.sample(i) + b.sample_size(), y.sample(i) + a.sample_size());
  }
  return y;
}

void split_channels(const Tensor& d, int a_channels, Tensor& da, Tensor& db) {
  da = Tensor(d.n, a_channels, d.h, d.w);
  db = Tensor(d.n, d.c - a_channels, d.h, d.w);
  for (int i = 0; i < d.n; ++i) {
    const float* src = d.sample(i);
    std::copy(src, src + da.sample_size(), da.sample(i));
    std::copy(src + da.sample_size(), src + d.sample_size(), db.sample(i));
  }
}

Tensor pad_to(const Tensor& x, int h, int w) {
  if (h == x.h && w == x.w) return x;
  Tensor y(x.n, x.c, h, w);
  for (int p = 0; p < x.n * x.c; ++p) {
    for (int yy = 0; yy < x.h; ++yy) {
      const float* src = x.data.data() + p * x.plane() + static_cast<std::size_t>(yy) * x.w;
      std::copy(src, src + x.w, y.data.data() + p * y.plane() + static_cast<std::size_t>(yy) * w);
    }
  }
  return y;
}

Tensor crop_to(const Tensor& x, int h, int w) {
  if (h == x.h && w == x.w) return x;
  Tensor y(x.n, x.c, h, w);
  for (int p = 0; p < x.n * x.c; ++p) {
    for (int yy = 0; yy < h; ++yy) {
      const float* src = x.data.data() + p * x.plane() + static_cast<std::size_t>(yy) * x.w;
      std::copy(src, src + w, y.data.data() + p * y.plane() + static_cast<std::size_t>(yy) * w);
    }
  }
  return y;
}

}  // namespace kdseg::nn
