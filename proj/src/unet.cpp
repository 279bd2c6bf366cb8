#include "kdseg/unet.hpp"

#include <cmath>
#include <string>

#include "kdseg/errors.hpp"

namespace kdseg {

using nn::Tensor;

std::vector<double> dropout_schedule(int depth) {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (depth + 1 > 9) {
    throw ConfigError("dropout schedule exceeds 0.9 at depth " + std::to_string(depth) +
                      "; pass explicit dropout_rates (rates above 0.9 also need allow_high_dropout)");
  }
  std::vector<double> rates;
  for (int i = 1; i <= depth + 1; ++i) rates.push_back(i / 10.0);
  for (int i = depth; i >= 1; --i) rates.push_back(i / 10.0);
  return rates;
}

void UNetSpec::validate() const {
  if (depth < 1) throw ConfigError("model depth must be >= 1");
  if (depth > 12) throw ConfigError("model depth is unreasonably large");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (in_channels != 1 && in_channels != 3) throw ConfigError("in_channels must be 1 or 3");
  if (out_channels != 1) throw ConfigError("out_channels must be 1");
  if (!dropout_rates.empty()) {
    if (dropout_rates.size() != static_cast<std::size_t>(2 * depth + 1)) {
      throw ConfigError("dropout_rates needs 2 * depth + 1 entries");
    }
    for (double r : dropout_rates) {
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must lie in [0,1)");
      if (r > 0.9 + 1e-12 && !allow_high_dropout) {
        throw ConfigError("dropout rate above 0.9; set allow_high_dropout to override");
      }
    }
  } else {
    (void)dropout_schedule(depth);
  }
}

std::vector<double> UNetSpec::rates() const {
  return dropout_rates.empty() ? dropout_schedule(depth) : dropout_rates;
}

StudentModel::StudentModel(UNetSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  rates_ = spec_.rates();
  const int d = spec_.depth;
  convs_.reserve(4 * d + 3);
  int in = spec_.in_channels;
  for (int level = 0; level < d; ++level) {
    const int out = spec_.channels_at(level);
    convs_.emplace_back("enc" + std::to_string(level) + ".conv0", in, out, 3);
    convs_.emplace_back("enc" + std::to_string(level) + ".conv1", out, out, 3);
    in = out;
  }
  convs_.emplace_back("bottleneck.conv0", in, spec_.channels_at(d), 3);
  convs_.emplace_back("bottleneck.conv1", spec_.channels_at(d), spec_.channels_at(d), 3);
  for (int level = 0; level < d; ++level) {
    const int out = spec_.channels_at(level);
    const int cat = spec_.channels_at(level + 1) + out;
    convs_.emplace_back("dec" + std::to_string(level) + ".conv0", cat, out, 3);
    convs_.emplace_back("dec" + std::to_string(level) + ".conv1", out, out, 3);
  }
  convs_.emplace_back("head", spec_.channels_at(0), spec_.out_channels, 1);

  Rng rng(seed);
  for (auto& conv : convs_) conv.initialize(rng);
  dropout_rng_.seed(mix_seed(seed, 0xd20f));
}

StudentModel::BlockCache StudentModel::run_block(nn::Conv2d& first, nn::Conv2d& second, Tensor in, double rate) {
  BlockCache c;
  c.in = std::move(in);
  c.a = first.forward(c.in);
  nn::relu_inplace(c.a);
  c.b = second.forward(c.a);
  nn::relu_inplace(c.b);
  c.out = c.b;
  if (training_ && rate > 0.0) nn::dropout_inplace(c.out, rate, dropout_rng_, c.mask);
  return c;
}

Tensor StudentModel::block_backward(nn::Conv2d& first, nn::Conv2d& second, const BlockCache& c, Tensor dout) {
  if (!c.mask.empty()) nn::dropout_backward(c.mask, dout);
  nn::relu_backward(c.b, dout);
  Tensor da = second.backward(c.a, dout);
  nn::relu_backward(c.a, da);
  return first.backward(c.in, da);
}

std::vector<double> StudentModel::forward(const Tensor& input, bool record) {
  if (input.c != spec_.in_channels) {
    throw DimensionError("model expects " + std::to_string(spec_.in_channels) + " input channels, got " +
                         std::to_string(input.c));
  }
  if (input.n < 1 || input.h < 1 || input.w < 1) throw DimensionError("empty input batch");
  const int d = spec_.depth;
  const int m = spec_.size_multiple();
  const int hp = (input.h + m - 1) / m * m;
  const int wp = (input.w + m - 1) / m * m;

  Cache cache;
  cache.height = input.h;
  cache.width = input.w;
  cache.encoder.resize(d);
  cache.pool_argmax.resize(d);
  cache.decoder.resize(d);

  Tensor x = nn::pad_to(input, hp, wp);
  for (int level = 0; level < d; ++level) {
    cache.encoder[level] = run_block(encoder_conv(level, 0), encoder_conv(level, 1), std::move(x), rates_[level]);
    x = nn::maxpool2x2(cache.encoder[level].out, cache.pool_argmax[level]);
  }
  cache.bottleneck = run_block(encoder_conv(d, 0), encoder_conv(d, 1), std::move(x), rates_[d]);
  const Tensor* deeper = &cache.bottleneck.out;
  for (int level = d - 1; level >= 0; --level) {
    Tensor cat = nn::concat_channels(nn::upsample2x(*deeper), cache.encoder[level].out);
    cache.decoder[level] =
        run_block(decoder_conv(level, 0), decoder_conv(level, 1), std::move(cat), rates_[2 * d - level]);
    deeper = &cache.decoder[level].out;
  }
  const Tensor logits = convs_.back().forward(*deeper);

  cache.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    cache.probs[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(logits.data[i])));
  }
  std::vector<double> out(static_cast<std::size_t>(input.n) * input.h * input.w);
  for (int i = 0; i < input.n; ++i) {
    for (int y = 0; y < input.h; ++y) {
      const double* src = cache.probs.data() + (static_cast<std::size_t>(i) * hp + y) * wp;
      std::copy(src, src + input.w, out.data() + (static_cast<std::size_t>(i) * input.h + y) * input.w);
    }
  }
  if (record) {
    cache.valid = true;
    cache_ = std::move(cache);
  } else {
    cache_ = Cache{};
  }
  return out;
}

void StudentModel::backward(std::span<const double> dprob) {
  if (!cache_.valid) throw TrainingError("backward() without a recorded forward pass");
  const int d = spec_.depth;
  const Tensor& top = cache_.decoder[0].out;
  const int n = top.n;
  const int h = cache_.height;
  const int w = cache_.width;
  if (dprob.size() != static_cast<std::size_t>(n) * h * w) throw DimensionError("backward: gradient size mismatch");

  Tensor dlogits(n, 1, top.h, top.w);
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t padded = (static_cast<std::size_t>(i) * top.h + y) * top.w + x;
        const double p = cache_.probs[padded];
        const double g = dprob[(static_cast<std::size_t>(i) * h + y) * w + x];
        dlogits.data[padded] = static_cast<float>(g * p * (1.0 - p));
      }
    }
  }
  Tensor dx = convs_.back().backward(top, dlogits);
  std::vector<Tensor> dskip(d);
  for (int level = 0; level < d; ++level) {
    Tensor dcat = block_backward(decoder_conv(level, 0), decoder_conv(level, 1), cache_.decoder[level], std::move(dx));
    Tensor dup;
    nn::split_channels(dcat, spec_.channels_at(level + 1), dup, dskip[level]);
    dx = nn::upsample2x_backward(dup);
  }
  dx = block_backward(encoder_conv(d, 0), encoder_conv(d, 1), cache_.bottleneck, std::move(dx));
  for (int level = d - 1; level >= 0; --level) {
    Tensor dout = nn::maxpool2x2_backward(dx, cache_.pool_argmax[level], cache_.encoder[level].out);
    for (std::size_t i = 0; i < dout.size(); ++i) dout.data[i] += dskip[level].data[i];
    dx = block_backward(encoder_conv(level, 0), encoder_conv(level, 1), cache_.encoder[level], std::move(dout));
  }
  cache_.valid = false;
}

void StudentModel::zero_grad() {
  for (auto* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::vector<nn::Parameter*> StudentModel::parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& conv : convs_) {
    out.push_back(&conv.weight());
    out.push_back(&conv.bias());
  }
  return out;
}

std::vector<const nn::Parameter*> StudentModel::parameters() const {
  std::vector<const nn::Parameter*> out;
  for (const auto& conv : convs_) {
    out.push_back(&conv.weight());
    out.push_back(&conv.bias());
  }
  return out;
}

std::size_t StudentModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

int StudentModel::conv_count(int kernel) const {
  int n = 0;
  for (const auto& conv : convs_) n += conv.kernel() == kernel ? 1 : 0;
  return n;
}

std::vector<ProbMap> StudentModel::predict(std::span<const ImagePatch> batch) {
  const Tensor input = stack_patches(batch);
  const auto probs = forward(input);
  std::vector<ProbMap> out;
  const std::size_t plane = static_cast<std::size_t>(input.h) * input.w;
  for (int i = 0; i < input.n; ++i) {
    ProbMap map(batch[i].id, input.h, input.w);
    std::copy(probs.begin() + i * plane, probs.begin() + (i + 1) * plane, map.values.begin());
    out.push_back(std::move(map));
  }
  return out;
}

ProbMap StudentModel::predict(const ImagePatch& patch) {
  return predict(std::span<const ImagePatch>(&patch, 1)).front();
}

StudentModel build_student(const UNetSpec& spec, std::uint64_t seed) { return StudentModel(spec, seed); }

Tensor stack_patches(std::span<const ImagePatch> batch) {
  if (batch.empty()) throw DimensionError("empty batch");
  const auto& first = batch.front();
  Tensor t(static_cast<int>(batch.size()), first.channels, first.height, first.width);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i];
    if (p.channels != first.channels || p.height != first.height || p.width != first.width) {
      throw DimensionError("batch patches must share one shape; '" + p.id + "' differs");
    }
    std::copy(p.pixels.begin(), p.pixels.end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

}  // namespace kdseg
