#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kdseg/image.hpp"
#include "kdseg/nn.hpp"
#include "kdseg/rng.hpp"

namespace kdseg {

/// Layerwise dropout rates: encoder 0.1, 0.2, ..., 0.1 * depth, bottleneck
/// 0.1 * (depth + 1), decoder mirrored. A schedule that would pass 0.9
/// (depth > 8) is a ConfigError; deeper models need explicit rates.
std::vector<double> dropout_schedule(int depth);

/// Declarative U-Net layout.
struct UNetSpec {
  int depth = 4;
  int base_channels = 16;
  int in_channels = 3;
  int out_channels = 1;
  /// Empty means dropout_schedule(depth). Otherwise 2 * depth + 1 entries.
  std::vector<double> dropout_rates;
  /// Permits explicit rates above 0.9.
  bool allow_high_dropout = false;

  void validate() const;
  std::vector<double> rates() const;
  /// 2 * (2 * depth + 1)
  int expected_conv3x3() const { return 2 * (2 * depth + 1); }
  /// Encoder width at `level`; level == depth is the bottleneck.
  int channels_at(int level) const { return base_channels << level; }
  /// Spatial sides are padded up to a multiple of this.
  int size_multiple() const { return 1 << depth; }

  bool operator==(const UNetSpec&) const = default;
};

/// The student network.
///
/// Encoder blocks are conv3x3-ReLU-conv3x3-ReLU-dropout followed by 2x2 max
/// pooling with stride 2; the bottleneck is one such block without pooling.
/// Decoder blocks upsample 2x (nearest), concatenate the matching encoder
/// output and apply the same conv-conv-dropout block. A 1x1 convolution and a
/// sigmoid produce the foreground probability. Inputs are zero-padded
/// (bottom/right) to a multiple of 2^depth and the output is cropped back.
///
/// Parameter mutation is single-threaded; forward on a frozen model from
/// several threads is safe only with record_for_backward = false and
/// training mode off.
class StudentModel {
 public:
  StudentModel(UNetSpec spec, std::uint64_t seed);

  const UNetSpec& spec() const { return spec_; }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }
  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  /// Input N x in_channels x H x W. Returns N * H * W probabilities
  /// (sample-major, row-major). With record_for_backward the activations are
  /// kept for the next backward() call.
  std::vector<double> forward(const nn::Tensor& input, bool record_for_backward = false);

  /// Accumulates parameter gradients given dL/dprob for the recorded forward.
  void backward(std::span<const double> dprob);

  void zero_grad();

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t parameter_count() const;

  /// Counts obtained by walking the built layer list.
  int conv_count(int kernel) const;

  /// Batch helpers over patches of one shape.
  std::vector<ProbMap> predict(std::span<const ImagePatch> batch);
  ProbMap predict(const ImagePatch& patch);

 private:
  struct BlockCache {
    nn::Tensor in;
    nn::Tensor a;  // after the first conv + ReLU
    nn::Tensor b;  // after the second conv + ReLU
    std::vector<float> mask;
    nn::Tensor out;
  };

  struct Cache {
    int height = 0;
    int width = 0;
    std::vector<BlockCache> encoder;
    std::vector<std::vector<std::uint32_t>> pool_argmax;
    BlockCache bottleneck;
    std::vector<BlockCache> decoder;  // indexed by level
    std::vector<double> probs;        // padded N x Hp x Wp
    bool valid = false;
  };

  BlockCache run_block(nn::Conv2d& first, nn::Conv2d& second, nn::Tensor in, double rate);
  nn::Tensor block_backward(nn::Conv2d& first, nn::Conv2d& second, const BlockCache& cache, nn::Tensor dout);
  nn::Conv2d& encoder_conv(int level, int which) { return convs_[2 * level + which]; }
  nn::Conv2d& decoder_conv(int level, int which) { return convs_[2 * spec_.depth + 2 + 2 * level + which]; }

  UNetSpec spec_;
  std::vector<double> rates_;
  std::vector<nn::Conv2d> convs_;  // encoder, bottleneck, decoder (by level), head
  bool training_ = false;
  Rng dropout_rng_;
  Cache cache_;
};

/// Random initialization (He-normal weights, zero biases) from `seed`.
StudentModel build_student(const UNetSpec& spec, std::uint64_t seed);

/// Stacks patches of identical shape into an N x C x H x W tensor.
nn::Tensor stack_patches(std::span<const ImagePatch> batch);

}  // namespace kdseg
