#ifndef RMP_NETWORK_HPP_
#define RMP_NETWORK_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmp/autodiff.hpp"
#include "rmp/checkpoint.hpp"
#include "rmp/image.hpp"
#include "rmp/quantizer.hpp"

namespace rmp {

struct ModelConfig {
  std::string encoder_variant = "multiscale";  // "multiscale" | "convpool"
  int base_channels = 16;                      // F
  int lstm_hidden = 32;
  int kernel = 3;
  int q_classes = 25;
  int n_inputs = 5;
  int t_max = 5;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;

  // Conv-pool first-stage width chosen so both encoder variants match in
  // parameter count (within a few tenths of a percent).
  int convpool_c1() const;
};

struct ConvParam {
  Value k, b;
};

struct MsBlockParams {
  ConvParam full, medium, low, fuse;
};

struct LstmParams {
  // input-to-hidden (with gate bias) and hidden-to-hidden kernels
  ConvParam xi, xf, xo, xg;
  Value hi, hf, ho, hg;
};

// Parallel full/medium/low resolution branches fused to F channels:
// conv+relu at native scale, pooled once and twice for the coarser branches,
// bilinearly upsampled back, channel-concatenated, then a 1x1 fusion conv.
Value ms_block(Value x, const MsBlockParams& p);

// Standard ConvLSTM gates, 3x3 same-padded convolutions:
// i = sig(Wxi*x + Whi*h + bi),  f = sig(Wxf*x + Whf*h + bf)
// o = sig(Wxo*x + Who*h + bo),  g = tanh(Wxg*x + Whg*h + bg)
// c' = f.c + i.g,  h' = o.tanh(c')
std::pair<Value, Value> convlstm_step(Value x, Value h, Value c, const LstmParams& p);

// Multi-scale (or conv-pool) encoder + ConvLSTM + spatial decoder predicting
// per-pixel motion classes T steps ahead from n input frames.
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  NamedTensorList& params() { return params_; }
  const NamedTensorList& params() const { return params_; }
  Tensor& param(const std::string& name);
  std::int64_t param_count() const;

  // Builds the prediction graph on the tape; returns T logits values
  // (HxWxQ each). Output k is the motion between frames n+k-1 and n+k
  // (0-based: between input end and one step later for k = 0).
  std::vector<Value> predict_logits(Tape& tape, const std::vector<Tensor>& frames, int T) const;

  struct Prediction {
    std::vector<MotionLabelMap> labels;
    std::vector<Tensor> logits;
  };
  Prediction predict(const std::vector<Tensor>& frames, int T) const;

  void save(const std::string& path, const nlohmann::json& extra_meta = {}) const;
  static Model load(const std::string& path, nlohmann::json* meta_out = nullptr);

 private:
  struct Bound {
    std::map<std::string, Value> v;
    Value at(const std::string& name) const;
  };
  Bound bind(Tape& tape) const;
  Value encode_frame(Tape& tape, const Bound& p, Value frame) const;
  Value decode_state(Tape& tape, const Bound& p, Value h) const;

  ModelConfig cfg_;
  NamedTensorList params_;
  std::map<std::string, int> index_;
};

// Per-pixel argmax labels from HxWxQ logits; ties resolve to the lowest
// class index.
MotionLabelMap argmax_labels(const Tensor& logits);

Tensor image_to_tensor(const Image& img);

}  // namespace rmp

#endif  // RMP_NETWORK_HPP_
