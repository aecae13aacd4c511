#include "rmp/network.hpp"

#include <cmath>

#include "rmp/rng.hpp"

namespace rmp {

using nlohmann::json;

json ModelConfig::to_json() const {
  return json{{"encoder_variant", encoder_variant}, {"base_channels", base_channels},
              {"lstm_hidden", lstm_hidden},         {"kernel", kernel},
              {"q_classes", q_classes},             {"n_inputs", n_inputs},
              {"t_max", t_max}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.encoder_variant = j.value("encoder_variant", c.encoder_variant);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.kernel = j.value("kernel", c.kernel);
  c.q_classes = j.value("q_classes", c.q_classes);
  c.n_inputs = j.value("n_inputs", c.n_inputs);
  c.t_max = j.value("t_max", c.t_max);
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (encoder_variant != "multiscale" && encoder_variant != "convpool")
    throw ConfigError("model: encoder_variant must be 'multiscale' or 'convpool'");
  if (base_channels < 1 || lstm_hidden < 1) throw ConfigError("model: channel counts must be positive");
  if (kernel % 2 != 1 || kernel < 1) throw ConfigError("model: kernel size must be odd");
  if (q_classes < 2) throw ConfigError("model: need at least 2 classes");
  if (n_inputs < 1 || t_max < 1) throw ConfigError("model: n_inputs and t_max must be positive");
}

int ModelConfig::convpool_c1() const {
  const int f = base_channels;
  const int k2 = kernel * kernel;
  // multiscale parameter total (kernels + biases) for the two encoder stages
  const auto ms_stage = [&](int cin) {
    return 3 * (k2 * cin * f + f) + (3 * f * f + f);
  };
  const std::int64_t ms_total = ms_stage(1) + ms_stage(f);
  // conv-pool total: k2*1*c1 + c1 + k2*c1*f + f  ==  ms_total
  const double c1 = static_cast<double>(ms_total - f) / static_cast<double>(k2 + 1 + k2 * f);
  return std::max(1, static_cast<int>(std::llround(c1)));
}

Value ms_block(Value x, const MsBlockParams& p) {
  const Shape& s = x.shape();
  RMP_CHECK(s.ndim() == 3, "ms_block: input must be HxWxC");
  if (s[0] % 4 != 0 || s[1] % 4 != 0)
    throw ContractError("ms_block: H and W must be divisible by 4, got " + s.str());
  Value full = relu(conv2d(x, p.full.k, p.full.b));
  Value med = pool2d(x, PoolMode::kAvg);
  med = relu(conv2d(med, p.medium.k, p.medium.b));
  med = upsample2d(med, UpsampleMode::kBilinear);
  Value low = pool2d(pool2d(x, PoolMode::kAvg), PoolMode::kAvg);
  low = relu(conv2d(low, p.low.k, p.low.b));
  low = upsample2d(upsample2d(low, UpsampleMode::kBilinear), UpsampleMode::kBilinear);
  Value cat = concat_channels({full, med, low});
  return relu(conv2d(cat, p.fuse.k, p.fuse.b));
}

std::pair<Value, Value> convlstm_step(Value x, Value h, Value c, const LstmParams& p) {
  Tape& tape = *x.tape;
  RMP_CHECK(h.shape() == c.shape(), "convlstm_step: hidden/cell shape mismatch");
  Tensor zero_bias(Shape{h.shape()[2]});
  Value zb = tape.leaf(zero_bias);
  Value i = sigmoid(add(conv2d(x, p.xi.k, p.xi.b), conv2d(h, p.hi, zb)));
  Value f = sigmoid(add(conv2d(x, p.xf.k, p.xf.b), conv2d(h, p.hf, zb)));
  Value o = sigmoid(add(conv2d(x, p.xo.k, p.xo.b), conv2d(h, p.ho, zb)));
  Value g = tanh_act(add(conv2d(x, p.xg.k, p.xg.b), conv2d(h, p.hg, zb)));
  Value c_new = add(hadamard(f, c), hadamard(i, g));
  Value h_new = hadamard(o, tanh_act(c_new));
  return {h_new, c_new};
}

namespace {

Tensor init_conv_kernel(int k, int cin, int cout, Rng& rng) {
  Tensor t(Shape{k, k, cin, cout});
  const double bound = std::sqrt(3.0 / (static_cast<double>(k) * k * cin));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = storage_round(static_cast<scalar>(rng.uniform(-bound, bound)));
  return t;
}

Tensor init_bias(int cout, double fill = 0.0) {
  Tensor t(Shape{cout});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = storage_round(static_cast<scalar>(fill));
  return t;
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const int f = cfg_.base_channels;
  const int hid = cfg_.lstm_hidden;
  const int k = cfg_.kernel;
  auto push = [&](const std::string& name, Tensor t) {
    index_[name] = static_cast<int>(params_.size());
    params_.emplace_back(name, std::move(t));
  };

  if (cfg_.encoder_variant == "multiscale") {
    for (int stage = 1; stage <= 2; ++stage) {
      const int cin = stage == 1 ? 1 : f;
      const std::string base = "enc.ms" + std::to_string(stage) + ".";
      for (const char* branch : {"full", "med", "low"}) {
        push(base + branch + ".k", init_conv_kernel(k, cin, f, rng));
        push(base + branch + ".b", init_bias(f));
      }
      push(base + "fuse.k", init_conv_kernel(1, 3 * f, f, rng));
      push(base + "fuse.b", init_bias(f));
    }
  } else {
    const int c1 = cfg_.convpool_c1();
    push("enc.conv1.k", init_conv_kernel(k, 1, c1, rng));
    push("enc.conv1.b", init_bias(c1));
    push("enc.conv2.k", init_conv_kernel(k, c1, f, rng));
    push("enc.conv2.b", init_bias(f));
  }

  for (const char* gate : {"i", "f", "o", "g"}) {
    push(std::string("lstm.x") + gate + ".k", init_conv_kernel(k, f, hid, rng));
    // forget-gate bias starts at +1 for stable early training
    push(std::string("lstm.x") + gate + ".b",
         init_bias(hid, std::string(gate) == "f" ? 1.0 : 0.0));
    push(std::string("lstm.h") + gate + ".k", init_conv_kernel(k, hid, hid, rng));
  }

  push("rollout.k", init_conv_kernel(1, hid, f, rng));
  push("rollout.b", init_bias(f));

  push("dec.conv1.k", init_conv_kernel(k, hid, f, rng));
  push("dec.conv1.b", init_bias(f));
  push("dec.conv2.k", init_conv_kernel(k, f, f, rng));
  push("dec.conv2.b", init_bias(f));
  push("dec.head.k", init_conv_kernel(1, f, cfg_.q_classes, rng));
  push("dec.head.b", init_bias(cfg_.q_classes));
}

Tensor& Model::param(const std::string& name) {
  auto it = index_.find(name);
  RMP_CHECK(it != index_.end(), "Model::param: unknown parameter " + name);
  return params_[it->second].second;
}

std::int64_t Model::param_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

Value Model::Bound::at(const std::string& name) const {
  auto it = v.find(name);
  RMP_CHECK(it != v.end(), "model: missing bound parameter " + name);
  return it->second;
}

Model::Bound Model::bind(Tape& tape) const {
  Bound b;
  for (const auto& [name, t] : params_) b.v[name] = tape.param(name, t);
  return b;
}

Value Model::encode_frame(Tape& tape, const Bound& p, Value frame) const {
  const Shape& s = frame.shape();
  RMP_CHECK(s.ndim() == 3 && s[2] == 1, "encode_frame: expects HxWx1 input");
  if (s[0] % 4 != 0 || s[1] % 4 != 0)
    throw ContractError("encode_frame: H and W must be divisible by 4");
  if (cfg_.encoder_variant == "multiscale") {
    MsBlockParams m1{{p.at("enc.ms1.full.k"), p.at("enc.ms1.full.b")},
                     {p.at("enc.ms1.med.k"), p.at("enc.ms1.med.b")},
                     {p.at("enc.ms1.low.k"), p.at("enc.ms1.low.b")},
                     {p.at("enc.ms1.fuse.k"), p.at("enc.ms1.fuse.b")}};
    MsBlockParams m2{{p.at("enc.ms2.full.k"), p.at("enc.ms2.full.b")},
                     {p.at("enc.ms2.med.k"), p.at("enc.ms2.med.b")},
                     {p.at("enc.ms2.low.k"), p.at("enc.ms2.low.b")},
                     {p.at("enc.ms2.fuse.k"), p.at("enc.ms2.fuse.b")}};
    Value x = ms_block(frame, m1);
    x = pool2d(x, PoolMode::kMax);
    x = ms_block(x, m2);
    return pool2d(x, PoolMode::kMax);
  }
  Value x = relu(conv2d(frame, p.at("enc.conv1.k"), p.at("enc.conv1.b")));
  x = pool2d(x, PoolMode::kMax);
  x = relu(conv2d(x, p.at("enc.conv2.k"), p.at("enc.conv2.b")));
  return pool2d(x, PoolMode::kMax);
}

Value Model::decode_state(Tape& tape, const Bound& p, Value h) const {
  Value x = upsample2d(h, UpsampleMode::kBilinear);
  x = relu(conv2d(x, p.at("dec.conv1.k"), p.at("dec.conv1.b")));
  x = upsample2d(x, UpsampleMode::kBilinear);
  x = relu(conv2d(x, p.at("dec.conv2.k"), p.at("dec.conv2.b")));
  return conv2d(x, p.at("dec.head.k"), p.at("dec.head.b"));
}

std::vector<Value> Model::predict_logits(Tape& tape, const std::vector<Tensor>& frames,
                                         int T) const {
  if (T < 1 || T > cfg_.t_max)
    throw ContractError("predict: T must be in [1, " + std::to_string(cfg_.t_max) + "]");
  RMP_CHECK(static_cast<int>(frames.size()) == cfg_.n_inputs,
            "predict: expected exactly " + std::to_string(cfg_.n_inputs) + " input frames");
  Bound p = bind(tape);

  const Shape& s = frames[0].shape();
  const int hq = s[0] / 4, wq = s[1] / 4;
  Value h = tape.leaf(Tensor(Shape{hq, wq, cfg_.lstm_hidden}));
  Value c = tape.leaf(Tensor(Shape{hq, wq, cfg_.lstm_hidden}));

  LstmParams lstm{{p.at("lstm.xi.k"), p.at("lstm.xi.b")}, {p.at("lstm.xf.k"), p.at("lstm.xf.b")},
                  {p.at("lstm.xo.k"), p.at("lstm.xo.b")}, {p.at("lstm.xg.k"), p.at("lstm.xg.b")},
                  p.at("lstm.hi.k"),  p.at("lstm.hf.k"),
                  p.at("lstm.ho.k"),  p.at("lstm.hg.k")};

  for (const Tensor& frame : frames) {
    RMP_CHECK(frame.shape() == s, "predict: all input frames must share one shape");
    Value e = encode_frame(tape, p, tape.leaf(frame));
    std::tie(h, c) = convlstm_step(e, h, c, lstm);
  }

  std::vector<Value> logits;
  logits.push_back(decode_state(tape, p, h));
  for (int k = 1; k < T; ++k) {
    // Autoregressive rollout: the hidden state re-enters through a 1x1
    // projection as the next input.
    Value x = conv2d(h, p.at("rollout.k"), p.at("rollout.b"));
    std::tie(h, c) = convlstm_step(x, h, c, lstm);
    logits.push_back(decode_state(tape, p, h));
  }
  return logits;
}

MotionLabelMap argmax_labels(const Tensor& logits) {
  RMP_CHECK(logits.shape().ndim() == 3, "argmax_labels: logits must be HxWxQ");
  const int h = logits.shape()[0], w = logits.shape()[1], q = logits.shape()[2];
  MotionLabelMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      scalar bv = logits.at(y, x, 0);
      for (int k = 1; k < q; ++k) {
        const scalar v = logits.at(y, x, k);
        if (v > bv) {
          bv = v;
          best = k;
        }
      }
      out.labels[static_cast<std::size_t>(y) * w + x] = best;
    }
  }
  return out;
}

Model::Prediction Model::predict(const std::vector<Tensor>& frames, int T) const {
  Tape tape;
  std::vector<Value> logit_vals = predict_logits(tape, frames, T);
  Prediction pred;
  for (const Value& lv : logit_vals) {
    pred.logits.push_back(tape.value(lv));
    pred.labels.push_back(argmax_labels(pred.logits.back()));
  }
  return pred;
}

Tensor image_to_tensor(const Image& img) {
  Tensor t(Shape{img.height, img.width, 1});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<scalar>(img.pix[i]);
  return t;
}

void Model::save(const std::string& path, const json& extra_meta) const {
  json meta = extra_meta.is_object() ? extra_meta : json::object();
  meta["model_config"] = cfg_.to_json();
  save_checkpoint(path, params_, meta);
}

Model Model::load(const std::string& path, json* meta_out) {
  json meta;
  NamedTensorList tensors = load_checkpoint(path, &meta);
  if (!meta.contains("model_config"))
    throw DataError("Model::load: checkpoint " + path + " has no model_config");
  Model m;
  m.cfg_ = ModelConfig::from_json(meta["model_config"]);
  // Validate against a freshly-built parameter spec: same names, same order,
  // same shapes.
  Model ref(m.cfg_, /*seed=*/0);
  RMP_CHECK(tensors.size() == ref.params_.size(), "Model::load: parameter count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    RMP_CHECK(tensors[i].first == ref.params_[i].first,
              "Model::load: unexpected parameter " + tensors[i].first);
    RMP_CHECK(tensors[i].second.shape() == ref.params_[i].second.shape(),
              "Model::load: shape mismatch for " + tensors[i].first);
  }
  m.params_ = std::move(tensors);
  for (std::size_t i = 0; i < m.params_.size(); ++i)
    m.index_[m.params_[i].first] = static_cast<int>(i);
  if (meta_out) *meta_out = meta;
  return m;
}

}  // namespace rmp
