#ifndef RMP_TRAINING_HPP_
#define RMP_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmp/network.hpp"
#include "rmp/quantizer.hpp"

namespace rmp {

struct TrainConfig {
  double lr0 = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int plateau_patience = 10;
  double lr_factor = 2.0;  // divide on plateau
  double min_lr = 1e-5;
  double improve_threshold = 1e-4;  // absolute accuracy improvement
  int max_epochs = 200;
  double lambda = 0.5;  // class-rebalancing mix
  int n_inputs = 5;
  int t_train = 5;
  std::uint64_t seed = 1;
  int accum_windows = 1;   // gradient accumulation count (1 = step per window)
  int window_stride = 1;   // offset between consecutive training windows
  bool record_wall_time = false;  // off by default: keeps the log byte-reproducible
  double stop_at_val_acc = 2.0;   // > 1 disables the early-exit convenience

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  void validate() const;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::string to_csv() const;
};

// One sequence prepared for training: frames as tensors plus the encoded
// motion-label targets (one per consecutive frame pair).
struct SequenceView {
  std::vector<Tensor> frames;
  std::vector<MotionLabelMap> targets;
};

struct TrainData {
  std::vector<SequenceView> train;
  std::vector<SequenceView> val;
  std::vector<double> class_weights;  // length Q
  int q_classes = 0;
};

// Bias-corrected Adam. State tensors mirror the parameter list; step() also
// rounds parameters to 32-bit storage precision so checkpoints are exact.
class AdamOptimizer {
 public:
  AdamOptimizer(double beta1, double beta2, double eps) : b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(NamedTensorList& params,
            const std::vector<std::pair<std::string, Tensor>>& grads, double lr);

  std::int64_t steps_taken() const { return t_; }

 private:
  double b1_, b2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Single-tensor Adam update used by the optimizer and directly testable.
void adam_step(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::int64_t t,
               double lr, double beta1, double beta2, double eps);

// Halves the learning rate after `patience` consecutive epochs without an
// accuracy improvement above the threshold; never drops below min_lr.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr0, int patience, double factor, double min_lr, double threshold)
      : lr_(lr0), patience_(patience), factor_(factor), min_lr_(min_lr), threshold_(threshold) {}

  double update(double val_acc);
  double lr() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double min_lr_;
  double threshold_;
  double best_ = -1.0;
  int stall_ = 0;
};

// Leave-one-subject-out split: all sequences of the held-out subject are the
// test set, one other subject (deterministic rotation by seed) validates,
// the rest train.
struct LouoSplit {
  std::vector<std::string> train_subjects;
  std::string val_subject;
  std::string test_subject;
};

LouoSplit split_louo(const std::vector<std::string>& subject_ids, const std::string& held_out,
                     std::uint64_t seed);

// Fraction of pixels over all validation windows and all T outputs whose
// argmax label matches the target.
double validate(const Model& model, const std::vector<SequenceView>& val, int n_inputs, int t);

struct TrainResult {
  Model best_model;
  TrainLog log;
  double best_val_acc = 0.0;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(const TrainData& data, const TrainConfig& tc, const ModelConfig& mc,
                  const EpochCallback& on_epoch = nullptr);

}  // namespace rmp

#endif  // RMP_TRAINING_HPP_
