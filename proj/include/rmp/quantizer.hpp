#ifndef RMP_QUANTIZER_HPP_
#define RMP_QUANTIZER_HPP_

#include <string>
#include <vector>

#include "rmp/errors.hpp"

namespace rmp {

// Per-pixel 2D forward material motion between consecutive frames: a point
// at p in frame t sits at p + d(p) in frame t+1. Components in pixel units.
struct DisplacementField {
  int width = 0;
  int height = 0;
  std::vector<double> dx;  // row-major H*W
  std::vector<double> dy;

  DisplacementField() = default;
  DisplacementField(int w, int h)
      : width(w), height(h), dx(static_cast<std::size_t>(w) * h, 0.0),
        dy(static_cast<std::size_t>(w) * h, 0.0) {}

  std::size_t idx(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
  bool all_finite() const;
};

struct AxisStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

// Quantization table mapping each (x-bin, y-bin) combination to one of
// Q = b*b motion classes. Bin edges are placed from the displacement
// distribution statistics; representatives are bin midpoints.
struct Codebook {
  int b = 0;
  int q = 0;
  std::vector<double> edges_x;  // length b+1, strictly increasing
  std::vector<double> edges_y;
  std::vector<double> reps_x;  // length b, bin midpoints
  std::vector<double> reps_y;
  AxisStats stats_x;
  AxisStats stats_y;
  bool degenerate_x = false;  // sigma = 0 fallback used
  bool degenerate_y = false;

  std::string to_json(double lambda = -1.0, const std::vector<double>& weights = {}) const;
  static Codebook from_json(const std::string& text);
};

// Per-pixel class indices in [0, Q).
struct MotionLabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // row-major H*W

  MotionLabelMap() = default;
  MotionLabelMap(int w, int h)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}
};

// Builds the codebook from the pooled per-pixel displacement statistics of
// all given fields. For odd b the interior edges sit at symmetric fractions
// of sigma around the mean (b=5: mean +- sigma and +- sigma/3); for even b
// they are uniform over [mean - sigma, mean + sigma]. Outer edges are the
// observed min/max. Falls back to b uniform bins over [min, max] when that
// edge set is not strictly increasing, and to epsilon-width bins around the
// mean when an axis has zero spread (with a warning on stderr).
Codebook build_codebook(const std::vector<DisplacementField>& fields, int b = 5);

// Total mapping: components are clamped into [min, max] first; bins are
// right-exclusive except the last. label = xbin * b + ybin.
MotionLabelMap encode_field(const DisplacementField& field, const Codebook& cb);
int encode_displacement(double dx, double dy, const Codebook& cb);

// label k -> (reps_x[k / b], reps_y[k % b]). Throws on label >= Q.
DisplacementField decode_labels(const MotionLabelMap& labels, const Codebook& cb);
void decode_label(int label, const Codebook& cb, double* dx, double* dy);

// Class-rebalancing weights: w_q proportional to 1 / ((1-lambda) p_q + lambda/Q),
// rescaled so that sum_q p_q w_q = 1.
std::vector<double> class_weights(const std::vector<std::int64_t>& label_histogram, double lambda);

// Pooled label histogram over encoded fields, length Q.
std::vector<std::int64_t> label_histogram(const std::vector<DisplacementField>& fields,
                                          const Codebook& cb);

}  // namespace rmp

#endif  // RMP_QUANTIZER_HPP_
