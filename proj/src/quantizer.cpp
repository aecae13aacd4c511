#include "rmp/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>

#include <nlohmann/json.hpp>

namespace rmp {

using nlohmann::json;

bool DisplacementField::all_finite() const {
  for (double v : dx)
    if (!std::isfinite(v)) return false;
  for (double v : dy)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

AxisStats axis_stats(const std::vector<DisplacementField>& fields, bool x_axis) {
  double sum = 0.0, sum2 = 0.0;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  std::int64_t n = 0;
  for (const auto& f : fields) {
    const auto& comp = x_axis ? f.dx : f.dy;
    for (double v : comp) {
      sum += v;
      sum2 += v * v;
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      ++n;
    }
  }
  AxisStats s;
  s.mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum2 / static_cast<double>(n) - s.mean * s.mean);
  s.stddev = std::sqrt(var);
  s.min = mn;
  s.max = mx;
  return s;
}

struct AxisBins {
  std::vector<double> edges;
  bool degenerate = false;
};

AxisBins axis_edges(const AxisStats& s, int b, const char* axis_name) {
  AxisBins out;
  if (s.stddev <= 0.0 || s.max <= s.min) {
    // Zero spread: epsilon-width bins around the mean so the constant
    // round-trips through encode/decode.
    std::cerr << "warning: displacement distribution on axis " << axis_name
              << " has zero spread; using epsilon bins around mean " << s.mean << "\n";
    const double half = std::max(1e-6, std::abs(s.mean) * 1e-9);
    out.edges.resize(b + 1);
    for (int i = 0; i <= b; ++i)
      out.edges[i] = s.mean - half + 2.0 * half * static_cast<double>(i) / b;
    out.degenerate = true;
    return out;
  }
  std::vector<double> edges;
  edges.push_back(s.min);
  if (b % 2 == 1) {
    // Interior edges at symmetric sigma fractions: b=5 gives
    // mean +- sigma/3 and mean +- sigma.
    const int half_edges = (b - 1) / 2;
    std::vector<double> fracs;
    for (int j = 1; j <= half_edges; ++j)
      fracs.push_back(static_cast<double>(2 * j - 1) / static_cast<double>(b - 2));
    for (int j = half_edges - 1; j >= 0; --j) edges.push_back(s.mean - fracs[j] * s.stddev);
    for (int j = 0; j < half_edges; ++j) edges.push_back(s.mean + fracs[j] * s.stddev);
  } else {
    // Even b: uniform interior edges spanning [mean - sigma, mean + sigma].
    for (int j = 0; j < b - 1; ++j)
      edges.push_back(s.mean - s.stddev +
                      2.0 * s.stddev * static_cast<double>(j) / static_cast<double>(b - 2));
  }
  edges.push_back(s.max);
  bool monotone = true;
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) monotone = false;
  if (!monotone) {
    // Statistics edges collide with the observed range; fall back to
    // uniform bins over [min, max].
    edges.resize(b + 1);
    for (int i = 0; i <= b; ++i)
      edges[i] = s.min + (s.max - s.min) * static_cast<double>(i) / b;
  }
  out.edges = std::move(edges);
  return out;
}

int bin_of(double v, const std::vector<double>& edges) {
  const int b = static_cast<int>(edges.size()) - 1;
  const double clamped = std::min(std::max(v, edges.front()), edges.back());
  // Right-exclusive bins, last bin right-inclusive.
  const auto it = std::upper_bound(edges.begin(), edges.end(), clamped);
  int idx = static_cast<int>(it - edges.begin()) - 1;
  return std::min(std::max(idx, 0), b - 1);
}

}  // namespace

Codebook build_codebook(const std::vector<DisplacementField>& fields, int b) {
  if (fields.empty()) throw DataError("build_codebook: no displacement fields given");
  RMP_CHECK(b >= 2, "build_codebook: need at least 2 bins per axis");
  for (const auto& f : fields)
    if (!f.all_finite()) throw NumericError("build_codebook: non-finite displacement value");

  Codebook cb;
  cb.b = b;
  cb.q = b * b;
  cb.stats_x = axis_stats(fields, true);
  cb.stats_y = axis_stats(fields, false);
  AxisBins bx = axis_edges(cb.stats_x, b, "x");
  AxisBins by = axis_edges(cb.stats_y, b, "y");
  cb.edges_x = std::move(bx.edges);
  cb.edges_y = std::move(by.edges);
  cb.degenerate_x = bx.degenerate;
  cb.degenerate_y = by.degenerate;
  cb.reps_x.resize(b);
  cb.reps_y.resize(b);
  for (int i = 0; i < b; ++i) {
    cb.reps_x[i] = 0.5 * (cb.edges_x[i] + cb.edges_x[i + 1]);
    cb.reps_y[i] = 0.5 * (cb.edges_y[i] + cb.edges_y[i + 1]);
  }
  return cb;
}

int encode_displacement(double dx, double dy, const Codebook& cb) {
  return bin_of(dx, cb.edges_x) * cb.b + bin_of(dy, cb.edges_y);
}

MotionLabelMap encode_field(const DisplacementField& field, const Codebook& cb) {
  RMP_CHECK(cb.b >= 2 && static_cast<int>(cb.edges_x.size()) == cb.b + 1,
            "encode_field: codebook not built");
  MotionLabelMap out(field.width, field.height);
  const std::size_t n = field.dx.size();
  for (std::size_t i = 0; i < n; ++i)
    out.labels[i] = bin_of(field.dx[i], cb.edges_x) * cb.b + bin_of(field.dy[i], cb.edges_y);
  return out;
}

void decode_label(int label, const Codebook& cb, double* dx, double* dy) {
  if (label < 0 || label >= cb.q)
    throw ContractError("decode_label: label " + std::to_string(label) + " out of range [0," +
                        std::to_string(cb.q) + ")");
  *dx = cb.reps_x[label / cb.b];
  *dy = cb.reps_y[label % cb.b];
}

DisplacementField decode_labels(const MotionLabelMap& labels, const Codebook& cb) {
  DisplacementField out(labels.width, labels.height);
  const std::size_t n = labels.labels.size();
  for (std::size_t i = 0; i < n; ++i)
    decode_label(labels.labels[i], cb, &out.dx[i], &out.dy[i]);
  return out;
}

std::vector<double> class_weights(const std::vector<std::int64_t>& hist, double lambda) {
  RMP_CHECK(lambda >= 0.0 && lambda <= 1.0, "class_weights: lambda must be in [0,1]");
  const int q = static_cast<int>(hist.size());
  std::int64_t total = 0;
  for (std::int64_t c : hist) {
    RMP_CHECK(c >= 0, "class_weights: negative histogram count");
    total += c;
  }
  if (total <= 0) throw DataError("class_weights: histogram total must be positive");
  std::vector<double> w(q);
  double denom_check = 0.0;
  for (int i = 0; i < q; ++i) {
    const double p = static_cast<double>(hist[i]) / static_cast<double>(total);
    const double mix = (1.0 - lambda) * p + lambda / q;
    if (mix <= 0.0)
      throw DataError("class_weights: lambda = 0 with empty class " + std::to_string(i) +
                      " gives an unbounded weight");
    w[i] = 1.0 / mix;
    denom_check += p * w[i];
  }
  // Rescale so the expected weight under the empirical distribution is 1.
  for (double& wi : w) wi /= denom_check;
  return w;
}

std::vector<std::int64_t> label_histogram(const std::vector<DisplacementField>& fields,
                                          const Codebook& cb) {
  std::vector<std::int64_t> hist(cb.q, 0);
  for (const auto& f : fields) {
    MotionLabelMap m = encode_field(f, cb);
    for (int lbl : m.labels) ++hist[lbl];
  }
  return hist;
}

namespace {

json stats_to_json(const AxisStats& s) {
  return json{{"mean", s.mean}, {"std", s.stddev}, {"min", s.min}, {"max", s.max}};
}

AxisStats stats_from_json(const json& j) {
  AxisStats s;
  s.mean = j.at("mean").get<double>();
  s.stddev = j.at("std").get<double>();
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  return s;
}

}  // namespace

std::string Codebook::to_json(double lambda, const std::vector<double>& weights) const {
  json j;
  j["b"] = b;
  j["q"] = q;
  j["edges_x"] = edges_x;
  j["edges_y"] = edges_y;
  j["reps_x"] = reps_x;
  j["reps_y"] = reps_y;
  j["stats"] = json{{"x", stats_to_json(stats_x)}, {"y", stats_to_json(stats_y)}};
  j["degenerate"] = json{{"x", degenerate_x}, {"y", degenerate_y}};
  if (lambda >= 0.0) j["lambda"] = lambda;
  if (!weights.empty()) j["weights"] = weights;
  return j.dump(2);
}

Codebook Codebook::from_json(const std::string& text) {
  json j = json::parse(text);
  Codebook cb;
  cb.b = j.at("b").get<int>();
  cb.q = j.at("q").get<int>();
  RMP_CHECK(cb.q == cb.b * cb.b, "Codebook::from_json: q != b*b");
  cb.edges_x = j.at("edges_x").get<std::vector<double>>();
  cb.edges_y = j.at("edges_y").get<std::vector<double>>();
  cb.reps_x = j.at("reps_x").get<std::vector<double>>();
  cb.reps_y = j.at("reps_y").get<std::vector<double>>();
  cb.stats_x = stats_from_json(j.at("stats").at("x"));
  cb.stats_y = stats_from_json(j.at("stats").at("y"));
  if (j.contains("degenerate")) {
    cb.degenerate_x = j["degenerate"].at("x").get<bool>();
    cb.degenerate_y = j["degenerate"].at("y").get<bool>();
  }
  RMP_CHECK(static_cast<int>(cb.edges_x.size()) == cb.b + 1 &&
                static_cast<int>(cb.edges_y.size()) == cb.b + 1,
            "Codebook::from_json: edge count mismatch");
  return cb;
}

}  // namespace rmp
