#include "rmp/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rmp/rng.hpp"

namespace rmp {

void SubjectParams::validate() const {
  if (height < 8 || width < 8) throw ConfigError("phantom: image size must be at least 8x8");
  if (frames < 2) throw ConfigError("phantom: need at least 2 frames");
  if (!(amplitude > 0.0)) throw ConfigError("phantom: amplitude must be positive");
  if (!(period >= 4.0)) throw ConfigError("phantom: period must be at least 4 frames");
  if (ap_ratio < 0.0 || ap_ratio > 0.5) throw ConfigError("phantom: ap_ratio must be in [0, 0.5]");
  if (!(envelope_width > 0.0)) throw ConfigError("phantom: envelope width must be positive");
  if (envelope_cx < 0.0 || envelope_cx > width - 1 || envelope_cy < 0.0 ||
      envelope_cy > height - 1)
    throw ConfigError("phantom: envelope center must lie inside the image");
  if (noise_sigma < 0.0) throw ConfigError("phantom: noise sigma must be non-negative");
}

namespace {

struct TextureBlob {
  double cx, cy, sigma, amp;
};

// Analytic anatomy model, evaluable at arbitrary sub-pixel positions so that
// frames can be rendered from the true deformation without resampling.
struct Anatomy {
  double ex, ey;    // ellipse center
  double rx, ry;    // semi-axes
  double edge = 0.08;
  std::vector<TextureBlob> blobs;
  std::vector<std::array<double, 2>> vessels;
  double vessel_sigma = 1.2;
  double vessel_amp = 0.45;

  double ellipse_coord(double x, double y) const {
    const double nx = (x - ex) / rx;
    const double ny = (y - ey) / ry;
    return nx * nx + ny * ny;
  }

  double value(double x, double y) const {
    const double e = ellipse_coord(x, y);
    const double mask = 1.0 / (1.0 + std::exp((e - 1.0) / edge));
    double v = 0.05 + 0.30 * mask;
    double tex = 0.0;
    for (const auto& b : blobs) {
      const double ddx = x - b.cx, ddy = y - b.cy;
      tex += b.amp * std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * b.sigma * b.sigma));
    }
    v += tex * mask;
    for (const auto& vp : vessels) {
      const double ddx = x - vp[0], ddy = y - vp[1];
      v += vessel_amp *
           std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * vessel_sigma * vessel_sigma));
    }
    return std::min(std::max(v, 0.0), 1.0);
  }
};

Anatomy build_anatomy(const SubjectParams& p) {
  Anatomy a;
  a.ex = 0.5 * (p.width - 1);
  a.ey = 0.5 * (p.height - 1);
  a.rx = 0.38 * p.width;
  a.ry = 0.42 * p.height;
  Rng rng(p.texture_seed);
  const int n_blobs = 6;
  for (int i = 0; i < n_blobs; ++i) {
    TextureBlob b;
    // Centers inside the ellipse (rejection-free: polar with sqrt radius).
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double rad = std::sqrt(rng.uniform()) * 0.8;
    b.cx = a.ex + rad * std::cos(ang) * a.rx;
    b.cy = a.ey + rad * std::sin(ang) * a.ry;
    b.sigma = rng.uniform(0.08, 0.18) * p.width;
    b.amp = rng.uniform(-0.12, 0.12);
    a.blobs.push_back(b);
  }
  if (p.vessels.empty()) {
    // Two landmarks at fixed relative positions, snapped to pixel centers so
    // the vessel pixel is the local intensity maximum.
    a.vessels.push_back({std::round(a.ex - 0.40 * a.rx), std::round(a.ey - 0.15 * a.ry)});
    a.vessels.push_back({std::round(a.ex + 0.35 * a.rx), std::round(a.ey + 0.30 * a.ry)});
  } else {
    a.vessels = p.vessels;
  }
  for (const auto& v : a.vessels) {
    if (a.ellipse_coord(v[0], v[1]) > 0.85)
      throw ConfigError("phantom: vessel landmark outside the liver ellipse");
  }
  return a;
}

// Absolute deformation of the material point q at time t.
struct Deformation {
  const SubjectParams* p;

  double envelope(double x, double y) const {
    const double ddx = x - p->envelope_cx, ddy = y - p->envelope_cy;
    return std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * p->envelope_width * p->envelope_width));
  }

  void u(double x, double y, double t, double* ux, double* uy) const {
    const double g = envelope(x, y);
    const double wt = 2.0 * M_PI * t / p->period;
    *uy = p->amplitude * std::sin(wt + p->phase) * g;
    *ux = p->ap_ratio * p->amplitude * std::sin(wt + p->phase + p->hysteresis) * g;
  }

  // Material point whose deformed position at time t is (x, y); fixed-point
  // iteration q <- p - u(q, t). Throws when 50 iterations do not reach tol.
  void invert(double x, double y, double t, double tol, double* qx, double* qy) const {
    double cx = x, cy = y;
    for (int it = 0; it < 50; ++it) {
      double ux, uy;
      u(cx, cy, t, &ux, &uy);
      const double nx = x - ux, ny = y - uy;
      const double delta = std::max(std::abs(nx - cx), std::abs(ny - cy));
      cx = nx;
      cy = ny;
      if (delta < tol) {
        *qx = cx;
        *qy = cy;
        return;
      }
    }
    throw ConfigError("phantom: deformation inverse did not converge in 50 iterations; "
                      "reduce amplitude or widen the envelope");
  }

  // Sup-norm Lipschitz bound of u over the grid at peak amplitude. Must stay
  // below 1 for the motion to be invertible (and the fixed point to converge).
  double lipschitz_bound() const {
    double worst = 0.0;
    const double w2 = p->envelope_width * p->envelope_width;
    for (int y = 0; y < p->height; ++y) {
      for (int x = 0; x < p->width; ++x) {
        const double g = envelope(x, y);
        const double gx = std::abs(x - p->envelope_cx) / w2 * g;
        const double gy = std::abs(y - p->envelope_cy) / w2 * g;
        const double row_y = p->amplitude * (gx + gy);
        const double row_x = p->ap_ratio * p->amplitude * (gx + gy);
        worst = std::max(worst, std::max(row_y, row_x));
      }
    }
    return worst;
  }
};

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Image reference_anatomy(const SubjectParams& params) {
  params.validate();
  const Anatomy a = build_anatomy(params);
  Image img(params.height, params.width);
  for (int y = 0; y < params.height; ++y)
    for (int x = 0; x < params.width; ++x) img.at(y, x) = a.value(x, y);
  return img;
}

std::vector<std::array<double, 2>> vessel_reference_positions(const SubjectParams& params) {
  params.validate();
  return build_anatomy(params).vessels;
}

DisplacementField analytic_displacement(const SubjectParams& params, int t) {
  params.validate();
  RMP_CHECK(t >= 0 && t < params.frames - 1,
            "analytic_displacement: frame index out of range");
  const Deformation def{&params};
  DisplacementField d(params.width, params.height);
  for (int y = 0; y < params.height; ++y) {
    for (int x = 0; x < params.width; ++x) {
      double qx, qy;
      def.invert(x, y, t, 1e-3, &qx, &qy);
      double ux1, uy1;
      def.u(qx, qy, t + 1.0, &ux1, &uy1);
      // d(p) = Phi_{t+1}(q) - p for the material point q = Phi_t^{-1}(p)
      d.dx[d.idx(y, x)] = (qx + ux1) - x;
      d.dy[d.idx(y, x)] = (qy + uy1) - y;
    }
  }
  return d;
}

SubjectDataset render_sequence(const SubjectParams& params) {
  params.validate();
  const Anatomy anatomy = build_anatomy(params);
  const Deformation def{&params};
  const double lip = def.lipschitz_bound();
  if (lip >= 0.999)
    throw ConfigError("phantom: motion is not invertible (gradient bound " +
                      std::to_string(lip) + " >= 1); reduce amplitude or widen the envelope");

  SubjectDataset ds;
  ds.params = params;
  Rng noise(params.noise_seed);

  for (int t = 0; t < params.frames; ++t) {
    Image img(params.height, params.width);
    for (int y = 0; y < params.height; ++y) {
      for (int x = 0; x < params.width; ++x) {
        double qx, qy;
        def.invert(x, y, t, 1e-3, &qx, &qy);
        double v = anatomy.value(qx, qy);
        if (params.noise_sigma > 0.0) v += noise.normal(0.0, params.noise_sigma);
        img.at(y, x) = std::min(std::max(v, 0.0), 1.0);
      }
    }
    ds.frames.push_back(std::move(img));
  }

  // Fields are stored in 32-bit precision (the on-disk format) so tracks
  // propagated through them stay consistent after a save/load round trip.
  for (int t = 0; t + 1 < params.frames; ++t) {
    DisplacementField d = analytic_displacement(params, t);
    for (auto& v : d.dx) v = f32(v);
    for (auto& v : d.dy) v = f32(v);
    ds.fields.push_back(std::move(d));
  }

  for (const auto& vessel : anatomy.vessels) {
    std::vector<std::array<double, 2>> track;
    double ux0, uy0;
    def.u(vessel[0], vessel[1], 0.0, &ux0, &uy0);
    track.push_back({vessel[0] + ux0, vessel[1] + uy0});
    for (int t = 0; t + 1 < params.frames; ++t) {
      double ddx, ddy;
      sample_field(ds.fields[t], track.back()[0], track.back()[1], &ddx, &ddy);
      track.push_back({track.back()[0] + ddx, track.back()[1] + ddy});
    }
    ds.vessel_tracks.push_back(std::move(track));
  }
  return ds;
}

std::vector<GeneratedSubject> make_cohort(const CohortSpec& spec, std::uint64_t seed) {
  if (spec.n_subjects < 2) throw ConfigError("make_cohort: need at least 2 subjects");
  std::vector<GeneratedSubject> cohort;
  Rng rng(seed);
  for (int s = 0; s < spec.n_subjects; ++s) {
    GeneratedSubject subj;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "sub%02d", s);
    subj.id = buf;
    // Subject-level breathing pattern; sequence-level slice variation.
    const double amplitude = rng.uniform(3.0, 8.0);
    const double period = rng.uniform(8.0, 16.0);
    const double ap_ratio = rng.uniform(0.1, 0.4);
    const double hysteresis = rng.uniform(0.0, 0.6);
    for (int q = 0; q < spec.sequences_per_subject; ++q) {
      SubjectParams p;
      p.height = spec.height;
      p.width = spec.width;
      p.frames = spec.frames;
      p.amplitude = amplitude;
      p.period = period;
      p.ap_ratio = ap_ratio;
      p.hysteresis = hysteresis;
      p.phase = rng.uniform(0.0, 2.0 * M_PI);
      p.envelope_cx = 0.5 * (spec.width - 1) + rng.uniform(-2.0, 2.0);
      p.envelope_cy = 0.5 * (spec.height - 1) + rng.uniform(-2.0, 2.0);
      p.envelope_width = rng.uniform(0.30, 0.38) * std::min(spec.width, spec.height);
      p.texture_seed = rng.next_u64();
      p.noise_seed = rng.next_u64();
      p.noise_sigma = spec.noise_sigma;
      p.pixel_spacing_mm = spec.pixel_spacing_mm;
      subj.sequences.push_back(render_sequence(p));
    }
    cohort.push_back(std::move(subj));
  }
  return cohort;
}

}  // namespace rmp
