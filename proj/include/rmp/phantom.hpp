#ifndef RMP_PHANTOM_HPP_
#define RMP_PHANTOM_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rmp/image.hpp"
#include "rmp/quantizer.hpp"

namespace rmp {

// Parameters of one synthetic free-breathing sequence. The deformation is a
// sinusoid in time with a spatial Gaussian envelope; the superior-inferior
// (y) axis carries the dominant motion and the x axis a scaled copy with a
// phase lag (hysteresis).
struct SubjectParams {
  int height = 32;
  int width = 32;
  int frames = 50;
  double amplitude = 6.0;        // A, pixels, y axis
  double period = 10.0;          // P, frames
  double phase = 0.0;            // phi, radians
  double ap_ratio = 0.25;        // rho in [0, 0.5]; x amplitude = rho * A
  double hysteresis = 0.3;       // psi, radians of x-vs-y phase lag
  double envelope_cx = 15.5;     // motion envelope center, pixels
  double envelope_cy = 15.5;
  double envelope_width = 11.0;  // Gaussian sigma, pixels
  std::uint64_t texture_seed = 1;
  std::uint64_t noise_seed = 1;
  double noise_sigma = 0.01;         // additive intensity noise
  double pixel_spacing_mm = 1.7;
  // Vessel landmark positions; empty selects defaults inside the ellipse.
  std::vector<std::array<double, 2>> vessels;

  void validate() const;  // throws ConfigError on invalid combinations
};

// One generated sequence: frames, forward frame-to-frame ground-truth
// fields (|fields| = frames - 1) and noise-free vessel tracks.
struct SubjectDataset {
  std::vector<Image> frames;
  std::vector<DisplacementField> fields;
  // tracks[v][t] = (x, y) of vessel v in frame t
  std::vector<std::vector<std::array<double, 2>>> vessel_tracks;
  SubjectParams params;
};

// Deterministic textured anatomy: a smooth elliptical region with Gaussian
// texture blobs and two bright vessel spots; intensities in [0, 1].
Image reference_anatomy(const SubjectParams& params);

// Reference positions of the two vessel landmarks (undeformed anatomy).
std::vector<std::array<double, 2>> vessel_reference_positions(const SubjectParams& params);

// Forward ground-truth motion between frames t and t+1, evaluated on the
// grid of frame t.
DisplacementField analytic_displacement(const SubjectParams& params, int t);

// Renders the full sequence: frames warped from the analytic anatomy by the
// inverse absolute deformation, plus fields and tracks consistent with each
// other (track[t+1] = track[t] + bilinear(field_t, track[t])).
SubjectDataset render_sequence(const SubjectParams& params);

// Cohort generation: per-subject breathing parameters drawn from documented
// ranges, `sequences_per_subject` sequences per subject.
struct CohortSpec {
  int n_subjects = 12;
  int sequences_per_subject = 3;
  int height = 32;
  int width = 32;
  int frames = 50;
  double noise_sigma = 0.01;
  double pixel_spacing_mm = 1.7;
};

struct GeneratedSubject {
  std::string id;
  std::vector<SubjectDataset> sequences;
};

std::vector<GeneratedSubject> make_cohort(const CohortSpec& spec, std::uint64_t seed);

}  // namespace rmp

#endif  // RMP_PHANTOM_HPP_
