#pragma once

// Deterministic synthetic cohorts: a 49-point face driven by a latent VAR(3)
// whose coefficients differ by regime, plus pose/gaze channels, HAMD
// trajectories and treatment-response ground truth.

#include "oeg/causal.hpp"
#include "oeg/manifold.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace oeg::synth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using causal::PatientType;

inline constexpr Index kLandmarks = 49;
inline constexpr Index kLatent = 6;
inline constexpr int kLatentOrder = 3;

// Neutral face, roughly 100 px wide, centered near the origin with y up.
Matrix base_face();

// Displacement field per latent dimension (49 x 2 each): brow raise, mouth
// opening, smile, eye closure, one-sided lift, pucker.
std::vector<Matrix> deformation_modes();

struct RegimeParams {
  PatientType label = PatientType::control;
  std::vector<Matrix> var_coeffs;  // three 6 x 6 lag matrices
  double noise_scale = 1.0;
  std::vector<Matrix> deformation_basis;  // six 49 x 2 fields
  double separation = 1.0;

  // Throws InvalidArgument unless the companion spectral radius is < 0.98.
  void validate() const;
  double spectral_radius() const;
};

// depressive_like: slower decay and lower drive; schizophrenic_like: a
// rotational coupling between latent pairs. Both reduce to the control
// coefficients at separation 0.
RegimeParams make_regime(PatientType label, double separation = 1.0);

struct CohortSpec {
  std::array<int, 3> counts{20, 10, 10};  // control, depressive_like, schizophrenic_like
  double duration_s = 120.0;
  double frame_rate = 25.0;
  std::uint64_t seed = 1;
  double separation = 1.0;
  double landmark_noise = 0.05;  // px, isotropic per-frame jitter
  double suboptimal_fraction = 0.5;  // share of patients whose clinical drug is not the planted best
  bool discharge = false;            // also emit a discharge recording per patient
  // Expected fractional HAMD reduction per (patient regime, category); the
  // control row is unused.
  std::array<std::array<double, causal::kCategories>, 3> effects = default_effects();

  static std::array<std::array<double, causal::kCategories>, 3> default_effects();
  void validate() const;
  int subjects() const { return counts[0] + counts[1] + counts[2]; }
  Index frames() const;
};

struct SubjectInfo {
  std::string id;
  int index = 0;
  PatientType type = PatientType::control;
  int hamd_in = 0;
  int hamd_out = 0;
  Vector treatment;         // one-hot clinical prescription, zero for controls
  int clinical_category = -1;
  int best_category = -1;   // planted t*, -1 for controls
  double reaction_time_ms = 0.0;
};

// Labels, scores and prescriptions for every subject, in index order
// (controls first, then depressive_like, then schizophrenic_like).
std::vector<SubjectInfo> plan_cohort(const CohortSpec& spec);

// Segment boundaries over a recording of `frames` frames: interview, mimic
// and story are consecutive thirds.
struct SegmentBounds {
  Index interview_end = 0;
  Index mimic_end = 0;
  Index frames = 0;

  std::pair<Index, Index> range(manifold::Segment segment) const;
};

SegmentBounds segment_bounds(Index frames);

struct Recording {
  std::string subject_id;
  std::string session;  // "admission" or "discharge"
  manifold::LandmarkSequence landmarks;
  Matrix aux;     // frames x 5: pose_x, pose_y, pose_roll, gaze_x, gaze_y
  Matrix latent;  // frames x 6
  SegmentBounds segments;
};

struct SubjectSimulation {
  double noise_scale = 1.0;
  double landmark_noise = 0.05;
  double pose_step = 0.3;  // px per frame before smoothing; roll uses pose_step / 100 rad
  bool zero_initial_state = false;
  Index burn_in = 200;
};

// Fully determined by (seed, subject index, session).
Recording generate_subject(const RegimeParams& regime, Index frames, double frame_rate,
                           std::uint64_t seed, int subject_index, const std::string& session = "admission",
                           const SubjectSimulation& sim = {});

// Recording for one planned subject, with the regime implied by the spec.
// At discharge the regime separation shrinks by the realized HAMD ratio.
Recording generate_recording(const CohortSpec& spec, const SubjectInfo& subject,
                             const std::string& session = "admission");

// Latent VAR(3) simulation alone (no burn-in when zero_initial is set).
Matrix simulate_latent(const RegimeParams& regime, Index frames, std::uint64_t stream_seed,
                       Index burn_in = 200);

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t tag);

}  // namespace oeg::synth
