#include "oeg/synth.hpp"

#include "oeg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace oeg::synth {
namespace {

// Landmark index ranges within the 49-point layout.
constexpr Index kBrowR = 0, kBrowL = 5, kNoseBridge = 10, kNoseBase = 14, kEyeR = 19, kEyeL = 25,
                kMouthOuter = 31, kMouthInner = 43;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void ellipse(Matrix& face, Index first, Index count, double cx, double cy, double rx, double ry,
             double phase = 0.0) {
  for (Index i = 0; i < count; ++i) {
    const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
    face(first + i, 0) = cx + rx * std::cos(a);
    face(first + i, 1) = cy + ry * std::sin(a);
  }
}

Matrix companion(const std::vector<Matrix>& coeffs) {
  const Index m = coeffs.front().rows();
  const Index p = static_cast<Index>(coeffs.size());
  Matrix c = Matrix::Zero(m * p, m * p);
  for (Index i = 0; i < p; ++i) c.block(0, i * m, m, m) = coeffs[static_cast<std::size_t>(i)];
  if (p > 1) c.block(m, 0, m * (p - 1), m * (p - 1)).setIdentity();
  return c;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
  return splitmix(splitmix(splitmix(seed) ^ index) ^ (tag * 0x632be59bd9b4e019ULL));
}

Matrix base_face() {
  Matrix face(kLandmarks, 2);
  for (Index i = 0; i < 5; ++i) {
    const double x = -45.0 + 8.75 * static_cast<double>(i);
    const double arch = 4.0 - 0.04 * (x + 27.5) * (x + 27.5);
    face(kBrowR + i, 0) = x;
    face(kBrowR + i, 1) = 30.0 + std::max(arch, 0.0);
    face(kBrowL + 4 - i, 0) = -x;
    face(kBrowL + 4 - i, 1) = face(kBrowR + i, 1);
  }
  for (Index i = 0; i < 4; ++i) {
    face(kNoseBridge + i, 0) = 0.0;
    face(kNoseBridge + i, 1) = 20.0 - 10.0 * static_cast<double>(i);
  }
  for (Index i = 0; i < 5; ++i) {
    const double x = -10.0 + 5.0 * static_cast<double>(i);
    face(kNoseBase + i, 0) = x;
    face(kNoseBase + i, 1) = -15.0 - 2.0 * (1.0 - std::abs(x) / 10.0);
  }
  ellipse(face, kEyeR, 6, -25.0, 15.0, 10.0, 4.0);
  ellipse(face, kEyeL, 6, 25.0, 15.0, 10.0, 4.0);
  ellipse(face, kMouthOuter, 12, 0.0, -40.0, 22.0, 10.0);
  ellipse(face, kMouthInner, 6, 0.0, -40.0, 14.0, 4.0);
  return face;
}

std::vector<Matrix> deformation_modes() {
  const Matrix face = base_face();
  std::vector<Matrix> modes(kLatent, Matrix::Zero(kLandmarks, 2));
  const Eigen::RowVector2d mouth_center(0.0, -40.0);

  for (Index i = kBrowR; i < kNoseBridge; ++i) modes[0](i, 1) = 1.0;

  for (Index i = kMouthOuter; i < kLandmarks; ++i) {
    const double dy = face(i, 1) - mouth_center(1);
    modes[1](i, 1) = dy < 0.0 ? -1.0 : 0.3;
  }

  for (Index i = kMouthOuter; i < kLandmarks; ++i) {
    const double u = face(i, 0) / 22.0;
    modes[2](i, 0) = 0.6 * u;
    modes[2](i, 1) = 0.8 * std::abs(u);
  }

  for (Index eye : {kEyeR, kEyeL}) {
    const double cy = 15.0;
    for (Index i = eye; i < eye + 6; ++i) {
      const double dy = face(i, 1) - cy;
      modes[3](i, 1) = dy > 1e-9 ? -1.0 : (dy < -1e-9 ? 0.5 : 0.0);
    }
  }

  for (Index i = 0; i < kLandmarks; ++i) {
    if (face(i, 0) > 0.0) modes[4](i, 1) = face(i, 0) / 50.0;
  }

  for (Index i = kMouthOuter; i < kLandmarks; ++i) {
    modes[5].row(i) = -0.15 * (face.row(i) - mouth_center);
  }
  return modes;
}

double RegimeParams::spectral_radius() const {
  if (var_coeffs.empty()) return 0.0;
  Eigen::EigenSolver<Matrix> es(companion(var_coeffs), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void RegimeParams::validate() const {
  if (var_coeffs.size() != kLatentOrder) fail(ErrorKind::InvalidArgument, "regime needs three lag matrices");
  for (const auto& a : var_coeffs) {
    if (a.rows() != kLatent || a.cols() != kLatent) fail(ErrorKind::InvalidArgument, "lag matrices must be 6 x 6");
  }
  if (deformation_basis.size() != kLatent) fail(ErrorKind::InvalidArgument, "regime needs six deformation modes");
  if (!(noise_scale >= 0.0) || !(separation >= 0.0)) {
    fail(ErrorKind::InvalidArgument, "noise scale and separation must be nonnegative");
  }
  const double rho = spectral_radius();
  if (!(rho < 0.98)) {
    fail(ErrorKind::InvalidArgument, "regime is not stationary (spectral radius " + std::to_string(rho) + ")");
  }
}

RegimeParams make_regime(PatientType label, double separation) {
  if (!(separation >= 0.0)) fail(ErrorKind::InvalidArgument, "separation must be nonnegative");
  RegimeParams r;
  r.label = label;
  r.separation = separation;
  r.deformation_basis = deformation_modes();

  const Matrix eye = Matrix::Identity(kLatent, kLatent);
  Matrix a1 = 0.5 * eye;
  // Mild fixed coupling shared by every regime.
  for (Index i = 0; i + 1 < kLatent; ++i) a1(i + 1, i) = 0.1;
  Matrix a2 = 0.1 * eye;
  Matrix a3 = -0.05 * eye;

  switch (label) {
    case PatientType::control:
      break;
    case PatientType::depressive_like:
      a1 += 0.3 * separation * eye;
      r.noise_scale = 1.0 / (1.0 + 0.5 * separation);
      break;
    case PatientType::schizophrenic_like: {
      Matrix k = Matrix::Zero(kLatent, kLatent);
      for (Index i = 0; i + 1 < kLatent; i += 2) {
        k(i, i + 1) = 0.35;
        k(i + 1, i) = -0.35;
      }
      a1 += separation * k;
      break;
    }
  }
  r.var_coeffs = {a1, a2, a3};
  r.validate();
  return r;
}

std::array<std::array<double, causal::kCategories>, 3> CohortSpec::default_effects() {
  std::array<std::array<double, causal::kCategories>, 3> e{};
  for (auto& row : e) row.fill(0.1);
  e[0].fill(0.0);
  // SSRI (sixth category) is the planted best treatment for both patient regimes.
  e[1][5] = 0.6;
  e[2][5] = 0.6;
  return e;
}

void CohortSpec::validate() const {
  for (int c : counts) {
    if (c < 0) fail(ErrorKind::InvalidArgument, "cohort counts must be nonnegative");
  }
  if (subjects() == 0) fail(ErrorKind::InvalidArgument, "cohort is empty");
  if (!(duration_s > 0.0) || !(frame_rate > 0.0)) {
    fail(ErrorKind::InvalidArgument, "duration and frame rate must be positive");
  }
  if (frames() < 6) fail(ErrorKind::InvalidArgument, "recordings must span at least six frames");
  if (!(separation >= 0.0) || !(landmark_noise >= 0.0)) {
    fail(ErrorKind::InvalidArgument, "separation and landmark noise must be nonnegative");
  }
  if (!(suboptimal_fraction >= 0.0 && suboptimal_fraction <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "suboptimal_fraction must lie in [0, 1]");
  }
  for (const auto& row : effects) {
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::InvalidArgument, "treatment effects must lie in [0, 1]");
    }
  }
}

Index CohortSpec::frames() const { return static_cast<Index>(std::llround(duration_s * frame_rate)); }

std::vector<SubjectInfo> plan_cohort(const CohortSpec& spec) {
  spec.validate();
  std::vector<SubjectInfo> out;
  const std::array<PatientType, 3> types{PatientType::control, PatientType::depressive_like,
                                         PatientType::schizophrenic_like};
  const std::array<const char*, 3> prefixes{"ctl", "dep", "scz"};
  int index = 0;
  for (std::size_t g = 0; g < 3; ++g) {
    for (int k = 0; k < spec.counts[g]; ++k, ++index) {
      std::mt19937_64 rng(stream_seed(spec.seed, static_cast<std::uint64_t>(index), 0x1abe1ULL));
      SubjectInfo s;
      s.index = index;
      s.type = types[g];
      char id[32];
      std::snprintf(id, sizeof id, "%s%03d", prefixes[g], k + 1);
      s.id = id;
      s.treatment = Vector::Zero(causal::kCategories);
      std::normal_distribution<double> rt_noise(0.0, 20.0);
      if (s.type == PatientType::control) {
        s.hamd_in = std::uniform_int_distribution<int>(0, 4)(rng);
        s.hamd_out = s.hamd_in;
      } else {
        const auto& effect = spec.effects[g];
        s.best_category = static_cast<int>(std::max_element(effect.begin(), effect.end()) - effect.begin());
        s.hamd_in = std::uniform_int_distribution<int>(14, 30)(rng);
        const bool suboptimal = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.suboptimal_fraction;
        int category = s.best_category;
        if (suboptimal) {
          category = std::uniform_int_distribution<int>(0, causal::kCategories - 2)(rng);
          if (category >= s.best_category) ++category;
        }
        s.clinical_category = category;
        s.treatment(category) = 1.0;
        const double out = std::round(s.hamd_in * (1.0 - effect[static_cast<std::size_t>(category)]));
        s.hamd_out = static_cast<int>(std::clamp(out, 0.0, 52.0));
      }
      s.reaction_time_ms = 450.0 + 8.0 * s.hamd_in + rt_noise(rng);
      out.push_back(std::move(s));
    }
  }
  return out;
}

SegmentBounds segment_bounds(Index frames) {
  return {frames / 3, 2 * frames / 3, frames};
}

std::pair<Index, Index> SegmentBounds::range(manifold::Segment segment) const {
  switch (segment) {
    case manifold::Segment::interview: return {0, interview_end};
    case manifold::Segment::mimic: return {interview_end, mimic_end};
    case manifold::Segment::story: return {mimic_end, frames};
    case manifold::Segment::full: break;
  }
  return {0, frames};
}

Matrix simulate_latent(const RegimeParams& regime, Index frames, std::uint64_t seed, Index burn_in) {
  regime.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index total = frames + burn_in;
  Matrix z = Matrix::Zero(total + kLatentOrder, kLatent);
  for (Index t = kLatentOrder; t < total + kLatentOrder; ++t) {
    Vector next = Vector::Zero(kLatent);
    for (int lag = 1; lag <= kLatentOrder; ++lag) {
      next += regime.var_coeffs[static_cast<std::size_t>(lag - 1)] * z.row(t - lag).transpose();
    }
    for (Index j = 0; j < kLatent; ++j) next(j) += regime.noise_scale * normal(rng);
    z.row(t) = next.transpose();
  }
  return z.bottomRows(frames);
}

Recording generate_subject(const RegimeParams& regime, Index frames, double frame_rate, std::uint64_t seed,
                           int subject_index, const std::string& session, const SubjectSimulation& sim) {
  if (frames < 1) fail(ErrorKind::InvalidArgument, "need at least one frame");
  const std::uint64_t session_tag = session == "discharge" ? 2 : 1;
  const auto index = static_cast<std::uint64_t>(subject_index);

  RegimeParams scaled = regime;
  scaled.noise_scale = regime.noise_scale * sim.noise_scale;
  const Matrix latent = simulate_latent(scaled, frames, stream_seed(seed, index, 10 + session_tag),
                                        sim.zero_initial_state ? 0 : sim.burn_in);

  // Subject identity (face shape, mode gains) is shared across sessions.
  std::mt19937_64 identity_rng(stream_seed(seed, index, 0x1d));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix face = base_face();
  const double face_scale = 1.0 + 0.05 * normal(identity_rng);
  face *= face_scale;
  for (Index i = 0; i < face.size(); ++i) face.data()[i] += 0.8 * normal(identity_rng);
  Vector gains(kLatent);
  for (Index j = 0; j < kLatent; ++j) gains(j) = 2.0 * (1.0 + 0.1 * normal(identity_rng));

  std::mt19937_64 rng(stream_seed(seed, index, 20 + session_tag));
  const double noise = sim.noise_scale;
  Recording rec;
  rec.session = session;
  rec.latent = latent;
  rec.aux = Matrix::Zero(frames, 5);
  rec.segments = segment_bounds(frames);
  rec.landmarks.frame_rate = frame_rate;
  rec.landmarks.frames.reserve(static_cast<std::size_t>(frames));

  Eigen::Vector3d walk = Eigen::Vector3d::Zero();
  Eigen::Vector3d pose = Eigen::Vector3d::Zero();
  Eigen::Vector2d gaze = Eigen::Vector2d::Zero();
  const Eigen::Vector3d step(sim.pose_step, sim.pose_step, sim.pose_step / 100.0);
  for (Index t = 0; t < frames; ++t) {
    for (int c = 0; c < 3; ++c) walk(c) += noise * step(c) * normal(rng);
    pose = 0.9 * pose + 0.1 * walk;
    for (int c = 0; c < 2; ++c) gaze(c) = 0.9 * gaze(c) + noise * 0.05 * normal(rng);

    Matrix x = face;
    for (Index j = 0; j < kLatent; ++j) x += gains(j) * latent(t, j) * scaled.deformation_basis[static_cast<std::size_t>(j)];
    if (sim.landmark_noise > 0.0) {
      for (Index i = 0; i < x.size(); ++i) x.data()[i] += noise * sim.landmark_noise * normal(rng);
    }
    const double c = std::cos(pose(2)), s = std::sin(pose(2));
    Eigen::Matrix2d rot;
    rot << c, s, -s, c;
    x = x * rot;
    x.col(0).array() += pose(0);
    x.col(1).array() += pose(1);

    rec.landmarks.frames.push_back({std::move(x), false});
    rec.aux.row(t) << pose(0), pose(1), pose(2), gaze(0), gaze(1);
  }
  return rec;
}

Recording generate_recording(const CohortSpec& spec, const SubjectInfo& subject, const std::string& session) {
  double separation = spec.separation;
  if (session == "discharge" && subject.type != PatientType::control && subject.hamd_in > 0) {
    separation *= static_cast<double>(subject.hamd_out) / static_cast<double>(subject.hamd_in);
  }
  const RegimeParams regime = make_regime(subject.type, separation);
  SubjectSimulation sim;
  sim.landmark_noise = spec.landmark_noise;
  Recording rec = generate_subject(regime, spec.frames(), spec.frame_rate, spec.seed, subject.index, session, sim);
  rec.subject_id = subject.id;
  rec.landmarks.subject_id = subject.id;
  return rec;
}

}  // namespace oeg::synth
