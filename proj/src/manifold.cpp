#include "oeg/manifold.hpp"

#include "oeg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace oeg::manifold {
namespace {

constexpr double kCutLocusTolerance = 1e-6;
constexpr double kTinyAngle = 1e-12;

double clamp_unit(double x) { return std::clamp(x, 0.0, 1.0); }

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Eigen::SelfAdjointEigenSolver<Matrix> spd_eigen(const Matrix& s, const char* what) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    fail(ErrorKind::NotSPD, std::string(what) + " is not a non-empty square matrix");
  }
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    fail(ErrorKind::NotSPD, std::string(what) + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(s));
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    fail(ErrorKind::NotSPD, std::string(what) + " has a non-positive eigenvalue");
  }
  return eig;
}

template <typename Fn>
Matrix spectral_apply(const Eigen::SelfAdjointEigenSolver<Matrix>& eig, Fn fn) {
  const Vector mapped = eig.eigenvalues().unaryExpr(fn);
  return eig.eigenvectors() * mapped.asDiagonal() * eig.eigenvectors().transpose();
}

// Principal vectors of span(A) and span(B): C Z = Y diag(cos theta) with
// C = A^T B. Small angles come from the sines of (I - A A^T) B, large ones
// from the cosines, so both ends of [0, pi/2] keep full relative accuracy.
struct Alignment {
  Vector angles;  // ascending
  Matrix left;    // Y
  Matrix right;   // Z
  Matrix cross;   // C Z
};

Matrix orthogonal_polar(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Alignment align(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::InvalidArgument, "factors differ in (n, d)");
  }
  const Index d = a.cols();
  const Matrix c = a.transpose() * b;
  Eigen::JacobiSVD<Matrix> cos_svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector cosines = cos_svd.singularValues();  // descending
  const Matrix residual = b - a * c;
  Eigen::JacobiSVD<Matrix> sin_svd(residual, Eigen::ComputeFullV);
  const Vector sines = sin_svd.singularValues().reverse();  // ascending

  Alignment out;
  out.angles.resize(d);
  for (Index i = 0; i < d; ++i) {
    const double cs = clamp_unit(cosines(i));
    out.angles(i) = cs * cs >= 0.5 ? std::asin(clamp_unit(sines(i))) : std::acos(cs);
  }

  const bool all_small = d == 0 || clamp_unit(cosines(d - 1)) * clamp_unit(cosines(d - 1)) >= 0.5;
  if (all_small) {
    out.right = sin_svd.matrixV().rowwise().reverse();
    out.cross = c * out.right;
    Matrix y = out.cross;
    for (Index i = 0; i < d; ++i) y.col(i).normalize();
    out.left = orthogonal_polar(y);
  } else {
    out.left = cos_svd.matrixU();
    out.right = cos_svd.matrixV();
    out.cross = c * out.right;
  }
  return out;
}

// U(t) in the principal-vector frame: A Y cos(t Theta) + M sin(t Theta),
// with M sin(Theta) = (I - A A^T) B Z.
Matrix aligned_geodesic(const Matrix& a, const Matrix& b, const Alignment& al, double t) {
  const Index d = a.cols();
  Vector cos_t(d), ratio(d);
  for (Index i = 0; i < d; ++i) {
    const double theta = al.angles(i);
    cos_t(i) = std::cos(t * theta);
    ratio(i) = theta > kTinyAngle ? std::sin(t * theta) / std::sin(theta) : t;
  }
  const Matrix normal = b * al.right - a * al.cross;
  return a * al.left * cos_t.asDiagonal() + normal * ratio.asDiagonal();
}

void check_cut_locus(const Alignment& al) {
  for (Index i = 0; i < al.angles.size(); ++i) {
    if (std::abs(al.angles(i) - std::numbers::pi / 2) < kCutLocusTolerance) {
      fail(ErrorKind::CutLocus, "principal angle at pi/2; geodesic is not unique");
    }
  }
}

Matrix spd_log_map(const Matrix& r1sq, const Matrix& r2sq) {
  const auto eig1 = spd_eigen(r1sq, "first SPD block");
  const Matrix r1_inv = spectral_apply(eig1, [](double l) { return 1.0 / std::sqrt(l); });
  spd_eigen(r2sq, "second SPD block");
  const Matrix inner = symmetrized(r1_inv * r2sq * r1_inv);
  const auto eig = spd_eigen(inner, "relative SPD block");
  return symmetrized(spectral_apply(eig, [](double l) { return std::log(l); }));
}

}  // namespace

std::string_view to_string(Segment segment) {
  switch (segment) {
    case Segment::full: return "full";
    case Segment::interview: return "interview";
    case Segment::mimic: return "mimic";
    case Segment::story: return "story";
  }
  return "full";
}

Segment parse_segment(std::string_view name) {
  if (name == "full") return Segment::full;
  if (name == "interview") return Segment::interview;
  if (name == "mimic") return Segment::mimic;
  if (name == "story") return Segment::story;
  fail(ErrorKind::InvalidArgument, "unknown segment '" + std::string(name) + "'");
}

void LandmarkSequence::validate() const {
  if (!(frame_rate > 0.0)) fail(ErrorKind::InvalidArgument, "frame_rate must be positive");
  if (frames.empty()) return;
  const Index n = frames.front().count();
  const Index d = frames.front().dim();
  if (d < 1 || n <= d) fail(ErrorKind::InvalidArgument, "frames need n > d >= 1");
  for (const auto& f : frames) {
    if (f.count() != n || f.dim() != d) {
      fail(ErrorKind::InvalidArgument, "frames differ in (n, d)");
    }
  }
}

void ManifoldConfig::validate() const {
  if (!(k >= 0.0)) fail(ErrorKind::InvalidArgument, "manifold k must be >= 0");
  if (!(eps > 0.0)) fail(ErrorKind::InvalidArgument, "manifold eps must be > 0");
}

LandmarkFrame center_landmarks(const LandmarkFrame& frame) {
  LandmarkFrame out;
  out.points = frame.points.rowwise() - frame.points.colwise().mean();
  out.centered = true;
  return out;
}

Matrix squared_distance_matrix(const LandmarkFrame& frame) {
  const Index n = frame.count();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (frame.points.row(i) - frame.points.row(j)).squaredNorm();
    }
  }
  return d;
}

Matrix gram(const LandmarkFrame& frame) { return frame.points * frame.points.transpose(); }

GramFactor polar_factor(const LandmarkFrame& frame, const ManifoldConfig& cfg) {
  cfg.validate();
  const Index n = frame.count();
  const Index d = frame.dim();
  if (d < 1 || n <= d) fail(ErrorKind::InvalidArgument, "polar_factor needs n > d >= 1");
  const Matrix x = frame.centered ? frame.points : center_landmarks(frame).points;
  if (!x.allFinite()) fail(ErrorKind::DegenerateShape, "frame has non-finite coordinates");

  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  GramFactor out;
  out.basis = svd.matrixU() * svd.matrixV().transpose();
  out.spd = symmetrized(x.transpose() * x);

  const double floor = cfg.eps * out.spd.trace() / static_cast<double>(d);
  const double smallest = svd.singularValues()(d - 1);
  if (smallest * smallest < floor) {
    out.spd.diagonal().array() += floor;
    out.regularized = true;
  }
  if (!(std::sqrt(smallest * smallest + (out.regularized ? floor : 0.0)) >= cfg.eps)) {
    fail(ErrorKind::DegenerateShape, "frame collapses to fewer than d dimensions");
  }
  return out;
}

SubspaceAngles principal_angles(const GramFactor& a, const GramFactor& b) {
  return {align(a.basis, b.basis).angles};
}

Matrix grassmann_geodesic(const GramFactor& a, const GramFactor& b, double t) {
  const Alignment al = align(a.basis, b.basis);
  check_cut_locus(al);
  return aligned_geodesic(a.basis, b.basis, al, t) * al.left.transpose();
}

Matrix spd_geodesic(const Matrix& r1sq, const Matrix& r2sq, double t) {
  const auto eig1 = spd_eigen(r1sq, "first SPD block");
  spd_eigen(r2sq, "second SPD block");
  const Matrix r1 = spectral_apply(eig1, [](double l) { return std::sqrt(l); });
  const Matrix r1_inv = spectral_apply(eig1, [](double l) { return 1.0 / std::sqrt(l); });
  const auto inner = spd_eigen(symmetrized(r1_inv * r2sq * r1_inv), "relative SPD block");
  const Matrix power = spectral_apply(inner, [t](double l) { return std::exp(t * std::log(l)); });
  return symmetrized(r1 * power * r1);
}

GramFactor psd_geodesic(const GramFactor& a, const GramFactor& b, double t) {
  const Alignment al = align(a.basis, b.basis);
  check_cut_locus(al);
  const Matrix ra = symmetrized(al.left.transpose() * a.spd * al.left);
  const Matrix rb = symmetrized(al.right.transpose() * b.spd * al.right);
  GramFactor out;
  out.basis = aligned_geodesic(a.basis, b.basis, al, t);
  out.spd = spd_geodesic(ra, rb, t);
  return out;
}

StepGeometry step_geometry(const GramFactor& a, const GramFactor& b, const ManifoldConfig& cfg) {
  cfg.validate();
  const Alignment al = align(a.basis, b.basis);
  const Matrix ra = symmetrized(al.left.transpose() * a.spd * al.left);
  const Matrix rb = symmetrized(al.right.transpose() * b.spd * al.right);
  StepGeometry out;
  out.angles.angles = al.angles;
  out.log_map = spd_log_map(ra, rb);
  out.distance = al.angles.squaredNorm() + cfg.k * out.log_map.squaredNorm();
  return out;
}

double psd_distance(const GramFactor& a, const GramFactor& b, const ManifoldConfig& cfg) {
  return step_geometry(a, b, cfg).distance;
}

Index velocity_width(Index d) { return d + d * (d + 1) / 2 + 1; }

std::vector<std::string> VelocitySeries::channel_names() const {
  const Index width = values.cols();
  // Solve width = d + d(d+1)/2 + 1 for d.
  Index d = 1;
  while (velocity_width(d) < width) ++d;
  std::vector<std::string> names;
  for (Index i = 0; i < d; ++i) names.push_back("angle_" + std::to_string(i));
  for (Index i = 0; i < d; ++i) {
    for (Index j = i; j < d; ++j) names.push_back("log_" + std::to_string(i) + std::to_string(j));
  }
  names.emplace_back("distance");
  return names;
}

VelocitySeries geodesic_velocity_series(const LandmarkSequence& seq, const ManifoldConfig& cfg) {
  seq.validate();
  cfg.validate();
  const Index tau = static_cast<Index>(seq.frames.size());
  if (tau < 2) fail(ErrorKind::TooShort, "velocity series needs at least two frames");
  const Index d = seq.frames.front().dim();
  const Index width = velocity_width(d);

  std::vector<GramFactor> factors(tau);
  std::vector<bool> degenerate(tau, false);
  VelocitySeries out;
  out.frame_rate = seq.frame_rate;
  for (Index i = 0; i < tau; ++i) {
    try {
      factors[i] = polar_factor(seq.frames[i], cfg);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateShape) throw;
      degenerate[i] = true;
      out.degenerate_frames.push_back(i);
    }
  }

  out.values.resize(tau - 1, width);
  out.gap.assign(tau - 1, false);
  const double sqrt2 = std::sqrt(2.0);
  for (Index t = 0; t + 1 < tau; ++t) {
    if (degenerate[t] || degenerate[t + 1]) {
      out.values.row(t).setConstant(std::numeric_limits<double>::quiet_NaN());
      out.gap[t] = true;
      continue;
    }
    const StepGeometry step = step_geometry(factors[t], factors[t + 1], cfg);
    Index col = 0;
    for (Index i = 0; i < d; ++i) out.values(t, col++) = step.angles.angles(i);
    for (Index i = 0; i < d; ++i) {
      for (Index j = i; j < d; ++j) {
        out.values(t, col++) = (i == j ? 1.0 : sqrt2) * step.log_map(i, j);
      }
    }
    out.values(t, col) = step.distance;
  }
  return out;
}

}  // namespace oeg::manifold
