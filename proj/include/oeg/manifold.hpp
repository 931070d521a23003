#pragma once

// Shape geometry on the cone of rank-d positive semidefinite matrices.
//
// A landmark frame X (n x d, centered) is represented by its Gram matrix
// G = X X^T, factored as G = U R^2 U^T with U on the Stiefel manifold and
// R^2 symmetric positive definite. Distances and geodesics combine the
// Grassmann part (span of U) with the affine-invariant SPD part (R^2).

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace oeg::manifold {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct LandmarkFrame {
  Matrix points;  // n x d, one landmark per row
  bool centered = false;

  Index count() const { return points.rows(); }
  Index dim() const { return points.cols(); }
};

enum class Segment { full, interview, mimic, story };

std::string_view to_string(Segment segment);
Segment parse_segment(std::string_view name);

struct LandmarkSequence {
  std::vector<LandmarkFrame> frames;
  double frame_rate = 25.0;
  std::string subject_id;
  Segment segment = Segment::full;

  // Throws InvalidArgument when frames disagree in shape, n <= d, or the
  // frame rate is not positive.
  void validate() const;
};

struct GramFactor {
  Matrix basis;  // n x d, orthonormal columns
  Matrix spd;    // d x d, symmetric positive definite (R^2)
  bool regularized = false;

  Matrix gram() const { return basis * spd * basis.transpose(); }
};

// Principal angles in ascending order, each in [0, pi/2].
struct SubspaceAngles {
  Vector angles;

  double squared_norm() const { return angles.squaredNorm(); }
};

struct ManifoldConfig {
  double k = 1.0;     // weight of the SPD term in the distance
  double eps = 1e-8;  // relative regularization floor for X^T X

  void validate() const;
};

LandmarkFrame center_landmarks(const LandmarkFrame& frame);

// Entry (i, j) is the squared Euclidean distance between landmarks i and j.
Matrix squared_distance_matrix(const LandmarkFrame& frame);

Matrix gram(const LandmarkFrame& frame);

// Polar factorization X = U R, returned as (U, R^2 = X^T X). Uncentered
// frames are centered first. Near-singular X^T X (smallest eigenvalue below
// eps * trace / d) gets eps * trace / d added to its diagonal and the result
// is marked regularized; throws DegenerateShape when the regularized smallest
// singular value is still below eps.
GramFactor polar_factor(const LandmarkFrame& frame, const ManifoldConfig& cfg = {});

SubspaceAngles principal_angles(const GramFactor& a, const GramFactor& b);

// Orthonormal n x d basis of the Grassmann geodesic from span(a) (t = 0) to
// span(b) (t = 1). At t = 0 the result equals a.basis. Throws CutLocus when a
// principal angle is within 1e-6 of pi/2.
Matrix grassmann_geodesic(const GramFactor& a, const GramFactor& b, double t);

// Affine-invariant SPD geodesic R1 exp(t log(R1^-1 R2^2 R1^-1)) R1.
Matrix spd_geodesic(const Matrix& r1sq, const Matrix& r2sq, double t);

// Point at parameter t on the curve U(t) R^2(t) U(t)^T joining the Gram
// matrices of a and b.
GramFactor psd_geodesic(const GramFactor& a, const GramFactor& b, double t);

// Squared curve length ||Theta||_F^2 + k ||log(R1^-1 R2^2 R1^-1)||_F^2.
double psd_distance(const GramFactor& a, const GramFactor& b, const ManifoldConfig& cfg = {});

// Relative geometry of two factors after rotating both bases onto their
// principal vectors. `log_map` is log(R1^-1 R2^2 R1^-1) in that frame.
struct StepGeometry {
  SubspaceAngles angles;
  Matrix log_map;
  double distance = 0.0;
};

StepGeometry step_geometry(const GramFactor& a, const GramFactor& b, const ManifoldConfig& cfg = {});

// Width of one velocity row for ambient dimension d: d + d(d+1)/2 + 1.
Index velocity_width(Index d);

// Per-step features of the shape geodesic between consecutive frames:
// principal angles, the upper triangle of the SPD log map (off-diagonals
// scaled by sqrt 2) and the scalar distance. Steps that touch a degenerate
// frame are NaN rows marked in `gap`.
struct VelocitySeries {
  Matrix values;  // (tau - 1) x velocity_width(d)
  std::vector<bool> gap;
  std::vector<Index> degenerate_frames;
  double frame_rate = 25.0;

  std::vector<std::string> channel_names() const;
};

VelocitySeries geodesic_velocity_series(const LandmarkSequence& seq, const ManifoldConfig& cfg = {});

// Generalized Procrustes alignment (two passes) of every frame onto the
// sequence mean shape. Frames come back centered with unit Frobenius norm.
struct ProcrustesResult {
  LandmarkSequence aligned;
  Matrix mean_shape;
};

ProcrustesResult procrustes_align(const LandmarkSequence& seq);

}  // namespace oeg::manifold
