#include "oeg/error.hpp"
#include "oeg/manifold.hpp"

namespace oeg::manifold {
namespace {

constexpr int kPasses = 2;

Matrix normalized_shape(const LandmarkFrame& frame) {
  Matrix x = center_landmarks(frame).points;
  const double size = x.norm();
  if (!(size > 1e-12)) fail(ErrorKind::DegenerateShape, "frame has zero centroid size");
  return x / size;
}

// Rotation R (det +1) minimizing ||x R - target||_F.
Matrix optimal_rotation(const Matrix& x, const Matrix& target) {
  Eigen::JacobiSVD<Matrix> svd(x.transpose() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix u = svd.matrixU();
  const Matrix& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(u.cols() - 1) *= -1.0;
  return u * v.transpose();
}

}  // namespace

ProcrustesResult procrustes_align(const LandmarkSequence& seq) {
  seq.validate();
  if (seq.frames.empty()) fail(ErrorKind::InvalidArgument, "empty sequence");

  std::vector<Matrix> shapes;
  shapes.reserve(seq.frames.size());
  for (const auto& f : seq.frames) shapes.push_back(normalized_shape(f));

  Matrix reference = shapes.front();
  std::vector<Matrix> aligned(shapes.size());
  for (int pass = 0; pass < kPasses; ++pass) {
    Matrix mean = Matrix::Zero(reference.rows(), reference.cols());
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      aligned[i] = shapes[i] * optimal_rotation(shapes[i], reference);
      mean += aligned[i];
    }
    mean /= static_cast<double>(shapes.size());
    const double size = mean.norm();
    if (!(size > 1e-12)) fail(ErrorKind::DegenerateShape, "mean shape collapsed");
    reference = mean / size;
  }

  ProcrustesResult out;
  out.aligned.frame_rate = seq.frame_rate;
  out.aligned.subject_id = seq.subject_id;
  out.aligned.segment = seq.segment;
  for (auto& a : aligned) out.aligned.frames.push_back({std::move(a), true});
  out.mean_shape = reference;
  return out;
}

}  // namespace oeg::manifold
