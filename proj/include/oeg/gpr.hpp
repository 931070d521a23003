#pragma once

// Gaussian-process regression with the dot-product covariance
// k(x, x') = bias_var + x . x', leave-one-subject-out evaluation and
// Pearson scoring.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace oeg::gpr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct GpConfig {
  double bias_var = 1.0;   // sigma_0^2
  double noise_var = 0.1;  // sigma_n^2
  bool normalize = true;   // scale every input to unit Euclidean norm
};

class GpModel {
 public:
  // Rows of `inputs` are training points. On a failed Cholesky the noise is
  // raised tenfold once (noise_inflated() reports it); a second failure
  // throws SingularSystem.
  static GpModel fit(const Matrix& inputs, const Vector& targets, const GpConfig& config = {});

  double predict_mean(const Eigen::Ref<const Vector>& x) const;
  Vector predict_means(const Matrix& inputs) const;

  const Vector& alpha() const { return alpha_; }
  const GpConfig& config() const { return config_; }
  double noise_var() const { return noise_var_; }
  bool noise_inflated() const { return noise_inflated_; }

 private:
  Vector prepare(const Eigen::Ref<const Vector>& x) const;

  GpConfig config_;
  Matrix inputs_;
  Vector targets_;
  Vector alpha_;
  double noise_var_ = 0.0;
  bool noise_inflated_ = false;
};

struct Sample {
  std::string subject;
  std::string id;  // recording or segment identifier within the subject
  Vector x;
  double y = 0.0;
};

struct Prediction {
  std::string subject;
  std::string id;
  double y_true = 0.0;
  double y_pred = 0.0;
};

struct CvReport {
  std::string target_name;
  std::vector<Prediction> predictions;  // subject order of first appearance
  std::vector<std::string> skipped_subjects;  // folds whose training targets were constant
  Index folds = 0;
  Index subjects = 0;
  double pearson_r = 0.0;
};

// Every subject is one test fold; all of its samples leave the training set
// together. Throws InvalidArgument for fewer than three subjects.
CvReport loso_cv(std::span<const Sample> samples, const GpConfig& config = {},
                 const std::string& target_name = "target");

// Sample correlation. Throws ZeroVariance when either side is constant and
// InvalidArgument on length mismatch or fewer than two points.
double pearson(std::span<const double> pred, std::span<const double> target);

// True iff (hamd_in - hamd_out) / hamd_in >= 0.30; scores must lie in
// [0, 52] and hamd_in must be positive (InvalidScore otherwise).
bool responder_label(int hamd_in, int hamd_out);

}  // namespace oeg::gpr
