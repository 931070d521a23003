#pragma once

// Universal background model: a diagonal-covariance Gaussian mixture trained
// by EM over VAR coefficient atoms, relevance-MAP adaptation per recording,
// and the supervector embedding whose dot product is the sequence kernel.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace oeg::ubm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct GmmModel {
  Vector weights;    // C, on the simplex
  Matrix means;      // C x q
  Matrix variances;  // C x q, diagonal covariances
  Vector variance_floor;  // q
  std::uint64_t seed = 0;

  Index components() const { return weights.size(); }
  Index dim() const { return means.cols(); }

  void validate() const;

  // Stable identity of the parameters (FNV-1a over the raw arrays); two
  // supervectors are comparable only when their priors share it.
  std::uint64_t fingerprint() const;

  // log sum_c w_c N(x; mu_c, diag var_c), evaluated with max subtraction.
  double log_likelihood(const Eigen::Ref<const Vector>& atom) const;
};

struct EmOptions {
  Index components = 64;
  std::uint64_t seed = 7;
  int max_iters = 50;
  double floor_frac = 1e-3;
  int kmeans_iters = 10;
  double tolerance = 1e-10;  // relative change of the mean log-likelihood
};

struct EmTrace {
  std::vector<double> mean_log_likelihood;  // one entry per evaluated parameter set
  std::vector<int> reseeded_iterations;     // iterations where an empty component was reseeded
  int iterations = 0;
  bool converged = false;
};

// Seeded k-means++ initialization followed by EM. Variances are floored at
// floor_frac times the global per-dimension variance.
GmmModel train_em(const Matrix& atoms, const EmOptions& options, EmTrace* trace = nullptr);

enum class Posterior {
  weighted,    // r_i(c) proportional to lambda_c N(x_i; mu_c, sigma_c)
  unweighted,  // mixture weights omitted from the numerator and denominator
};

Vector responsibilities(const GmmModel& model, const Eigen::Ref<const Vector>& atom,
                        Posterior posterior = Posterior::weighted);

struct SufficientStats {
  Vector r;  // C soft counts
  Matrix z;  // C x q responsibility-weighted sums
  double n = 0.0;
  std::uint64_t prior_fingerprint = 0;

  SufficientStats& operator+=(const SufficientStats& other);
};

SufficientStats accumulate(const GmmModel& model, const Matrix& atoms,
                           Posterior posterior = Posterior::weighted);

struct AdaptedModel {
  Matrix means;    // C x q
  Vector weights;  // C
  std::uint64_t prior_fingerprint = 0;
};

// mu_c = (z_c + tau mu_hat_c) / (r_c + tau); lambda'_c interpolates the
// empirical occupancy and the prior weight with alpha_c = r_c / (r_c + tau).
AdaptedModel map_adapt(const SufficientStats& stats, const GmmModel& prior, double relevance = 16.0);

struct Supervector {
  Vector values;  // C q
  std::string subject_id;
  std::string segment;
  std::uint64_t prior_fingerprint = 0;
};

// Stacked sqrt(lambda_c) sigma_c^{-1/2} mu_c using prior weights and
// variances with the adapted means.
Supervector supervector(const AdaptedModel& adapted, const GmmModel& prior);

// Throws PriorMismatch when the supervectors come from different priors.
double kernel(const Supervector& a, const Supervector& b);

// 1/2 sum_c lambda_c (mu_hat_c - mu_c)^T sigma_c^{-1} (mu_hat_c - mu_c).
double kl_distance(const GmmModel& prior, const AdaptedModel& adapted);

// Exact optimal transport between the prior and adapted weights placed on
// the prior means, Euclidean ground cost.
double weight_wasserstein(const GmmModel& prior, const AdaptedModel& adapted);

// Throws EmptyControls for an empty control set.
double control_mean_dot(const Supervector& sv, const std::vector<Supervector>& controls);

}  // namespace oeg::ubm
