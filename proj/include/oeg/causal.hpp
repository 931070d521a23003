#pragma once

// Treatment-response model: a face-dynamics x treatment x severity tensor,
// its higher-order SVD, and an exhaustive counterfactual treatment search.

#include "oeg/tensor.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oeg::causal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr int kCategories = 11;

// Pharmacological categories, in the order used for treatment vectors.
const std::array<std::string_view, kCategories>& category_names();

enum class PatientType { control, depressive_like, schizophrenic_like };

std::string_view to_string(PatientType type) noexcept;
PatientType parse_patient_type(std::string_view text);

struct SubjectRecord {
  std::string subject;
  Vector supervector;  // admission supervector for the chosen segment
  Vector treatment;    // 11 entries, >= 0, summing to 1; all zero when untreated
  int hamd_in = 0;
  int hamd_out = 0;
  PatientType patient_type = PatientType::control;

  bool treated() const;
  void validate() const;
};

// HAMD bins of fixed width with centers width/2, 3 width/2, ...
struct SeverityBins {
  int count = 13;
  double width = 4.0;

  void validate() const;
  Vector centers() const;
  // Piecewise-linear hat encoding: scores between two centers split their
  // unit mass across both bins; scores outside the center range saturate.
  Vector embed(double hamd) const;
  // Bin-center average after clipping negatives; NaN when nothing survives.
  double decode(const Vector& severity) const;
};

// Uncentered truncated SVD of the (optionally length-normalized) treated
// supervectors. Keeping the mean in the subspace keeps similarities between
// reduced vectors positive, which the multilinear prediction relies on.
struct FeatureReducer {
  Matrix basis;  // supervector dim x F, orthonormal columns
  bool normalize = true;

  static FeatureReducer fit(const Matrix& supervectors, Index features, bool normalize = true);
  Vector reduce(const Eigen::Ref<const Vector>& supervector) const;
  Index features() const { return basis.cols(); }
};

struct CausalConfig {
  Index features = 32;
  SeverityBins bins;
  bool normalize = true;
  std::array<Index, 3> ranks{0, 0, 0};  // 0 keeps the full mode dimension
  int max_active = 3;
  double tie_tolerance = 1e-9;
};

struct CohortTensor {
  Tensor3 data;  // F x 11 x V
  FeatureReducer reducer;
  SeverityBins bins;
  Index records = 0;
};

// Sum of x (x) w (x) s over records; no cohort-size requirement.
Tensor3 assemble_tensor(std::span<const Vector> reduced, std::span<const Vector> treatments,
                        std::span<const int> hamd_out, const SeverityBins& bins);

// Fits the reducer on the treated records and assembles the tensor.
// Untreated records are skipped; fewer than five treated records throws
// InsufficientCohort.
CohortTensor build_tensor(std::span<const SubjectRecord> records, const CausalConfig& config = {});

struct TuckerModel {
  Tensor3 core;
  std::array<Matrix, 3> modes;
  double reconstruction_error = 0.0;  // ||D - D_hat||_F
  double relative_error = 0.0;

  Tensor3 reconstruct() const;
};

TuckerModel hosvd(const Tensor3& data, std::array<Index, 3> ranks = {0, 0, 0});

struct SeverityPrediction {
  Vector severity;
  double hamd_out = 0.0;  // NaN when invalid
  bool valid = false;
};

SeverityPrediction predict_severity(const TuckerModel& model, const SeverityBins& bins,
                                    const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& w);

struct CounterfactualResult {
  Vector treatment;
  std::vector<int> active;  // ascending category indices
  double predicted_hamd_out = 0.0;
  bool feasible = false;
  int distance_from_clinical = 0;
  Index candidates_evaluated = 0;
};

// Every uniform-weight set of 1..max_active categories, sorted
// lexicographically.
std::vector<std::vector<int>> candidate_sets(int max_active);

Vector uniform_treatment(std::span<const int> active);

CounterfactualResult recommend(const TuckerModel& model, const SeverityBins& bins,
                               const Eigen::Ref<const Vector>& x, int hamd_in,
                               const Eigen::Ref<const Vector>& clinical_w, int max_active = 3,
                               double tie_tolerance = 1e-9);

}  // namespace oeg::causal
