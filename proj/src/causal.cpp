#include "oeg/causal.hpp"

#include "oeg/error.hpp"
#include "oeg/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oeg::causal {
namespace {

void fix_signs(Matrix& basis) {
  for (Index j = 0; j < basis.cols(); ++j) {
    Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;
  }
}

std::vector<int> active_set(const Eigen::Ref<const Vector>& w) {
  std::vector<int> out;
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) > 0.0) out.push_back(static_cast<int>(i));
  }
  return out;
}

int hamming(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  return static_cast<int>(diff.size());
}

}  // namespace

const std::array<std::string_view, kCategories>& category_names() {
  static const std::array<std::string_view, kCategories> names{
      "Antipsychotica", "Antikonvulsiva/-epileptica", "Anxiolytica (upon need)",
      "Anxiolytica (daily)", "Opiode", "SSRI", "SNRI", "SNDRI", "Tetracyclic AD",
      "Tricyclic AD", "MAO"};
  return names;
}

std::string_view to_string(PatientType type) noexcept {
  switch (type) {
    case PatientType::control: return "control";
    case PatientType::depressive_like: return "depressive_like";
    case PatientType::schizophrenic_like: return "schizophrenic_like";
  }
  return "unknown";
}

PatientType parse_patient_type(std::string_view text) {
  if (text == "control") return PatientType::control;
  if (text == "depressive_like") return PatientType::depressive_like;
  if (text == "schizophrenic_like") return PatientType::schizophrenic_like;
  fail(ErrorKind::InvalidArgument, "unknown patient type '" + std::string(text) + "'");
}

bool SubjectRecord::treated() const { return treatment.size() == kCategories && treatment.sum() > 0.0; }

void SubjectRecord::validate() const {
  if (treatment.size() != kCategories) {
    fail(ErrorKind::InvalidArgument, "treatment vector must have 11 entries");
  }
  if ((treatment.array() < 0.0).any() || !treatment.allFinite()) {
    fail(ErrorKind::InvalidArgument, "treatment entries must be finite and nonnegative");
  }
  const double sum = treatment.sum();
  if (sum != 0.0 && std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorKind::InvalidArgument, "treatment vector of '" + subject + "' does not sum to 1");
  }
  if (hamd_in < 0 || hamd_in > 52 || hamd_out < 0 || hamd_out > 52) {
    fail(ErrorKind::InvalidScore, "HAMD scores must lie in [0, 52]");
  }
  if (!supervector.allFinite()) fail(ErrorKind::InvalidArgument, "non-finite supervector");
}

void SeverityBins::validate() const {
  if (count < 2) fail(ErrorKind::InvalidArgument, "need at least two severity bins");
  if (!(width > 0.0)) fail(ErrorKind::InvalidArgument, "severity bin width must be positive");
}

Vector SeverityBins::centers() const {
  Vector c(count);
  for (int v = 0; v < count; ++v) c(v) = width * (v + 0.5);
  return c;
}

Vector SeverityBins::embed(double hamd) const {
  validate();
  Vector s = Vector::Zero(count);
  const double u = std::clamp((hamd - 0.5 * width) / width, 0.0, static_cast<double>(count - 1));
  const int lo = std::min(static_cast<int>(std::floor(u)), count - 1);
  const double frac = u - lo;
  s(lo) = 1.0 - frac;
  if (lo + 1 < count) s(lo + 1) += frac;
  return s;
}

double SeverityBins::decode(const Vector& severity) const {
  if (severity.size() != count) fail(ErrorKind::InvalidArgument, "severity vector length mismatch");
  const Vector clipped = severity.cwiseMax(0.0);
  const double mass = clipped.sum();
  if (!(mass > 0.0) || !std::isfinite(mass)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(clipped.dot(centers()) / mass, 0.0, 52.0);
}

FeatureReducer FeatureReducer::fit(const Matrix& supervectors, Index features, bool normalize) {
  if (supervectors.rows() == 0) fail(ErrorKind::InsufficientCohort, "no supervectors to reduce");
  if (features < 1) fail(ErrorKind::InvalidArgument, "feature count must be positive");
  Matrix x = supervectors;
  if (normalize) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double n = x.row(i).norm();
      if (n > 0.0) x.row(i) /= n;
    }
  }
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(x.rows(), x.cols())) *
                     std::numeric_limits<double>::epsilon() * (s.size() ? s(0) : 0.0);
  const Index rank = s.size() && s(0) > 0.0 ? (s.array() > tol).count() : 0;
  if (rank == 0) fail(ErrorKind::RankTooLow, "supervectors are all zero");
  const Index f = std::min(features, rank);
  if (f < features) {
    log::warn("causal: reducing to " + std::to_string(f) + " features (rank-limited, requested " +
              std::to_string(features) + ")");
  }
  FeatureReducer out;
  out.normalize = normalize;
  out.basis = svd.matrixV().leftCols(f);
  fix_signs(out.basis);
  return out;
}

Vector FeatureReducer::reduce(const Eigen::Ref<const Vector>& supervector) const {
  if (supervector.size() != basis.rows()) fail(ErrorKind::InvalidArgument, "supervector dimension mismatch");
  Vector x = supervector;
  if (normalize) {
    const double n = x.norm();
    if (n > 0.0) x /= n;
  }
  return basis.transpose() * x;
}

Tensor3 assemble_tensor(std::span<const Vector> reduced, std::span<const Vector> treatments,
                        std::span<const int> hamd_out, const SeverityBins& bins) {
  bins.validate();
  if (reduced.size() != treatments.size() || reduced.size() != hamd_out.size()) {
    fail(ErrorKind::InvalidArgument, "record fields differ in length");
  }
  if (reduced.empty()) fail(ErrorKind::InsufficientCohort, "no records");
  const Index f = reduced.front().size();
  Tensor3 data({f, kCategories, bins.count});
  for (std::size_t r = 0; r < reduced.size(); ++r) {
    if (reduced[r].size() != f || treatments[r].size() != kCategories) {
      fail(ErrorKind::InvalidArgument, "record dimensions disagree");
    }
    data += Tensor3::outer(reduced[r], treatments[r], bins.embed(hamd_out[r]));
  }
  return data;
}

CohortTensor build_tensor(std::span<const SubjectRecord> records, const CausalConfig& config) {
  std::vector<const SubjectRecord*> treated;
  for (const auto& r : records) {
    r.validate();
    if (r.treated()) treated.push_back(&r);
  }
  if (treated.size() < 5) {
    fail(ErrorKind::InsufficientCohort,
         "need at least 5 treated records, got " + std::to_string(treated.size()));
  }
  const Index dim = treated.front()->supervector.size();
  Matrix stacked(static_cast<Index>(treated.size()), dim);
  for (std::size_t i = 0; i < treated.size(); ++i) {
    if (treated[i]->supervector.size() != dim) fail(ErrorKind::InvalidArgument, "supervector dimensions differ");
    stacked.row(static_cast<Index>(i)) = treated[i]->supervector.transpose();
  }

  CohortTensor out;
  out.bins = config.bins;
  out.reducer = FeatureReducer::fit(stacked, config.features, config.normalize);
  std::vector<Vector> reduced, treatments;
  std::vector<int> scores;
  for (const auto* r : treated) {
    reduced.push_back(out.reducer.reduce(r->supervector));
    treatments.push_back(r->treatment);
    scores.push_back(r->hamd_out);
  }
  out.data = assemble_tensor(reduced, treatments, scores, config.bins);
  out.records = static_cast<Index>(treated.size());
  return out;
}

Tensor3 TuckerModel::reconstruct() const {
  return core.mode_product(0, modes[0]).mode_product(1, modes[1]).mode_product(2, modes[2]);
}

TuckerModel hosvd(const Tensor3& data, std::array<Index, 3> ranks) {
  TuckerModel model;
  for (int k = 0; k < 3; ++k) {
    const Index n = data.dim(k);
    Index r = ranks[static_cast<std::size_t>(k)];
    if (r == 0) r = n;
    if (r < 0 || r > n) {
      fail(ErrorKind::RankTooLarge, "rank " + std::to_string(r) + " exceeds mode-" + std::to_string(k + 1) +
                                        " dimension " + std::to_string(n));
    }
    Eigen::JacobiSVD<Matrix> svd(data.unfold(k), Eigen::ComputeFullU);
    Matrix u = svd.matrixU().leftCols(r);
    fix_signs(u);
    model.modes[static_cast<std::size_t>(k)] = std::move(u);
  }
  model.core = data.mode_product(0, model.modes[0].transpose())
                   .mode_product(1, model.modes[1].transpose())
                   .mode_product(2, model.modes[2].transpose());
  model.reconstruction_error = (data - model.reconstruct()).norm();
  const double norm = data.norm();
  model.relative_error = norm > 0.0 ? model.reconstruction_error / norm : 0.0;
  return model;
}

SeverityPrediction predict_severity(const TuckerModel& model, const SeverityBins& bins,
                                    const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& w) {
  const auto& [u1, u2, u3] = model.modes;
  if (x.size() != u1.rows() || w.size() != u2.rows() || u3.rows() != bins.count) {
    fail(ErrorKind::InvalidArgument, "prediction dimensions do not match the model");
  }
  const Vector a = u1.transpose() * x;
  const Vector b = u2.transpose() * w;
  const auto& z = model.core;
  Vector c = Vector::Zero(z.dim(2));
  for (Index k = 0; k < z.dim(2); ++k)
    for (Index j = 0; j < z.dim(1); ++j)
      for (Index i = 0; i < z.dim(0); ++i) c(k) += z(i, j, k) * a(i) * b(j);

  SeverityPrediction out;
  out.severity = u3 * c;
  out.hamd_out = bins.decode(out.severity);
  out.valid = std::isfinite(out.hamd_out);
  return out;
}

std::vector<std::vector<int>> candidate_sets(int max_active) {
  if (max_active < 1 || max_active > kCategories) {
    fail(ErrorKind::InvalidArgument, "max_active must lie in [1, 11]");
  }
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  // Depth-first in ascending order yields lexicographic order directly.
  auto extend = [&](auto&& self, int next) -> void {
    for (int c = next; c < kCategories; ++c) {
      current.push_back(c);
      out.push_back(current);
      if (static_cast<int>(current.size()) < max_active) self(self, c + 1);
      current.pop_back();
    }
  };
  extend(extend, 0);
  return out;
}

Vector uniform_treatment(std::span<const int> active) {
  Vector w = Vector::Zero(kCategories);
  for (int c : active) w(c) = 1.0 / static_cast<double>(active.size());
  return w;
}

CounterfactualResult recommend(const TuckerModel& model, const SeverityBins& bins,
                               const Eigen::Ref<const Vector>& x, int hamd_in,
                               const Eigen::Ref<const Vector>& clinical_w, int max_active,
                               double tie_tolerance) {
  if (hamd_in <= 0) fail(ErrorKind::InvalidScore, "recommendation needs a positive admission HAMD");
  if (clinical_w.size() != kCategories) fail(ErrorKind::InvalidArgument, "clinical treatment must have 11 entries");
  const auto clinical = active_set(clinical_w);
  const auto sets = candidate_sets(max_active);
  const double bound = 0.5 * static_cast<double>(hamd_in);

  struct Scored {
    std::size_t index;
    double predicted;
    bool feasible;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto p = predict_severity(model, bins, x, uniform_treatment(sets[i]));
    if (!p.valid) continue;
    scored.push_back({i, p.hamd_out, p.hamd_out <= bound});
  }

  CounterfactualResult result;
  result.candidates_evaluated = static_cast<Index>(sets.size());
  if (scored.empty()) {
    result.treatment = Vector::Zero(kCategories);
    result.predicted_hamd_out = std::numeric_limits<double>::quiet_NaN();
    result.distance_from_clinical = static_cast<int>(clinical.size());
    return result;
  }

  const bool any_feasible = std::any_of(scored.begin(), scored.end(), [](const Scored& s) { return s.feasible; });
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : scored) {
    if (s.feasible == any_feasible) best = std::min(best, s.predicted);
  }
  // Among near-minimal candidates prefer the smallest departure from the
  // clinical prescription; candidate order already breaks remaining ties
  // lexicographically.
  const Scored* chosen = nullptr;
  int chosen_distance = 0;
  for (const auto& s : scored) {
    if (s.feasible != any_feasible || s.predicted > best + tie_tolerance) continue;
    const int d = hamming(sets[s.index], clinical);
    if (!chosen || d < chosen_distance) {
      chosen = &s;
      chosen_distance = d;
    }
  }

  result.active = sets[chosen->index];
  result.treatment = uniform_treatment(result.active);
  result.predicted_hamd_out = chosen->predicted;
  result.feasible = chosen->feasible;
  result.distance_from_clinical = chosen_distance;
  return result;
}

}  // namespace oeg::causal
