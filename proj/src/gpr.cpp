#include "oeg/gpr.hpp"

#include "oeg/error.hpp"
#include "oeg/log.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace oeg::gpr {
namespace {

Vector unit(const Eigen::Ref<const Vector>& x) {
  const double norm = x.norm();
  return norm > 0.0 ? Vector(x / norm) : Vector(x);
}

}  // namespace

Vector GpModel::prepare(const Eigen::Ref<const Vector>& x) const {
  return config_.normalize ? unit(x) : Vector(x);
}

GpModel GpModel::fit(const Matrix& inputs, const Vector& targets, const GpConfig& config) {
  if (inputs.rows() < 2) fail(ErrorKind::InvalidArgument, "GP needs at least two training points");
  if (inputs.rows() != targets.size()) fail(ErrorKind::InvalidArgument, "inputs and targets differ in length");
  if (!targets.allFinite() || !inputs.allFinite()) fail(ErrorKind::InvalidArgument, "non-finite training data");
  if (!(config.bias_var >= 0.0) || !(config.noise_var > 0.0)) {
    fail(ErrorKind::InvalidArgument, "GP needs bias_var >= 0 and noise_var > 0");
  }

  GpModel model;
  model.config_ = config;
  model.targets_ = targets;
  model.inputs_.resize(inputs.rows(), inputs.cols());
  for (Index i = 0; i < inputs.rows(); ++i) {
    model.inputs_.row(i) = model.prepare(inputs.row(i).transpose()).transpose();
  }

  Matrix k = model.inputs_ * model.inputs_.transpose();
  k.array() += config.bias_var;
  double noise = config.noise_var;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Matrix system = k;
    system.diagonal().array() += noise;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() == Eigen::Success) {
      model.alpha_ = llt.solve(targets);
      model.noise_var_ = noise;
      model.noise_inflated_ = attempt > 0;
      return model;
    }
    log::warn("GP: kernel system not positive definite, raising noise variance tenfold");
    noise *= 10.0;
  }
  fail(ErrorKind::SingularSystem, "GP kernel system is singular");
}

double GpModel::predict_mean(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != inputs_.cols()) fail(ErrorKind::InvalidArgument, "GP input dimension mismatch");
  const Vector kx = (inputs_ * prepare(x)).array() + config_.bias_var;
  return kx.dot(alpha_);
}

Vector GpModel::predict_means(const Matrix& inputs) const {
  Vector out(inputs.rows());
  for (Index i = 0; i < inputs.rows(); ++i) out(i) = predict_mean(inputs.row(i).transpose());
  return out;
}

CvReport loso_cv(std::span<const Sample> samples, const GpConfig& config, const std::string& target_name) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = by_subject.try_emplace(samples[i].subject);
    if (inserted) order.push_back(samples[i].subject);
    it->second.push_back(i);
  }
  if (order.size() < 3) fail(ErrorKind::InvalidArgument, "LOSO needs at least three subjects");
  const Index dim = samples.front().x.size();

  CvReport report;
  report.target_name = target_name;
  report.subjects = static_cast<Index>(order.size());
  for (const auto& subject : order) {
    const auto& test = by_subject[subject];
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].subject != subject) train.push_back(i);
    }
    Matrix x(static_cast<Index>(train.size()), dim);
    Vector y(static_cast<Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
      x.row(static_cast<Index>(r)) = samples[train[r]].x.transpose();
      y(static_cast<Index>(r)) = samples[train[r]].y;
    }
    if (y.maxCoeff() - y.minCoeff() <= 0.0) {
      log::warn("LOSO: constant training targets when holding out '" + subject + "'; fold skipped");
      report.skipped_subjects.push_back(subject);
      continue;
    }
    const GpModel model = GpModel::fit(x, y, config);
    ++report.folds;
    for (std::size_t i : test) {
      report.predictions.push_back(
          {samples[i].subject, samples[i].id, samples[i].y, model.predict_mean(samples[i].x)});
    }
  }

  std::vector<double> pred, truth;
  for (const auto& p : report.predictions) pred.push_back(p.y_pred), truth.push_back(p.y_true);
  report.pearson_r = pearson(pred, truth);
  return report;
}

double pearson(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.size() < 2) {
    fail(ErrorKind::InvalidArgument, "pearson needs two equal-length series of length >= 2");
  }
  const auto n = static_cast<Index>(pred.size());
  const Eigen::Map<const Vector> a(pred.data(), n);
  const Eigen::Map<const Vector> b(target.data(), n);
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  const double va = da.squaredNorm();
  const double vb = db.squaredNorm();
  if (!(va > 0.0) || !(vb > 0.0)) fail(ErrorKind::ZeroVariance, "pearson of a constant series");
  return std::clamp(da.dot(db) / std::sqrt(va * vb), -1.0, 1.0);
}

bool responder_label(int hamd_in, int hamd_out) {
  if (hamd_in <= 0 || hamd_in > 52 || hamd_out < 0 || hamd_out > 52) {
    fail(ErrorKind::InvalidScore, "HAMD scores must lie in [0, 52] with a positive admission score");
  }
  // (in - out) / in >= 3/10, kept in integers so the boundary is exact.
  return 10 * (hamd_in - hamd_out) >= 3 * hamd_in;
}

}  // namespace oeg::gpr
