#include "oeg/ubm.hpp"

#include "oeg/error.hpp"
#include "oeg/log.hpp"
#include "oeg/parallel.hpp"
#include "oeg/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>

namespace oeg::ubm {
namespace {

constexpr Index kChunk = 256;
constexpr double kEmptyComponent = 1e-10;

// Uniform double in [0, 1) from the top 53 bits; portable across standard
// libraries, unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

// Per-component terms of log(lambda_c N(x; mu_c, diag var_c)) in a form that
// evaluates a whole block of atoms with two matrix products.
struct DensityTerms {
  Matrix inv_var;        // C x q
  Matrix mean_over_var;  // C x q
  Vector offset;         // C: log lambda_c - 1/2 (q log 2 pi + sum log var + sum mu^2/var)

  DensityTerms(const GmmModel& m, Posterior posterior) {
    const double q = static_cast<double>(m.dim());
    inv_var = m.variances.cwiseInverse();
    mean_over_var = m.means.cwiseProduct(inv_var);
    offset.resize(m.components());
    for (Index c = 0; c < m.components(); ++c) {
      const double log_det = m.variances.row(c).array().log().sum();
      const double quad = m.means.row(c).cwiseProduct(mean_over_var.row(c)).sum();
      const double log_w = posterior == Posterior::weighted ? std::log(m.weights(c)) : 0.0;
      offset(c) = log_w - 0.5 * (q * std::log(2.0 * std::numbers::pi) + log_det + quad);
    }
  }

  // rows x C matrix of joint log densities.
  Matrix log_joint(const Eigen::Ref<const Matrix>& x) const {
    Matrix out = x * mean_over_var.transpose() - 0.5 * x.cwiseAbs2() * inv_var.transpose();
    out.rowwise() += offset.transpose();
    return out;
  }
};

// Converts log joint densities to responsibilities in place and returns the
// per-row log normalizers.
Vector normalize_rows(Matrix& log_joint) {
  Vector lse(log_joint.rows());
  for (Index i = 0; i < log_joint.rows(); ++i) {
    auto row = log_joint.row(i);
    const double top = row.maxCoeff();
    if (!std::isfinite(top)) {
      row.setConstant(1.0 / static_cast<double>(row.size()));
      lse(i) = top;
      continue;
    }
    row = (row.array() - top).exp();
    const double sum = row.sum();
    row /= sum;
    lse(i) = top + std::log(sum);
  }
  return lse;
}

struct EStep {
  Vector r;
  Matrix sx;
  Matrix sxx;
  double log_likelihood = 0.0;
  Index worst_atom = 0;
  double worst_value = std::numeric_limits<double>::infinity();
};

EStep expectation(const GmmModel& model, const Matrix& atoms) {
  const DensityTerms terms(model, Posterior::weighted);
  const Index n = atoms.rows();
  const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  std::vector<EStep> partial(chunks);
  parallel_for(chunks, [&](std::size_t k) {
    const Index begin = static_cast<Index>(k) * kChunk;
    const Index rows = std::min(kChunk, n - begin);
    const auto x = atoms.middleRows(begin, rows);
    Matrix resp = terms.log_joint(x);
    const Vector lse = normalize_rows(resp);
    EStep& e = partial[k];
    e.r = resp.colwise().sum().transpose();
    e.sx = resp.transpose() * x;
    e.sxx = resp.transpose() * x.cwiseAbs2();
    e.log_likelihood = lse.sum();
    for (Index i = 0; i < rows; ++i) {
      if (lse(i) < e.worst_value) e.worst_value = lse(i), e.worst_atom = begin + i;
    }
  });
  EStep total = std::move(partial.front());
  for (std::size_t k = 1; k < chunks; ++k) {
    total.r += partial[k].r;
    total.sx += partial[k].sx;
    total.sxx += partial[k].sxx;
    total.log_likelihood += partial[k].log_likelihood;
    if (partial[k].worst_value < total.worst_value) {
      total.worst_value = partial[k].worst_value;
      total.worst_atom = partial[k].worst_atom;
    }
  }
  return total;
}

Matrix kmeans_plus_plus(const Matrix& atoms, Index components, int iters, std::mt19937_64& rng) {
  const Index n = atoms.rows();
  Matrix centers(components, atoms.cols());
  std::vector<char> chosen(n, 0);
  Index first = static_cast<Index>(uniform01(rng) * static_cast<double>(n));
  centers.row(0) = atoms.row(first);
  chosen[first] = 1;
  Vector d2 = (atoms.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < components; ++c) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (Index i = 0; i < n; ++i) {
        u -= d2(i);
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = n - 1;
    } else {
      for (Index i = 0; i < n && pick < 0; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = 1;
    centers.row(c) = atoms.row(pick);
    d2 = d2.cwiseMin((atoms.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<Index> label(n);
  for (int it = 0; it < iters; ++it) {
    Matrix sums = Matrix::Zero(components, atoms.cols());
    Vector counts = Vector::Zero(components);
    Vector best_d(n);
    for (Index i = 0; i < n; ++i) {
      Index arg = 0;
      best_d(i) = (centers.rowwise() - atoms.row(i)).rowwise().squaredNorm().minCoeff(&arg);
      label[i] = arg;
      sums.row(arg) += atoms.row(i);
      counts(arg) += 1.0;
    }
    for (Index c = 0; c < components; ++c) {
      if (counts(c) > 0.0) {
        centers.row(c) = sums.row(c) / counts(c);
      } else {
        Index far = 0;
        best_d.maxCoeff(&far);
        centers.row(c) = atoms.row(far);
        best_d(far) = 0.0;
        log::warn("k-means: empty cluster " + std::to_string(c) + " reseeded at atom " +
                  std::to_string(far));
      }
    }
  }
  return centers;
}

}  // namespace

void GmmModel::validate() const {
  const Index c = weights.size();
  if (c < 1 || means.rows() != c || variances.rows() != c || variances.cols() != means.cols()) {
    fail(ErrorKind::InvalidArgument, "mixture arrays have inconsistent shapes");
  }
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-10) {
    fail(ErrorKind::InvalidArgument, "mixture weights are not on the simplex");
  }
  if (!(variances.array() > 0.0).all()) fail(ErrorKind::InvalidArgument, "variances must be positive");
}

std::uint64_t GmmModel::fingerprint() const {
  std::uint64_t h = 14695981039346656037ull;
  const std::int64_t dims[2] = {static_cast<std::int64_t>(weights.size()),
                                static_cast<std::int64_t>(means.cols())};
  h = fnv1a(h, dims, sizeof dims);
  h = fnv1a(h, weights.data(), sizeof(double) * weights.size());
  h = fnv1a(h, means.data(), sizeof(double) * means.size());
  h = fnv1a(h, variances.data(), sizeof(double) * variances.size());
  return h;
}

double GmmModel::log_likelihood(const Eigen::Ref<const Vector>& atom) const {
  const DensityTerms terms(*this, Posterior::weighted);
  Matrix joint = terms.log_joint(atom.transpose());
  return normalize_rows(joint)(0);
}

GmmModel train_em(const Matrix& atoms, const EmOptions& options, EmTrace* trace) {
  const Index n = atoms.rows();
  const Index q = atoms.cols();
  const Index c_count = options.components;
  if (c_count < 1 || q < 1) fail(ErrorKind::InvalidArgument, "need C >= 1 and q >= 1");
  if (n < c_count) fail(ErrorKind::InvalidArgument, "fewer atoms than mixture components");
  if (!atoms.allFinite()) fail(ErrorKind::InvalidArgument, "atoms must be finite");
  if (n < 10 * c_count) {
    log::warn("only " + std::to_string(n) + " atoms for " + std::to_string(c_count) +
              " components (fewer than 10 per component)");
  }

  const Vector global_mean = atoms.colwise().mean().transpose();
  const Vector global_var =
      ((atoms.rowwise() - global_mean.transpose()).cwiseAbs2().colwise().sum() / static_cast<double>(n))
          .transpose();
  GmmModel model;
  model.seed = options.seed;
  model.variance_floor = (options.floor_frac * global_var).cwiseMax(1e-12);

  std::mt19937_64 rng(options.seed);
  model.means = kmeans_plus_plus(atoms, c_count, options.kmeans_iters, rng);
  {
    Vector counts = Vector::Zero(c_count);
    Matrix sq = Matrix::Zero(c_count, q);
    for (Index i = 0; i < n; ++i) {
      Index arg = 0;
      (model.means.rowwise() - atoms.row(i)).rowwise().squaredNorm().minCoeff(&arg);
      counts(arg) += 1.0;
      sq.row(arg) += (atoms.row(i) - model.means.row(arg)).cwiseAbs2();
    }
    model.variances.resize(c_count, q);
    for (Index c = 0; c < c_count; ++c) {
      model.variances.row(c) = counts(c) > 1.0 ? (sq.row(c) / counts(c)).eval() : global_var.transpose();
      model.variances.row(c) = model.variances.row(c).cwiseMax(model.variance_floor.transpose());
    }
    model.weights = (counts.array() + 1.0) / (counts.sum() + static_cast<double>(c_count));
  }

  EmTrace local;
  EmTrace& tr = trace ? *trace : local;
  tr = EmTrace{};
  const double dn = static_cast<double>(n);
  EStep e = expectation(model, atoms);
  tr.mean_log_likelihood.push_back(e.log_likelihood / dn);
  for (int it = 1; it <= options.max_iters; ++it) {
    bool reseeded = false;
    for (Index c = 0; c < c_count; ++c) {
      if (e.r(c) > kEmptyComponent * dn) {
        model.means.row(c) = e.sx.row(c) / e.r(c);
        const auto var = (e.sxx.row(c) / e.r(c) - model.means.row(c).cwiseAbs2()).eval();
        model.variances.row(c) = var.cwiseMax(model.variance_floor.transpose());
        model.weights(c) = e.r(c) / dn;
      } else {
        model.means.row(c) = atoms.row(e.worst_atom);
        model.variances.row(c) = global_var.transpose().cwiseMax(model.variance_floor.transpose());
        model.weights(c) = 1.0 / dn;
        reseeded = true;
        log::warn("EM: empty component " + std::to_string(c) + " reseeded at atom " +
                  std::to_string(e.worst_atom));
      }
    }
    model.weights /= model.weights.sum();
    if (reseeded) tr.reseeded_iterations.push_back(it);

    const double previous = e.log_likelihood / dn;
    e = expectation(model, atoms);
    const double current = e.log_likelihood / dn;
    tr.mean_log_likelihood.push_back(current);
    tr.iterations = it;
    if (!reseeded && std::abs(current - previous) <= options.tolerance * std::max(1.0, std::abs(previous))) {
      tr.converged = true;
      break;
    }
  }
  return model;
}

Vector responsibilities(const GmmModel& model, const Eigen::Ref<const Vector>& atom, Posterior posterior) {
  if (atom.size() != model.dim()) fail(ErrorKind::InvalidArgument, "atom dimension mismatch");
  const DensityTerms terms(model, posterior);
  Matrix joint = terms.log_joint(atom.transpose());
  normalize_rows(joint);
  return joint.row(0).transpose();
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& other) {
  if (r.size() == 0) return *this = other;
  if (other.r.size() == 0) return *this;
  if (prior_fingerprint != other.prior_fingerprint) {
    fail(ErrorKind::PriorMismatch, "statistics accumulated against different priors");
  }
  r += other.r;
  z += other.z;
  n += other.n;
  return *this;
}

SufficientStats accumulate(const GmmModel& model, const Matrix& atoms, Posterior posterior) {
  SufficientStats s;
  s.r = Vector::Zero(model.components());
  s.z = Matrix::Zero(model.components(), model.dim());
  s.prior_fingerprint = model.fingerprint();
  if (atoms.rows() == 0) return s;
  if (atoms.cols() != model.dim()) fail(ErrorKind::InvalidArgument, "atom dimension mismatch");
  const DensityTerms terms(model, posterior);
  Matrix resp = terms.log_joint(atoms);
  normalize_rows(resp);
  s.r = resp.colwise().sum().transpose();
  s.z = resp.transpose() * atoms;
  s.n = static_cast<double>(atoms.rows());
  return s;
}

AdaptedModel map_adapt(const SufficientStats& stats, const GmmModel& prior, double relevance) {
  if (!(relevance > 0.0)) fail(ErrorKind::InvalidArgument, "relevance factor must be positive");
  const std::uint64_t fp = prior.fingerprint();
  if (stats.prior_fingerprint != 0 && stats.prior_fingerprint != fp) {
    fail(ErrorKind::PriorMismatch, "statistics were accumulated against another prior");
  }
  AdaptedModel out;
  out.prior_fingerprint = fp;
  if (!(stats.n > 0.0)) {
    out.means = prior.means;
    out.weights = prior.weights;
    return out;
  }
  if (stats.r.size() != prior.components() || stats.z.cols() != prior.dim()) {
    fail(ErrorKind::InvalidArgument, "statistics shape does not match the prior");
  }
  out.means.resize(prior.components(), prior.dim());
  out.weights.resize(prior.components());
  for (Index c = 0; c < prior.components(); ++c) {
    const double rc = stats.r(c);
    out.means.row(c) = (stats.z.row(c) + relevance * prior.means.row(c)) / (rc + relevance);
    const double alpha = rc / (rc + relevance);
    out.weights(c) = alpha * rc / stats.n + (1.0 - alpha) * prior.weights(c);
  }
  out.weights /= out.weights.sum();
  return out;
}

Supervector supervector(const AdaptedModel& adapted, const GmmModel& prior) {
  const std::uint64_t fp = prior.fingerprint();
  if (adapted.prior_fingerprint != 0 && adapted.prior_fingerprint != fp) {
    fail(ErrorKind::PriorMismatch, "adapted model belongs to another prior");
  }
  const Index c_count = prior.components();
  const Index q = prior.dim();
  Supervector sv;
  sv.prior_fingerprint = fp;
  sv.values.resize(c_count * q);
  for (Index c = 0; c < c_count; ++c) {
    const double w = std::sqrt(prior.weights(c));
    for (Index d = 0; d < q; ++d) {
      sv.values(c * q + d) = w * adapted.means(c, d) / std::sqrt(prior.variances(c, d));
    }
  }
  return sv;
}

double kernel(const Supervector& a, const Supervector& b) {
  if (a.prior_fingerprint != b.prior_fingerprint || a.values.size() != b.values.size()) {
    fail(ErrorKind::PriorMismatch, "supervectors come from different background models");
  }
  return a.values.dot(b.values);
}

double kl_distance(const GmmModel& prior, const AdaptedModel& adapted) {
  double total = 0.0;
  for (Index c = 0; c < prior.components(); ++c) {
    const auto diff = (prior.means.row(c) - adapted.means.row(c)).array();
    total += prior.weights(c) * (diff.square() / prior.variances.row(c).array()).sum();
  }
  return 0.5 * total;
}

double weight_wasserstein(const GmmModel& prior, const AdaptedModel& adapted) {
  if (adapted.weights.size() != prior.components()) {
    fail(ErrorKind::InvalidArgument, "adapted weights do not match the prior");
  }
  return transport::shared_support_distance(prior.weights, adapted.weights, [&](int i, int j) {
    return (prior.means.row(i) - prior.means.row(j)).norm();
  });
}

double control_mean_dot(const Supervector& sv, const std::vector<Supervector>& controls) {
  if (controls.empty()) fail(ErrorKind::EmptyControls, "control set is empty");
  Vector mean = Vector::Zero(sv.values.size());
  for (const auto& c : controls) {
    if (c.prior_fingerprint != sv.prior_fingerprint || c.values.size() != sv.values.size()) {
      fail(ErrorKind::PriorMismatch, "control supervector from another background model");
    }
    mean += c.values;
  }
  mean /= static_cast<double>(controls.size());
  return sv.values.dot(mean);
}

}  // namespace oeg::ubm
