#include "oeg/dynamics.hpp"

#include "oeg/error.hpp"
#include "oeg/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oeg::dynamics {
namespace {

constexpr double kConditionLimit = 1e12;
constexpr double kRidgeFactor = 1e-6;

bool row_finite(const Matrix& m, Index r) { return m.row(r).allFinite(); }

}  // namespace

void WindowSpec::validate() const {
  if (!(length_s > 0.0)) fail(ErrorKind::InvalidArgument, "window length must be positive");
  if (!(overlap_s >= 0.0 && overlap_s < length_s)) {
    fail(ErrorKind::InvalidArgument, "window overlap must lie in [0, length)");
  }
}

ChannelSeries assemble_channels(const ChannelSeries& geodesic, std::span<const ChannelSeries> aux,
                                ConstantChannels constant) {
  std::vector<const ChannelSeries*> parts{&geodesic};
  for (const auto& a : aux) parts.push_back(&a);

  Index shortest = geodesic.length();
  Index longest = geodesic.length();
  Index width = 0;
  for (const auto* p : parts) {
    if (std::abs(p->frame_rate - geodesic.frame_rate) > 1e-9 * geodesic.frame_rate) {
      fail(ErrorKind::RateMismatch, "channel series have different frame rates");
    }
    shortest = std::min(shortest, p->length());
    longest = std::max(longest, p->length());
    width += p->width();
  }
  if (longest - shortest > 1) {
    fail(ErrorKind::LengthMismatch, "channel series lengths differ by more than one frame");
  }

  ChannelSeries joined;
  joined.frame_rate = geodesic.frame_rate;
  joined.values.resize(shortest, width);
  Index col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& p = *parts[k];
    joined.values.middleCols(col, p.width()) = p.values.topRows(shortest);
    for (Index j = 0; j < p.width(); ++j) {
      const bool named = static_cast<Index>(p.channel_names.size()) == p.width();
      joined.channel_names.push_back(named ? p.channel_names[j]
                                           : "s" + std::to_string(k) + "_" + std::to_string(j));
    }
    col += p.width();
  }

  ChannelSeries out;
  out.frame_rate = joined.frame_rate;
  std::vector<Index> keep;
  for (Index j = 0; j < width; ++j) {
    auto column = joined.values.col(j);
    double sum = 0.0, count = 0.0;
    for (Index t = 0; t < shortest; ++t) {
      if (std::isfinite(column(t))) sum += column(t), count += 1.0;
    }
    const double mean = count > 0.0 ? sum / count : 0.0;
    double ss = 0.0;
    for (Index t = 0; t < shortest; ++t) {
      if (std::isfinite(column(t))) ss += (column(t) - mean) * (column(t) - mean);
    }
    const double sd = count > 1.0 ? std::sqrt(ss / count) : 0.0;
    if (!(sd > 1e-10 * std::max(1.0, std::abs(mean)))) {
      log::warn("channel '" + joined.channel_names[j] + "' has zero variance");
      if (constant == ConstantChannels::drop) continue;
      for (Index t = 0; t < shortest; ++t) {
        if (std::isfinite(column(t))) column(t) = 0.0;
      }
    } else {
      for (Index t = 0; t < shortest; ++t) column(t) = (column(t) - mean) / sd;
    }
    keep.push_back(j);
  }
  out.values.resize(shortest, static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.values.col(static_cast<Index>(i)) = joined.values.col(keep[i]);
    out.channel_names.push_back(joined.channel_names[keep[i]]);
  }
  return out;
}

Index numerical_rank(const Matrix& data) {
  if (data.rows() == 0 || data.cols() == 0) return 0;
  const Matrix centered = data.rowwise() - data.colwise().mean();
  Eigen::BDCSVD<Matrix> svd(centered);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double tol = static_cast<double>(std::max(data.rows(), data.cols())) *
                     std::numeric_limits<double>::epsilon() * s(0);
  return (s.array() > tol).count();
}

ReducedBasis fit_basis(const Matrix& data, Index q) {
  const Index m = data.cols();
  if (q < 1 || q > m) fail(ErrorKind::InvalidArgument, "reduction dimension must satisfy 1 <= q <= m");
  if (data.rows() < 1 || !data.allFinite()) {
    fail(ErrorKind::InvalidArgument, "basis fitting needs finite rows");
  }
  ReducedBasis out;
  out.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - out.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(data.rows(), m)) *
                     std::numeric_limits<double>::epsilon() * (s.size() ? s(0) : 0.0);
  const Index rank = s.size() && s(0) > 0.0 ? (s.array() > tol).count() : 0;
  if (q > rank) {
    fail(ErrorKind::RankTooLow, "requested " + std::to_string(q) + " dimensions but data rank is " +
                                    std::to_string(rank));
  }
  out.projection = svd.matrixV().leftCols(q);
  // Deterministic sign: the largest-magnitude entry of each direction is positive.
  for (Index j = 0; j < q; ++j) {
    Index arg = 0;
    out.projection.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.projection(arg, j) < 0.0) out.projection.col(j) *= -1.0;
  }
  out.singular_values = s;
  const double total = s.squaredNorm();
  out.captured_variance = total > 0.0 ? s.head(q).squaredNorm() / total : 1.0;
  return out;
}

Matrix apply_basis(const Matrix& data, const ReducedBasis& basis) {
  if (data.cols() != basis.mean.size()) fail(ErrorKind::InvalidArgument, "basis width mismatch");
  return (data.rowwise() - basis.mean.transpose()) * basis.projection;
}

ChannelSeries apply_basis(const ChannelSeries& series, const ReducedBasis& basis,
                          const std::string& prefix) {
  ChannelSeries out;
  out.frame_rate = series.frame_rate;
  out.values = apply_basis(series.values, basis);
  for (Index j = 0; j < basis.dim(); ++j) out.channel_names.push_back(prefix + std::to_string(j));
  return out;
}

Index interpolate_gaps(ChannelSeries& series, Index max_gap) {
  Matrix& v = series.values;
  const Index rows = v.rows();
  Index filled = 0;
  Index t = 0;
  while (t < rows) {
    if (row_finite(v, t)) {
      ++t;
      continue;
    }
    Index end = t;
    while (end < rows && !row_finite(v, end)) ++end;
    const Index run = end - t;
    if (t > 0 && end < rows && run <= max_gap) {
      const auto before = v.row(t - 1).eval();
      const auto after = v.row(end).eval();
      for (Index r = t; r < end; ++r) {
        const double w = static_cast<double>(r - t + 1) / static_cast<double>(run + 1);
        v.row(r) = (1.0 - w) * before + w * after;
      }
      filled += run;
    }
    t = end;
  }
  return filled;
}

Index window_length(const ChannelSeries& series, const WindowSpec& spec) {
  return static_cast<Index>(std::lround(spec.length_s * series.frame_rate));
}

Index window_hop(const ChannelSeries& series, const WindowSpec& spec) {
  return std::max<Index>(1, std::lround((spec.length_s - spec.overlap_s) * series.frame_rate));
}

std::vector<Window> window(const ChannelSeries& series, const WindowSpec& spec) {
  spec.validate();
  const Index len = window_length(series, spec);
  const Index hop = window_hop(series, spec);
  if (len < 1 || series.length() < len) {
    fail(ErrorKind::TooShort, "series of " + std::to_string(series.length()) +
                                  " frames is shorter than one window of " + std::to_string(len));
  }
  std::vector<Window> out;
  for (Index start = 0; start + len <= series.length(); start += hop) {
    out.push_back({start, series.values.middleRows(start, len)});
  }
  return out;
}

VarModel fit_var(const Matrix& block, int p) {
  if (p < 1) fail(ErrorKind::InvalidArgument, "VAR order must be >= 1");
  const Index rows = block.rows();
  const Index m = block.cols();
  const Index k = m * p + 1;
  const Index n = rows - p;
  if (m < 1 || rows <= m * p + 1 || n <= k) {
    fail(ErrorKind::TooShort, "block of " + std::to_string(rows) + " rows cannot identify a VAR(" +
                                  std::to_string(p) + ") in " + std::to_string(m) + " channels");
  }
  if (!block.allFinite()) fail(ErrorKind::InvalidArgument, "VAR block has non-finite entries");

  Matrix regressors(n, k);
  regressors.col(0).setOnes();
  for (int lag = 1; lag <= p; ++lag) {
    regressors.middleCols(1 + (lag - 1) * m, m) = block.middleRows(p - lag, n);
  }
  const Matrix response = block.bottomRows(n);

  const Matrix normal = regressors.transpose() * regressors;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normal);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  const bool ill = !(lmin > 0.0) || lmax / lmin > kConditionLimit;

  VarModel model;
  Matrix beta;
  Vector inverse_diag;
  if (ill) {
    const double lambda = kRidgeFactor * normal.trace();
    const Vector shifted = (eig.eigenvalues().array() + lambda).inverse();
    const Matrix inverse = eig.eigenvectors() * shifted.asDiagonal() * eig.eigenvectors().transpose();
    beta = inverse * (regressors.transpose() * response);
    inverse_diag = inverse.diagonal();
    model.ridge = true;
  } else {
    beta = regressors.colPivHouseholderQr().solve(response);
    const Matrix inverse = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                           eig.eigenvectors().transpose();
    inverse_diag = inverse.diagonal();
  }

  const Matrix residual = response - regressors * beta;
  model.intercept = beta.row(0).transpose();
  for (int lag = 1; lag <= p; ++lag) {
    model.coeffs.push_back(beta.middleRows(1 + (lag - 1) * m, m).transpose());
  }
  model.residual_cov = residual.transpose() * residual / static_cast<double>(n);
  model.observations = n;

  const Vector sigma2 = residual.colwise().squaredNorm().transpose() / static_cast<double>(n - k);
  model.coeff_stderr.resize(m, m * p);
  for (Index j = 0; j < m; ++j) {
    for (Index c = 0; c < m * p; ++c) {
      model.coeff_stderr(j, c) = std::sqrt(std::max(0.0, sigma2(j) * inverse_diag(1 + c)));
    }
  }
  return model;
}

Vector vectorize_coefficients(const VarModel& model) {
  const Index m = model.dim();
  Vector out(model.order() * m * m);
  for (int i = 0; i < model.order(); ++i) {
    out.segment(i * m * m, m * m) = Eigen::Map<const Vector>(model.coeffs[i].data(), m * m);
  }
  return out;
}

std::vector<Matrix> devectorize_coefficients(const Vector& packed, Index m, int p) {
  if (packed.size() != m * m * p) fail(ErrorKind::InvalidArgument, "packed length is not p m^2");
  std::vector<Matrix> out;
  for (int i = 0; i < p; ++i) {
    out.push_back(Eigen::Map<const Matrix>(packed.data() + i * m * m, m, m));
  }
  return out;
}

}  // namespace oeg::dynamics
