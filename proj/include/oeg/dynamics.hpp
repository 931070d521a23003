#pragma once

// Multichannel behavioral series: assembly, SVD reduction, windowing and
// VAR(p) fitting. The vectorized lag coefficients of each window are the
// atoms fed to the background mixture.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace oeg::dynamics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct ChannelSeries {
  Matrix values;  // T x m
  double frame_rate = 25.0;
  std::vector<std::string> channel_names;

  Index length() const { return values.rows(); }
  Index width() const { return values.cols(); }
};

struct WindowSpec {
  double length_s = 10.0;
  double overlap_s = 1.0;

  void validate() const;
};

struct VarModel {
  Vector intercept;             // c
  std::vector<Matrix> coeffs;   // phi_1 .. phi_p, each m x m
  Matrix residual_cov;          // m x m
  Matrix coeff_stderr;          // m x (m p), column block i-1 belongs to phi_i
  Index observations = 0;       // rows used in the regression
  bool ridge = false;           // regressor Gram matrix was ill-conditioned

  int order() const { return static_cast<int>(coeffs.size()); }
  Index dim() const { return intercept.size(); }
};

struct ReducedBasis {
  Matrix projection;  // m x q, orthonormal columns
  Vector mean;        // m
  Vector singular_values;
  double captured_variance = 0.0;  // share of centered energy kept by the top q directions

  Index dim() const { return projection.cols(); }
};

enum class ConstantChannels {
  drop,  // remove the channel, warn
  zero,  // keep the column as zeros, warn (keeps widths fixed across recordings)
};

// Horizontal concatenation truncated to the shortest input (inputs may differ
// by at most one frame), followed by per-channel standardization ignoring
// NaN entries. Throws RateMismatch / LengthMismatch.
ChannelSeries assemble_channels(const ChannelSeries& geodesic,
                                std::span<const ChannelSeries> aux = {},
                                ConstantChannels constant = ConstantChannels::drop);

// Top-q right singular vectors of the mean-centered rows of `data`.
// Throws RankTooLow when q exceeds the numerical rank.
ReducedBasis fit_basis(const Matrix& data, Index q);

// Largest q <= q_max the data supports (numerical rank of the centered rows).
Index numerical_rank(const Matrix& data);

Matrix apply_basis(const Matrix& data, const ReducedBasis& basis);
ChannelSeries apply_basis(const ChannelSeries& series, const ReducedBasis& basis,
                          const std::string& prefix = "c");

// Linearly fills NaN runs of at most max_gap rows that have finite rows on
// both sides. Longer or unbounded runs stay NaN. Returns the filled row count.
Index interpolate_gaps(ChannelSeries& series, Index max_gap = 5);

struct Window {
  Index start = 0;  // first row in the source series
  Matrix block;     // T_w x m
};

Index window_length(const ChannelSeries& series, const WindowSpec& spec);
Index window_hop(const ChannelSeries& series, const WindowSpec& spec);

// Blocks of round(length_s * rate) rows every round((length_s - overlap_s) *
// rate) rows starting at 0; trailing partial windows are dropped. Throws
// TooShort when not even one window fits.
std::vector<Window> window(const ChannelSeries& series, const WindowSpec& spec);

// OLS with intercept over p lags. Falls back to a ridge solve
// (lambda = 1e-6 trace) when the regressor Gram matrix has condition number
// above 1e12. Throws TooShort unless rows - p > m p + 1.
VarModel fit_var(const Matrix& block, int p = 3);

// Column-major stacking of phi_1 .. phi_p (intercept excluded), length p m^2.
Vector vectorize_coefficients(const VarModel& model);
std::vector<Matrix> devectorize_coefficients(const Vector& packed, Index m, int p);

}  // namespace oeg::dynamics
