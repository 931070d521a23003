#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace oeg {

// Dense third-order tensor stored column-major: element (i, j, k) lives at
// i + I (j + J k).
class Tensor3 {
 public:
  using Index = Eigen::Index;
  using Dims = std::array<Index, 3>;

  Tensor3() = default;
  explicit Tensor3(Dims dims);

  static Tensor3 outer(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

  const Dims& dims() const { return dims_; }
  Index dim(int mode) const { return dims_[static_cast<std::size_t>(mode)]; }
  Index size() const { return static_cast<Index>(data_.size()); }

  double& operator()(Index i, Index j, Index k) { return data_[offset(i, j, k)]; }
  double operator()(Index i, Index j, Index k) const { return data_[offset(i, j, k)]; }

  Eigen::Map<Eigen::VectorXd> flat() { return {data_.data(), size()}; }
  Eigen::Map<const Eigen::VectorXd> flat() const { return {data_.data(), size()}; }

  double norm() const { return flat().norm(); }

  // Mode-n unfolding: dim(mode) rows; the remaining indices vary in their
  // natural order (lowest mode fastest).
  Eigen::MatrixXd unfold(int mode) const;
  static Tensor3 fold(const Eigen::MatrixXd& unfolded, int mode, Dims dims);

  // this x_mode m: replaces dimension `mode` by m.rows().
  Tensor3 mode_product(int mode, const Eigen::MatrixXd& m) const;

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator*=(double s);
  friend Tensor3 operator-(const Tensor3& a, const Tensor3& b);

 private:
  std::size_t offset(Index i, Index j, Index k) const {
    return static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k));
  }

  Dims dims_{0, 0, 0};
  std::vector<double> data_;
};

}  // namespace oeg
