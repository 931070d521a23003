#include "oeg/tensor.hpp"

#include "oeg/error.hpp"

namespace oeg {

Tensor3::Tensor3(Dims dims) : dims_(dims) {
  for (auto d : dims) {
    if (d < 0) fail(ErrorKind::InvalidArgument, "negative tensor dimension");
  }
  data_.assign(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), 0.0);
}

Tensor3 Tensor3::outer(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  Tensor3 t({a.size(), b.size(), c.size()});
  for (Index k = 0; k < c.size(); ++k) {
    for (Index j = 0; j < b.size(); ++j) {
      const double bc = b(j) * c(k);
      for (Index i = 0; i < a.size(); ++i) t(i, j, k) = a(i) * bc;
    }
  }
  return t;
}

Eigen::MatrixXd Tensor3::unfold(int mode) const {
  const auto [ni, nj, nk] = dims_;
  Eigen::MatrixXd out;
  switch (mode) {
    case 0:
      out.resize(ni, nj * nk);
      for (Index k = 0; k < nk; ++k)
        for (Index j = 0; j < nj; ++j)
          for (Index i = 0; i < ni; ++i) out(i, j + nj * k) = (*this)(i, j, k);
      break;
    case 1:
      out.resize(nj, ni * nk);
      for (Index k = 0; k < nk; ++k)
        for (Index j = 0; j < nj; ++j)
          for (Index i = 0; i < ni; ++i) out(j, i + ni * k) = (*this)(i, j, k);
      break;
    case 2:
      out.resize(nk, ni * nj);
      for (Index k = 0; k < nk; ++k)
        for (Index j = 0; j < nj; ++j)
          for (Index i = 0; i < ni; ++i) out(k, i + ni * j) = (*this)(i, j, k);
      break;
    default:
      fail(ErrorKind::InvalidArgument, "tensor mode must be 0, 1 or 2");
  }
  return out;
}

Tensor3 Tensor3::fold(const Eigen::MatrixXd& unfolded, int mode, Dims dims) {
  Tensor3 t(dims);
  const auto [ni, nj, nk] = dims;
  if (mode < 0 || mode > 2) fail(ErrorKind::InvalidArgument, "tensor mode must be 0, 1 or 2");
  const Index rows = dims[static_cast<std::size_t>(mode)];
  if (unfolded.rows() != rows || unfolded.size() != t.size()) {
    fail(ErrorKind::InvalidArgument, "unfolded matrix does not match tensor dimensions");
  }
  for (Index k = 0; k < nk; ++k)
    for (Index j = 0; j < nj; ++j)
      for (Index i = 0; i < ni; ++i) {
        switch (mode) {
          case 0: t(i, j, k) = unfolded(i, j + nj * k); break;
          case 1: t(i, j, k) = unfolded(j, i + ni * k); break;
          default: t(i, j, k) = unfolded(k, i + ni * j); break;
        }
      }
  return t;
}

Tensor3 Tensor3::mode_product(int mode, const Eigen::MatrixXd& m) const {
  if (m.cols() != dim(mode)) fail(ErrorKind::InvalidArgument, "mode product dimension mismatch");
  Dims out_dims = dims_;
  out_dims[static_cast<std::size_t>(mode)] = m.rows();
  return fold(m * unfold(mode), mode, out_dims);
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  if (dims_ != other.dims_) fail(ErrorKind::InvalidArgument, "tensor dimensions differ");
  flat() += other.flat();
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  flat() *= s;
  return *this;
}

Tensor3 operator-(const Tensor3& a, const Tensor3& b) {
  if (a.dims_ != b.dims_) fail(ErrorKind::InvalidArgument, "tensor dimensions differ");
  Tensor3 out = a;
  out.flat() -= b.flat();
  return out;
}

}  // namespace oeg
