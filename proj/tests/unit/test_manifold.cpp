#include "oeg/error.hpp"
#include "oeg/manifold.hpp"
#include "support/generators.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace oeg;
using namespace oeg::manifold;
using oeg::testing::factor_of;
using oeg::testing::Gen;

namespace {

// Principal angles from scratch: QR-orthonormalize both inputs, SVD the cross
// product, arccos in ascending order.
Vector angles_oracle(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
  Vector s = Eigen::JacobiSVD<Matrix>(qa.transpose() * qb).singularValues();
  Vector out(s.size());
  for (Index i = 0; i < s.size(); ++i) out(i) = std::acos(std::clamp(s(i), 0.0, 1.0));
  return out;
}

Matrix sqrtm_sym(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

GramFactor basis_only(const Matrix& u) { return {u, Matrix::Identity(u.cols(), u.cols()), false}; }

LandmarkSequence sequence_of(const std::vector<Matrix>& frames) {
  LandmarkSequence seq;
  for (const auto& f : frames) seq.frames.push_back({f, false});
  return seq;
}

}  // namespace

TEST_SUITE("manifold") {
  TEST_CASE("centering subtracts the centroid and is idempotent") {
    Matrix x(3, 2);
    x << 2, 0, 0, 2, 1, 1;
    const auto c = center_landmarks({x, false});
    Matrix expected(3, 2);
    expected << 1, -1, -1, 1, 0, 0;
    CHECK((c.points - expected).norm() < 1e-15);
    CHECK(c.centered);
    CHECK((center_landmarks(c).points - c.points).norm() < 1e-15);
    CHECK(center_landmarks({Matrix::Constant(4, 2, 3.0), false}).points.norm() < 1e-15);
  }

  TEST_CASE("distance matrix: 3-4-5 triangle and the Gram identity") {
    Matrix x(2, 2);
    x << 0, 0, 3, 4;
    const Matrix d = squared_distance_matrix({x, false});
    CHECK(d(0, 1) == doctest::Approx(25.0));
    CHECK(d(1, 0) == doctest::Approx(25.0));
    CHECK(d(0, 0) == 0.0);

    Gen gen(11);
    for (int trial = 0; trial < 10; ++trial) {
      const LandmarkFrame f{gen.centered_frame(5, 2), true};
      const Matrix g = gram(f);
      const Vector diag = g.diagonal();
      const Matrix oracle = diag * Vector::Ones(5).transpose() - 2.0 * g + Vector::Ones(5) * diag.transpose();
      CHECK((squared_distance_matrix(f) - oracle).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("gram of random frames has n - d vanishing eigenvalues") {
    Matrix x(3, 2);
    x << 1, 0, 0, 1, 0, 0;
    CHECK((gram({x, true}) - Vector(Vector::Unit(3, 0) + Vector::Unit(3, 1)).asDiagonal().toDenseMatrix()).norm() < 1e-15);
    Gen gen(12);
    const Matrix g = gram({gen.centered_frame(49, 2), true});
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(g).eigenvalues();
    int zeros = 0;
    for (Index i = 0; i < ev.size(); ++i) zeros += std::abs(ev(i)) < 1e-10 ? 1 : 0;
    CHECK(zeros == 47);
  }

  TEST_CASE("polar factor reconstructs the Gram matrix") {
    Matrix x(3, 2);
    x << 1, 0, 0, 1, 0, 0;
    const auto f = polar_factor({x, true});
    CHECK((f.basis - Matrix::Identity(3, 2)).norm() < 1e-12);
    CHECK((f.spd - Matrix::Identity(2, 2)).norm() < 1e-12);

    Gen gen(13);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix p = gen.centered_frame();
      const auto a = factor_of(p);
      CHECK((a.basis.transpose() * a.basis - Matrix::Identity(2, 2)).norm() < 1e-10);
      CHECK((a.gram() - p * p.transpose()).norm() < 1e-8);
      const auto scaled = factor_of(3.0 * p);
      CHECK((scaled.spd - 9.0 * a.spd).norm() < 1e-8 * a.spd.norm());
      CHECK(principal_angles(a, scaled).angles.maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("degenerate frames") {
    Matrix collinear(4, 2);
    collinear << 0, 0, 1, 1, 2, 2, 3, 3;
    const auto f = polar_factor({collinear, false});
    CHECK(f.regularized);
    CHECK_THROWS_AS(polar_factor({Matrix::Zero(4, 2), false}), Error);
  }

  TEST_CASE("principal angles match the SVD oracle") {
    Matrix e12 = Matrix::Zero(3, 2), e13 = Matrix::Zero(3, 2);
    e12(0, 0) = e12(1, 1) = 1.0;
    e13(0, 0) = e13(2, 1) = 1.0;
    const auto right = principal_angles(basis_only(e12), basis_only(e13)).angles;
    CHECK(right(0) == doctest::Approx(0.0));
    CHECK(right(1) == doctest::Approx(std::numbers::pi / 2));

    Gen gen(14);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix a = gen.centered_frame(), b = gen.centered_frame();
      const Vector angles = principal_angles(factor_of(a), factor_of(b)).angles;
      CHECK((angles - angles_oracle(a, b)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(angles(0) <= angles(1));
      const double back = principal_angles(factor_of(b), factor_of(a)).squared_norm();
      CHECK(std::abs(std::sqrt(back) - angles.norm()) < 1e-10);
      CHECK(principal_angles(factor_of(a), factor_of(a)).angles.maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("Grassmann geodesic endpoints and angle interpolation") {
    Gen gen(15);
    for (int trial = 0; trial < 20; ++trial) {
      const auto a = factor_of(gen.centered_frame()), b = factor_of(gen.centered_frame());
      const Vector theta = principal_angles(a, b).angles;
      CHECK((grassmann_geodesic(a, b, 0.0) - a.basis).norm() < 1e-10);
      CHECK(principal_angles(basis_only(grassmann_geodesic(a, b, 1.0)), b).angles.maxCoeff() < 1e-6);
      for (double t : {0.25, 0.5, 0.75}) {
        const Matrix u = grassmann_geodesic(a, b, t);
        CHECK((u.transpose() * u - Matrix::Identity(2, 2)).norm() < 1e-8);
        CHECK((principal_angles(basis_only(u), a).angles - t * theta).cwiseAbs().maxCoeff() < 1e-6);
      }
    }
    Matrix e12 = Matrix::Zero(3, 2), e13 = Matrix::Zero(3, 2);
    e12(0, 0) = e12(1, 1) = 1.0;
    e13(0, 0) = e13(2, 1) = 1.0;
    CHECK_THROWS_AS(grassmann_geodesic(basis_only(e12), basis_only(e13), 0.5), Error);
  }

  TEST_CASE("SPD geodesic") {
    const Matrix i2 = Matrix::Identity(2, 2);
    CHECK((spd_geodesic(i2, i2, 0.3) - i2).norm() < 1e-12);
    CHECK((spd_geodesic(i2, 4.0 * i2, 0.5) - 2.0 * i2).norm() < 1e-12);
    Gen gen(16);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix a = gen.spd(2), b = gen.spd(2);
      CHECK((spd_geodesic(a, b, 0.0) - a).norm() < 1e-8);
      CHECK((spd_geodesic(a, b, 1.0) - b).norm() < 1e-8);
      const Matrix ah = sqrtm_sym(a), aih = ah.inverse();
      const Matrix mean = ah * sqrtm_sym(aih * b * aih) * ah;
      CHECK((spd_geodesic(a, b, 0.5) - mean).norm() < 1e-8);
    }
    Matrix bad = i2;
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(spd_geodesic(i2, bad, 0.5), Error);
  }

  TEST_CASE("PSD geodesic endpoints and constant curve") {
    Gen gen(17);
    for (int trial = 0; trial < 20; ++trial) {
      const auto a = factor_of(gen.centered_frame()), b = factor_of(gen.centered_frame());
      CHECK((psd_geodesic(a, b, 0.0).gram() - a.gram()).norm() < 1e-8);
      CHECK((psd_geodesic(a, b, 1.0).gram() - b.gram()).norm() < 1e-8 * std::max(1.0, b.gram().norm()));
      CHECK((psd_geodesic(a, a, 0.5).gram() - a.gram()).norm() < 1e-8);
    }
  }

  TEST_CASE("shape distance") {
    Matrix e12 = Matrix::Zero(3, 2), e13 = Matrix::Zero(3, 2);
    e12(0, 0) = e12(1, 1) = 1.0;
    e13(0, 0) = e13(2, 1) = 1.0;
    CHECK(psd_distance(basis_only(e12), basis_only(e13)) == doctest::Approx(std::pow(std::numbers::pi / 2, 2)).epsilon(1e-9));

    Gen gen(18);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix x1 = gen.centered_frame(), x2 = gen.centered_frame();
      const auto a = factor_of(x1), b = factor_of(x2);
      CHECK(psd_distance(a, a) < 1e-12);
      CHECK(psd_distance(a, b) > 0.0);
      CHECK(psd_distance(a, b, {0.0, 1e-8}) == doctest::Approx(principal_angles(a, b).squared_norm()).epsilon(1e-12));

      const Matrix q = gen.orthogonal(2);
      CHECK(std::abs(psd_distance(factor_of(x1 * q), factor_of(x2 * q)) - psd_distance(a, b)) < 1e-8);
      const Matrix m = gen.invertible(2);
      CHECK(std::abs(principal_angles(factor_of(x1 * m), b).squared_norm() - principal_angles(a, b).squared_norm()) <
            1e-8);
    }
  }

  TEST_CASE("velocity series") {
    Gen gen(19);
    const Matrix base = gen.centered_frame();
    CHECK(velocity_width(2) == 6);
    CHECK(velocity_width(3) == 10);

    const auto stat = geodesic_velocity_series(sequence_of({base, base, base, base}));
    CHECK(stat.values.rows() == 3);
    CHECK(stat.values.cols() == 6);
    CHECK(stat.values.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(geodesic_velocity_series(sequence_of({base, base})).values.rows() == 1);

    // Right-multiplying by a rotation keeps the span and, after principal
    // alignment, the SPD block.
    std::vector<Matrix> rotating;
    for (int t = 0; t < 6; ++t) {
      const double a = 0.1 * t;
      Matrix r(2, 2);
      r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      rotating.push_back(base * r);
    }
    CHECK(geodesic_velocity_series(sequence_of(rotating)).values.cwiseAbs().maxCoeff() < 1e-6);

    std::vector<Matrix> noisy;
    for (int t = 0; t < 8; ++t) noisy.push_back(base + 0.05 * gen.normal(49, 2));
    std::vector<Matrix> reversed(noisy.rbegin(), noisy.rend());
    const auto fwd = geodesic_velocity_series(sequence_of(noisy));
    const auto bwd = geodesic_velocity_series(sequence_of(reversed));
    for (Index t = 0; t < fwd.values.rows(); ++t) {
      const Index s = fwd.values.rows() - 1 - t;
      CHECK(std::abs(fwd.values.row(t).head(2).norm() - bwd.values.row(s).head(2).norm()) < 1e-10);
    }
    // The log-map triangle carries sqrt 2 on the off-diagonal so its norm is
    // the Frobenius norm, and the last column is the distance.
    for (Index t = 0; t < fwd.values.rows(); ++t) {
      const double expected = fwd.values.row(t).head(2).squaredNorm() + fwd.values.row(t).segment(2, 3).squaredNorm();
      CHECK(fwd.values(t, 5) == doctest::Approx(expected).epsilon(1e-10));
    }
  }

  TEST_CASE("velocity series marks degenerate frames as gaps") {
    Gen gen(20);
    const Matrix base = gen.centered_frame();
    const auto series = geodesic_velocity_series(sequence_of({base, base, Matrix::Zero(49, 2), base}));
    CHECK(series.degenerate_frames == std::vector<Index>{2});
    CHECK(series.gap == std::vector<bool>{false, true, true});
    CHECK(std::isnan(series.values(1, 0)));
  }

  TEST_CASE("Procrustes alignment") {
    Gen gen(21);
    const Matrix base = gen.centered_frame();
    Matrix r(2, 2);
    r << std::cos(0.7), -std::sin(0.7), std::sin(0.7), std::cos(0.7);
    LandmarkSequence seq = sequence_of({base, 2.5 * base * r + Matrix::Constant(49, 2, 4.0)});
    const auto aligned = procrustes_align(seq);
    CHECK((aligned.aligned.frames[0].points - aligned.aligned.frames[1].points).norm() < 1e-8);
    CHECK(aligned.aligned.frames[0].points.norm() == doctest::Approx(1.0));

    std::vector<Matrix> jittered;
    for (int i = 0; i < 30; ++i) jittered.push_back(base + 0.01 * gen.normal(49, 2));
    const auto mean = procrustes_align(sequence_of(jittered)).mean_shape;
    const Matrix template_shape = base / base.norm();
    Eigen::JacobiSVD<Matrix> svd(mean.transpose() * template_shape, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix rot = svd.matrixU() * svd.matrixV().transpose();
    CHECK((mean * rot - template_shape).norm() < 0.01);
  }

  TEST_CASE("segment names round-trip") {
    for (auto s : {Segment::full, Segment::interview, Segment::mimic, Segment::story}) {
      CHECK(parse_segment(to_string(s)) == s);
    }
    CHECK_THROWS_AS(parse_segment("lunch"), Error);
  }
}
