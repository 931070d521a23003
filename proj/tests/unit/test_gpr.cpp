#include "oeg/error.hpp"
#include "oeg/gpr.hpp"
#include "oeg/log.hpp"
#include "support/generators.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace oeg;
using namespace oeg::gpr;
using oeg::testing::Gen;

namespace {

// Ridge regression on [x, sqrt(bias_var)] with penalty noise_var, solved by
// the normal equations in feature space.
Vector ridge_oracle(const Matrix& x, const Vector& y, const Matrix& test, double bias_var, double noise_var) {
  auto features = [&](const Matrix& m) {
    Matrix phi(m.rows(), m.cols() + 1);
    phi << m, Vector::Constant(m.rows(), std::sqrt(bias_var));
    return phi;
  };
  const Matrix phi = features(x);
  const Matrix a = phi.transpose() * phi + noise_var * Matrix::Identity(phi.cols(), phi.cols());
  const Vector w = a.ldlt().solve(phi.transpose() * y);
  return features(test) * w;
}

std::vector<Sample> samples_of(const Matrix& x, const Vector& y) {
  std::vector<Sample> out;
  for (Index i = 0; i < x.rows(); ++i) out.push_back({"s" + std::to_string(i), "r0", x.row(i).transpose(), y(i)});
  return out;
}

}  // namespace

TEST_SUITE("gpr") {
  TEST_CASE("predictive mean equals the ridge oracle") {
    Gen gen(61);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix x = gen.normal(30, 8), test = gen.normal(10, 8);
      const Vector y = gen.normal_vector(30);
      const double bias = trial % 2 ? 1.0 : 0.0, noise = 0.05 + 0.1 * trial;
      const auto model = GpModel::fit(x, y, {bias, noise, false});
      CHECK((model.predict_means(test) - ridge_oracle(x, y, test, bias, noise)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("realizable targets are interpolated") {
    Gen gen(62);
    const Matrix x = gen.normal(20, 25);
    const Vector w = gen.normal_vector(25);
    const Vector y = 2.5 * x * w;
    const auto model = GpModel::fit(x, y, {1.0, 1e-8, false});
    CHECK((model.predict_means(x) - y).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(model.predict_mean(x.row(3).transpose()) - y(3)) < 1e-4);
  }

  TEST_CASE("constant targets give constant predictions") {
    Gen gen(63);
    const Matrix x = gen.normal(15, 4);
    const auto model = GpModel::fit(x, Vector::Constant(15, 0.0), {});
    const Vector p = model.predict_means(gen.normal(5, 4));
    CHECK(p.cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("prior mean and linearity without bias") {
    Matrix x = Matrix::Zero(3, 3);
    x(0, 0) = 1.0;
    x(1, 1) = 2.0;
    x(2, 0) = -1.0;
    const auto model = GpModel::fit(x, Eigen::Vector3d(1.0, -2.0, 0.5), {0.0, 0.1, false});
    CHECK(model.predict_mean(Eigen::Vector3d(0.0, 0.0, 4.0)) == 0.0);
    const Eigen::Vector3d probe(0.3, -0.7, 0.2);
    CHECK(model.predict_mean(2.5 * probe) == doctest::Approx(2.5 * model.predict_mean(probe)).epsilon(1e-12));
  }

  TEST_CASE("length normalization makes scale irrelevant") {
    Gen gen(64);
    const Matrix x = gen.normal(12, 5);
    const Vector y = gen.normal_vector(12);
    Matrix scaled = x;
    for (Index i = 0; i < x.rows(); ++i) scaled.row(i) *= 1.0 + i;
    const Vector probe = gen.normal_vector(5);
    CHECK(GpModel::fit(x, y).predict_mean(probe) == doctest::Approx(GpModel::fit(scaled, y).predict_mean(7.0 * probe)));
  }

  TEST_CASE("argument validation") {
    CHECK_THROWS_AS(GpModel::fit(Matrix::Zero(1, 2), Vector::Zero(1)), Error);
    CHECK_THROWS_AS(GpModel::fit(Matrix::Zero(3, 2), Vector::Zero(2)), Error);
    CHECK_THROWS_AS(GpModel::fit(Matrix::Zero(3, 2), Vector::Zero(3), {1.0, 0.0, false}), Error);
  }

  TEST_CASE("LOSO keeps every subject's samples out of its own training fold") {
    Gen gen(65);
    std::vector<Sample> samples;
    for (int s = 0; s < 6; ++s) {
      for (int seg = 0; seg < 3; ++seg) {
        samples.push_back({"subj" + std::to_string(s), "seg" + std::to_string(seg), gen.normal_vector(4), double(s)});
      }
    }
    const auto report = loso_cv(samples, {1.0, 0.1, true}, "t");
    CHECK(report.folds == 6);
    CHECK(report.subjects == 6);
    CHECK(report.predictions.size() == samples.size());
    CHECK(report.target_name == "t");

    // Oracle: refit without the subject and compare one prediction.
    Matrix x(15, 4);
    Vector y(15);
    Index r = 0;
    for (const auto& s : samples) {
      if (s.subject == "subj2") continue;
      x.row(r) = s.x.transpose();
      y(r++) = s.y;
    }
    const auto held_out = GpModel::fit(x, y, {1.0, 0.1, true});
    CHECK(report.predictions[6].subject == "subj2");
    CHECK(report.predictions[6].y_pred == doctest::Approx(held_out.predict_mean(samples[6].x)).epsilon(1e-12));

    CHECK_THROWS_AS(loso_cv(std::span(samples).first(6)), Error);
  }

  TEST_CASE("LOSO skips folds with constant training targets") {
    std::vector<std::string> warnings;
    log::set_warning_sink([&](std::string_view w) { warnings.emplace_back(w); });
    Gen gen(66);
    std::vector<Sample> samples;
    for (int s = 0; s < 6; ++s) samples.push_back({"s" + std::to_string(s), "a", gen.normal_vector(3), s == 0 ? 1.0 : 0.0});
    // The surviving folds all have the same true target, so scoring fails.
    CHECK_THROWS_AS(loso_cv(samples), Error);
    log::reset_warning_sink();
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("'s0'") != std::string::npos);
  }

  TEST_CASE("permuted targets carry no signal") {
    Gen gen(67);
    const Index n = 40;
    Matrix x(n, 30);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      y(i) = i < n / 2 ? -1.0 : 1.0;
      x.row(i) = (gen.normal_vector(30) + 3.0 * y(i) * Vector::Unit(30, 0) + Vector::Constant(30, 0.5)).transpose();
    }
    CHECK(loso_cv(samples_of(x, y)).pearson_r > 0.9);
    std::vector<double> perm(y.data(), y.data() + n);
    std::shuffle(perm.begin(), perm.end(), gen.engine());
    const Vector permuted = Eigen::Map<Vector>(perm.data(), n);
    CHECK(std::abs(loso_cv(samples_of(x, permuted)).pearson_r) <= 0.3);
  }

  TEST_CASE("pearson") {
    const std::vector<double> t{1, 2, 4, 7, 11};
    std::vector<double> neg, aff;
    for (double v : t) neg.push_back(-v), aff.push_back(3.0 * v + 2.0);
    CHECK(pearson(t, t) == doctest::Approx(1.0));
    CHECK(pearson(neg, t) == doctest::Approx(-1.0));
    Gen gen(68);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> a(25), b(25), a2(25);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = gen.normal(), b[i] = gen.normal();
      const double scale = gen.uniform(0.1, 10.0), shift = gen.uniform(-5.0, 5.0);
      for (std::size_t i = 0; i < a.size(); ++i) a2[i] = scale * a[i] + shift;
      CHECK(std::abs(pearson(a2, b) - pearson(a, b)) <= 1e-12);
      CHECK(std::abs(pearson(a, a2) - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, t), Error);
    CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
  }

  TEST_CASE("responder rule") {
    CHECK(responder_label(20, 14));
    CHECK_FALSE(responder_label(20, 15));
    CHECK(responder_label(24, 11));
    CHECK(responder_label(10, 7));
    CHECK_FALSE(responder_label(10, 8));
    CHECK_THROWS_AS(responder_label(0, 0), Error);
    CHECK_THROWS_AS(responder_label(53, 10), Error);
    CHECK_THROWS_AS(responder_label(20, -1), Error);
  }
}
