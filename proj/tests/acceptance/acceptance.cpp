// Acceptance checks: one PASS/FAIL line per criterion. With no arguments all
// eight run; `--only 1,4` restricts the set. Exit status is nonzero when any
// selected criterion fails.

#include "oeg/causal.hpp"
#include "oeg/config.hpp"
#include "oeg/dynamics.hpp"
#include "oeg/error.hpp"
#include "oeg/gpr.hpp"
#include "oeg/io.hpp"
#include "oeg/log.hpp"
#include "oeg/manifold.hpp"
#include "oeg/pipeline.hpp"
#include "oeg/transport.hpp"
#include "oeg/ubm.hpp"
#include "support/generators.hpp"
#include "support/simplex.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using namespace oeg;
using oeg::testing::Gen;
using Clock = std::chrono::steady_clock;
using json = nlohmann::json;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!ok) notes.push_back("failed: " + what);
  }
  void note(const std::string& text) { notes.push_back(text); }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------- criterion 1

manifold::GramFactor factor(const Matrix& x) { return manifold::polar_factor({x, true}); }
manifold::GramFactor basis_only(const Matrix& u) { return {u, Matrix::Identity(u.cols(), u.cols()), false}; }

Outcome geodesics() {
  const auto start = Clock::now();
  Gen gen(1001);
  double endpoint = 0.0, interpolation = 0.0, gram_identity = 0.0, affine = 0.0, rotation = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x1 = gen.centered_frame(), x2 = gen.centered_frame();
    const auto a = factor(x1), b = factor(x2);

    const double scale = std::max(1.0, std::max(a.gram().norm(), b.gram().norm()));
    endpoint = std::max(endpoint, (manifold::psd_geodesic(a, b, 0.0).gram() - a.gram()).norm() / scale);
    endpoint = std::max(endpoint, (manifold::psd_geodesic(a, b, 1.0).gram() - b.gram()).norm() / scale);

    const Vector theta = manifold::principal_angles(a, b).angles;
    for (double t : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const Matrix u = manifold::grassmann_geodesic(a, b, t);
      interpolation = std::max(interpolation,
                               (manifold::principal_angles(basis_only(u), a).angles - t * theta).cwiseAbs().maxCoeff());
    }

    // Squared distances from the Gram matrix and back: G = -J D J / 2.
    const manifold::LandmarkFrame f{x1, true};
    const Matrix g = manifold::gram(f);
    const Vector diag = g.diagonal();
    const Index n = x1.rows();
    const Matrix d_oracle = diag * Vector::Ones(n).transpose() - 2.0 * g + Vector::Ones(n) * diag.transpose();
    const Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    const Matrix d = manifold::squared_distance_matrix(f);
    gram_identity = std::max(gram_identity, (d - d_oracle).cwiseAbs().maxCoeff());
    gram_identity = std::max(gram_identity, (-0.5 * j * d * j - g).cwiseAbs().maxCoeff());

    Matrix m;
    do m = gen.normal(2, 2);
    while (std::abs(m.determinant()) < 0.1);
    affine = std::max(affine, std::abs(manifold::principal_angles(factor(x1 * m), b).squared_norm() -
                                       manifold::principal_angles(a, b).squared_norm()));

    const Matrix q = gen.orthogonal(2);
    rotation = std::max(rotation, std::abs(manifold::psd_distance(factor(x1 * q), factor(x2 * q)) -
                                           manifold::psd_distance(a, b)));
  }
  const double runtime = seconds_since(start);
  Outcome out;
  out.require(endpoint <= 1e-8, "endpoint reconstruction");
  out.require(interpolation <= 1e-6, "angle interpolation");
  out.require(gram_identity <= 1e-10, "Gram/distance identity");
  out.require(affine <= 1e-8, "Grassmann term under right transforms");
  out.require(rotation <= 1e-8, "joint rotation invariance");
  out.require(runtime < 30.0, "runtime");
  out.note("endpoint " + num(endpoint) + ", interpolation " + num(interpolation) + ", gram " + num(gram_identity) +
           ", affine " + num(affine) + ", rotation " + num(rotation) + ", " + num(runtime) + " s");
  return out;
}

// ---------------------------------------------------------------- criterion 2

Outcome var_recovery() {
  Gen gen(2002);
  const Index m = 6;
  const auto planted = oeg::testing::stable_var(gen, m, 3);
  std::vector<Matrix> pooled(3, Matrix::Zero(m, m));
  for (int w = 0; w < 100; ++w) {
    const auto model = dynamics::fit_var(oeg::testing::simulate_var(gen, planted, Vector::Zero(m), 250), 3);
    for (std::size_t lag = 0; lag < 3; ++lag) pooled[lag] += model.coeffs[lag] / 100.0;
  }
  double err = 0.0;
  for (std::size_t lag = 0; lag < 3; ++lag) err = std::max(err, (pooled[lag] - planted[lag]).cwiseAbs().maxCoeff());

  int inside = 0, total = 0;
  for (int w = 0; w < 100; ++w) {
    const auto model = dynamics::fit_var(gen.normal(250, m), 3);
    for (int lag = 0; lag < 3; ++lag) {
      for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
          const double c = model.coeffs[static_cast<std::size_t>(lag)](i, j);
          inside += std::abs(c) <= 3.0 * model.coeff_stderr(i, lag * m + j) ? 1 : 0;
          ++total;
        }
      }
    }
  }
  const double share = static_cast<double>(inside) / total;
  Outcome out;
  out.require(err <= 0.05, "pooled coefficient error");
  out.require(share >= 0.95, "white-noise null");
  out.note("max error " + num(err) + ", null within 3 SE " + num(100.0 * share) + "%");
  return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome mixtures() {
  log::set_warning_sink({});
  Outcome out;
  int violations = 0, reseeds = 0;
  ubm::GmmModel last;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Gen gen(3000 + seed);
    // Clustered atoms: 16 centers in 6 dimensions.
    const Matrix centers = 4.0 * gen.normal(16, 6);
    Matrix atoms(3200, 6);
    for (Index i = 0; i < atoms.rows(); ++i) atoms.row(i) = centers.row(i % 16) + gen.normal(1, 6);
    ubm::EmOptions opt;
    opt.components = 64;
    opt.seed = seed;
    ubm::EmTrace trace;
    last = ubm::train_em(atoms, opt, &trace);
    reseeds += static_cast<int>(trace.reseeded_iterations.size());
    for (std::size_t i = 1; i < trace.mean_log_likelihood.size(); ++i) {
      const bool reseeded = std::find(trace.reseeded_iterations.begin(), trace.reseeded_iterations.end(),
                                      static_cast<int>(i)) != trace.reseeded_iterations.end();
      if (!reseeded && trace.mean_log_likelihood[i] < trace.mean_log_likelihood[i - 1] - 1e-9) ++violations;
    }
  }
  log::reset_warning_sink();
  out.require(violations == 0, "EM monotonicity");

  const auto& prior = last;
  const Index q = prior.dim();
  const auto zero = ubm::map_adapt(ubm::accumulate(prior, Matrix(0, q)), prior, 16.0);
  out.require(zero.means == prior.means && zero.weights == prior.weights, "zero-data MAP equals the prior");

  ubm::SufficientStats big;
  big.r = Vector::Constant(prior.components(), 1e5 * 16.0);
  Gen gen(3100);
  const Matrix ml = gen.normal(prior.components(), q);
  big.z = ml * (1e5 * 16.0);
  big.n = big.r.sum();
  big.prior_fingerprint = prior.fingerprint();
  const double ml_err = (ubm::map_adapt(big, prior, 16.0).means - ml).cwiseAbs().maxCoeff();
  out.require(ml_err <= 1e-3, "ML limit");

  Matrix svs(50, prior.components() * q);
  std::vector<ubm::AdaptedModel> adapted;
  for (Index i = 0; i < 50; ++i) {
    adapted.push_back(ubm::map_adapt(ubm::accumulate(prior, 4.0 * gen.normal(5 + i, q)), prior, 16.0));
    svs.row(i) = ubm::supervector(adapted.back(), prior).values.transpose();
  }
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(svs * svs.transpose()).eigenvalues();
  out.require(ev.minCoeff() >= -1e-8 * ev.maxCoeff(), "kernel matrix PSD");

  const Vector self = ubm::supervector(zero, prior).values;
  double kl_gap = 0.0;
  for (Index i = 0; i < 50; ++i) {
    const double identity = 0.5 * (svs.row(i).transpose() - self).squaredNorm();
    kl_gap = std::max(kl_gap, std::abs(ubm::kl_distance(prior, adapted[static_cast<std::size_t>(i)]) - identity));
  }
  out.require(kl_gap <= 1e-10, "KL/supervector identity");

  double lp_gap = 0.0;
  int axiom_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index c = 2 + trial % 5;
    const Matrix pts = gen.normal(c, 3);
    Matrix cost(c, c);
    for (Index i = 0; i < c; ++i)
      for (Index j = 0; j < c; ++j) cost(i, j) = (pts.row(i) - pts.row(j)).norm();
    const auto metric = [&](int i, int j) { return cost(i, j); };
    const Vector a = gen.simplex(c), b = gen.simplex(c), m = gen.simplex(c);
    const double ab = transport::shared_support_distance(a, b, metric);
    lp_gap = std::max(lp_gap, std::abs(ab - oeg::testing::transport_lp(a, b, cost)));
    const double ba = transport::shared_support_distance(b, a, metric);
    const double am = transport::shared_support_distance(a, m, metric);
    const double mb = transport::shared_support_distance(m, b, metric);
    const double aa = transport::shared_support_distance(a, a, metric);
    if (std::abs(ab - ba) > 1e-10 || ab > am + mb + 1e-10 || std::abs(aa) > 1e-12 || ab < 0.0) ++axiom_failures;
  }
  out.require(lp_gap <= 1e-8, "Wasserstein LP oracle");
  out.require(axiom_failures == 0, "metric axioms");
  out.note("EM violations " + std::to_string(violations) + " (reseeds " + std::to_string(reseeds) + "), ML limit " +
           num(ml_err) + ", min/max eigenvalue " + num(ev.minCoeff() / ev.maxCoeff()) + ", KL " + num(kl_gap) +
           ", LP " + num(lp_gap));
  return out;
}

// ---------------------------------------------------------------- criterion 4

std::vector<gpr::Sample> samples_of(const Matrix& x, const Vector& y) {
  std::vector<gpr::Sample> out;
  for (Index i = 0; i < x.rows(); ++i) out.push_back({"s" + std::to_string(i), "r0", x.row(i).transpose(), y(i)});
  return out;
}

Outcome gaussian_process() {
  Gen gen(4004);
  double ridge_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = gen.normal(40, 12), test = gen.normal(10, 12);
    const Vector y = gen.normal_vector(40);
    const double bias = 1.0, noise = 0.1;
    const auto model = gpr::GpModel::fit(x, y, {bias, noise, false});
    Matrix phi(40, 13), phi_test(10, 13);
    phi << x, Vector::Constant(40, std::sqrt(bias));
    phi_test << test, Vector::Constant(10, std::sqrt(bias));
    const Vector w = (phi.transpose() * phi + noise * Matrix::Identity(13, 13)).ldlt().solve(phi.transpose() * y);
    ridge_gap = std::max(ridge_gap, (model.predict_means(test) - phi_test * w).cwiseAbs().maxCoeff());
  }

  const Index n = 40;
  Matrix x(n, 30);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    y(i) = i < n / 2 ? -1.0 : 1.0;
    x.row(i) = (gen.normal_vector(30) + 3.0 * y(i) * Vector::Unit(30, 0) + Vector::Constant(30, 0.5)).transpose();
  }
  std::vector<double> perm(y.data(), y.data() + n);
  std::shuffle(perm.begin(), perm.end(), gen.engine());
  const double null_r = gpr::loso_cv(samples_of(x, Eigen::Map<Vector>(perm.data(), n))).pearson_r;
  const double signal_r = gpr::loso_cv(samples_of(x, y)).pearson_r;

  double affine = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(30), b(30), a2(30);
    const double scale = gen.uniform(0.1, 10.0), shift = gen.uniform(-10.0, 10.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = gen.normal();
      b[i] = gen.normal();
      a2[i] = scale * a[i] + shift;
    }
    affine = std::max(affine, std::abs(gpr::pearson(a2, b) - gpr::pearson(a, b)));
  }
  Outcome out;
  out.require(ridge_gap <= 1e-6, "ridge oracle");
  out.require(std::abs(null_r) <= 0.3, "permutation null");
  out.require(affine <= 1e-12, "Pearson affine invariance");
  out.note("ridge " + num(ridge_gap) + ", null r " + num(null_r) + " (unpermuted " + num(signal_r) +
           "), affine " + num(affine));
  return out;
}

// ------------------------------------------------------------ pipeline runs

struct PipelineRun {
  fs::path root;
  double seconds = 0.0;
  json cv;
  json recommendations;
};

PipelineRun run_pipeline(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  synth::CohortSpec spec;
  spec.counts = {20, 10, 10};
  spec.duration_s = 120.0;
  spec.seed = 1;
  PipelineConfig config;
  config.set("ubm.components", "64");

  log::set_warning_sink({});
  const auto start = Clock::now();
  pipeline::cmd_synth(spec, root / "data");
  if (pipeline::cmd_features(root / "data", config, root / "features") != 0) {
    log::reset_warning_sink();
    fail(ErrorKind::Format, "feature extraction skipped recordings");
  }
  pipeline::cmd_train_ubm(root / "features", config, root / "ubm.oegm");
  pipeline::cmd_adapt(root / "features", root / "ubm.oegm", config, root / "supervectors");
  pipeline::cmd_kernel_matrix(root / "supervectors", root / "results" / "kernel.oegs");
  pipeline::cmd_cv(root / "supervectors", root / "data", config, root / "results");
  pipeline::cmd_causal(root / "supervectors", root / "data", config, root / "results");
  pipeline::cmd_report(root / "results", root / "results" / "summary.json");
  PipelineRun run;
  run.seconds = seconds_since(start);
  log::reset_warning_sink();
  run.root = root;
  run.cv = json::parse(io::read_text(root / "results" / "cv_report.json"));
  run.recommendations = json::parse(io::read_text(root / "results" / "recommendations.json"));
  return run;
}

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("oeg_acceptance_" + name); }

double target_r(const PipelineRun& run, const std::string& target) {
  const auto& r = run.cv.at("targets").at(target).at("pearson_r");
  return r.is_null() ? std::nan("") : r.get<double>();
}

// ---------------------------------------------------------------- criterion 5

Outcome synthetic_status() {
  const auto run = run_pipeline(scratch("status"));
  const double status = target_r(run, "status"), type = target_r(run, "type");
  Outcome out;
  out.require(status >= 0.9, "status LOSO r >= 0.9");
  out.require(type >= 0.9, "type LOSO r >= 0.9");
  out.require(run.seconds < 300.0, "runtime");
  out.note("status r " + num(status) + ", type r " + num(type) + ", " + num(run.seconds) + " s");
  fs::remove_all(run.root);
  return out;
}

// ---------------------------------------------------------------- criterion 6

Outcome causal_suite() {
  Outcome out;
  Gen gen(6006);
  double ortho = 0.0, recon = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor3 t({8, causal::kCategories, 13});
    for (Index i = 0; i < t.size(); ++i) t.flat()(i) = gen.normal();
    const auto model = causal::hosvd(t);
    for (const auto& u : model.modes) {
      ortho = std::max(ortho, (u.transpose() * u - Matrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff());
    }
    recon = std::max(recon, model.reconstruction_error / t.norm());
  }
  out.require(ortho <= 1e-10, "HOSVD orthonormality");
  out.require(recon <= 1e-8, "full-rank reconstruction");

  const auto run = run_pipeline(scratch("causal"));
  const auto& summary = run.recommendations.at("summary");
  const double contains = summary.at("contains_best_fraction").get<double>();
  const double predicted = summary.at("mean_predicted_reduction").get<double>();
  const double clinical = summary.at("mean_clinical_reduction").get<double>();
  int infeasible_claims = 0;
  for (const auto& s : run.recommendations.at("subjects")) {
    if (!s.at("feasible").get<bool>()) continue;
    if (!(s.at("predicted_hamd_out").get<double>() <= 0.5 * s.at("hamd_in").get<double>())) ++infeasible_claims;
  }
  out.require(contains >= 0.95, "recommended sets contain t*");
  out.require(infeasible_claims == 0, "feasible recommendations meet the 50% bound");
  out.require(predicted > clinical, "predicted reduction exceeds clinical");
  out.note("orthonormality " + num(ortho) + ", reconstruction " + num(recon) + ", contains t* " + num(contains) +
           ", feasible " + std::to_string(summary.at("feasible").get<int>()) + "/" +
           std::to_string(summary.at("treated").get<int>()) + ", reduction " + num(predicted) + " vs " + num(clinical));
  fs::remove_all(run.root);
  return out;
}

// ---------------------------------------------------------------- criterion 7

Outcome responder() {
  Outcome out;
  out.require(gpr::responder_label(20, 14), "(20, 14) is a responder");
  out.require(!gpr::responder_label(20, 15), "(20, 15) is not a responder");
  out.note("(20,14) -> true, (20,15) -> false");
  return out;
}

// ---------------------------------------------------------------- criterion 8

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() == ".log") continue;
    out[fs::relative(entry.path(), root).generic_string()] = io::read_text(entry.path());
  }
  return out;
}

Outcome reproducibility() {
  const auto a = run_pipeline(scratch("repro_a"));
  const auto b = run_pipeline(scratch("repro_b"));
  const auto ta = tree_contents(a.root), tb = tree_contents(b.root);
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    if (it == tb.end() || it->second != bytes) differing.push_back(name);
  }
  for (const auto& [name, bytes] : tb) {
    if (!ta.count(name)) differing.push_back(name);
  }
  Outcome out;
  out.require(differing.empty(), "byte-identical outputs");
  out.note(std::to_string(ta.size()) + " files compared, " + std::to_string(differing.size()) + " differ" +
           (differing.empty() ? "" : " (first: " + differing.front() + ")"));
  fs::remove_all(a.root);
  fs::remove_all(b.root);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oeg acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"geodesic suite", geodesics},       {"VAR recovery", var_recovery},
      {"mixture suite", mixtures},         {"GP suite", gaussian_process},
      {"end-to-end synthetic status", synthetic_status}, {"causal suite", causal_suite},
      {"responder rule", responder},       {"reproducibility", reproducibility}};
  const std::set<int> selected(only.begin(), only.end());

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.note(std::string("exception: ") + e.what());
    }
    std::ostringstream line;
    line << "criterion " << id << " (" << criteria[i].first << "): " << (outcome.pass ? "PASS" : "FAIL");
    for (std::size_t k = 0; k < outcome.notes.size(); ++k) line << (k ? "; " : " - ") << outcome.notes[k];
    std::cout << line.str() << std::endl;
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
