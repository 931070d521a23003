#include "oeg/pipeline.hpp"

#include "oeg/causal.hpp"
#include "oeg/dynamics.hpp"
#include "oeg/error.hpp"
#include "oeg/gpr.hpp"
#include "oeg/io.hpp"
#include "oeg/log.hpp"
#include "oeg/manifold.hpp"
#include "oeg/parallel.hpp"
#include "oeg/ubm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>

namespace oeg::pipeline {
namespace {

using io::json;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json config_echo(const PipelineConfig& config) {
  json j = json::object();
  for (const auto& [k, v] : config.entries()) j[k] = v;
  return j;
}

Matrix column(const Vector& v) { return Matrix(v); }

template <typename T>
T header_field(const io::BinaryFile& file, const char* key, const fs::path& path) {
  try {
    return file.header.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Format, path.string() + ": header lacks '" + key + "'");
  }
}

// ---- features -------------------------------------------------------------

struct Geometry {
  const io::ManifestEntry* entry = nullptr;
  Matrix velocity;  // (frames - 1) x width
  Matrix aux;       // frames x 5
  Index degenerate = 0;
  Index gap_rows = 0;
  std::string error;
};

Geometry load_geometry(const fs::path& dataset, const io::Manifest& manifest, const io::ManifestEntry& entry,
                       manifold::Segment segment, const manifold::ManifoldConfig& mc) {
  Geometry g;
  g.entry = &entry;
  auto seq = io::read_landmark_csv(dataset / entry.landmarks, manifest.frame_rate);
  const Matrix aux = io::read_aux_csv(dataset / entry.aux);
  const auto bounds = io::read_segments(dataset / entry.segments);
  const auto frames = static_cast<Index>(seq.frames.size());
  if (bounds.frames != frames) fail(ErrorKind::LengthMismatch, "segment file disagrees with landmark frame count");
  const auto [begin, end] = bounds.range(segment);
  if (end - begin < 2) fail(ErrorKind::TooShort, "segment has fewer than two frames");
  seq.frames = std::vector<manifold::LandmarkFrame>(seq.frames.begin() + begin, seq.frames.begin() + end);
  seq.subject_id = entry.subject;
  seq.segment = segment;

  const auto vel = manifold::geodesic_velocity_series(seq, mc);
  g.velocity = vel.values;
  g.degenerate = static_cast<Index>(vel.degenerate_frames.size());
  g.gap_rows = static_cast<Index>(std::count(vel.gap.begin(), vel.gap.end(), true));
  const Index aux_end = std::min<Index>(end, aux.rows());
  if (aux_end - begin < 1) fail(ErrorKind::LengthMismatch, "aux channels do not cover the segment");
  g.aux = aux.middleRows(begin, aux_end - begin);
  return g;
}

dynamics::ReducedBasis pooled_basis(const Matrix& pooled, Index requested) {
  const Index width = pooled.cols();
  const Index rank = pooled.rows() > 1 ? dynamics::numerical_rank(pooled) : 0;
  const Index q = std::min({requested, width, rank});
  if (q < requested) {
    log::warn("reduction to " + std::to_string(requested) + " dimensions limited to " + std::to_string(std::max<Index>(q, 1)) +
              " (width " + std::to_string(width) + ", rank " + std::to_string(rank) + ")");
  }
  if (q == 0) {
    // Nothing varies: an identity slice maps every row to zeros after centering.
    dynamics::ReducedBasis b;
    const Index keep = std::max<Index>(1, std::min(requested, width));
    b.projection = Matrix::Identity(width, keep);
    b.mean = pooled.rows() ? Vector(pooled.colwise().mean().transpose()) : Vector(Vector::Zero(width));
    b.captured_variance = 1.0;
    return b;
  }
  return dynamics::fit_basis(pooled, q);
}

Matrix finite_rows(const std::vector<const Matrix*>& parts) {
  Index rows = 0, cols = 0;
  for (const auto* p : parts) {
    cols = p->cols();
    for (Index r = 0; r < p->rows(); ++r) rows += p->row(r).allFinite() ? 1 : 0;
  }
  Matrix out(rows, cols);
  Index k = 0;
  for (const auto* p : parts) {
    for (Index r = 0; r < p->rows(); ++r) {
      if (p->row(r).allFinite()) out.row(k++) = p->row(r);
    }
  }
  return out;
}

struct RawAtoms {
  Matrix atoms;
  Index skipped_windows = 0;
  Index ridge_windows = 0;
  Index channels = 0;
  bool low_variance = false;
};

RawAtoms var_atoms(const Geometry& g, const dynamics::ReducedBasis& geo_basis, const PipelineConfig& config,
                   double frame_rate) {
  dynamics::ChannelSeries geo;
  geo.values = g.velocity;
  geo.frame_rate = frame_rate;
  geo = dynamics::apply_basis(geo, geo_basis, "g");
  dynamics::ChannelSeries aux;
  aux.values = g.aux;
  aux.frame_rate = frame_rate;
  aux.channel_names = io::aux_channel_names();

  auto series = dynamics::assemble_channels(geo, std::span<const dynamics::ChannelSeries>(&aux, 1),
                                            dynamics::ConstantChannels::zero);
  dynamics::interpolate_gaps(series, config.integer("gap.max_frames"));
  const dynamics::WindowSpec spec{config.num("window.length_s"), config.num("window.overlap_s")};
  const int order = static_cast<int>(config.integer("var.order"));

  RawAtoms out;
  out.channels = series.width();
  std::vector<Vector> rows;
  for (const auto& w : dynamics::window(series, spec)) {
    if (!w.block.allFinite()) {
      ++out.skipped_windows;
      continue;
    }
    const auto model = dynamics::fit_var(w.block, order);
    out.ridge_windows += model.ridge ? 1 : 0;
    rows.push_back(dynamics::vectorize_coefficients(model));
  }
  if (rows.empty()) fail(ErrorKind::TooShort, "no complete window without gaps");
  out.atoms.resize(static_cast<Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.atoms.row(static_cast<Index>(i)) = rows[i].transpose();
  out.low_variance = out.atoms.cwiseAbs().maxCoeff() < 1e-12;
  return out;
}

// ---- mixture / supervector artifacts ---------------------------------------

struct LoadedModel {
  ubm::GmmModel model;
  io::BinaryFile file;
};

LoadedModel load_model(const fs::path& path) {
  LoadedModel out;
  out.file = io::read_binary(path, io::kModelMagic);
  out.model.weights = out.file.block("weights").col(0);
  out.model.means = out.file.block("means");
  out.model.variances = out.file.block("variances");
  out.model.variance_floor = out.file.block("variance_floor").col(0);
  out.model.seed = header_field<std::uint64_t>(out.file, "seed", path);
  try {
    out.model.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return out;
}

struct LoadedSupervector {
  ubm::Supervector sv;
  std::string session;
  double kl = 0.0;
  double wasserstein = 0.0;
  std::string adapt_hash;
};

std::vector<LoadedSupervector> load_supervectors(const fs::path& dir) {
  const auto files = io::list_files(dir, ".oegs");
  if (files.empty()) fail(ErrorKind::MissingArtifact, "no supervector files in " + dir.string());
  std::vector<LoadedSupervector> out;
  for (const auto& path : files) {
    const auto file = io::read_binary(path, io::kSupervectorMagic);
    LoadedSupervector s;
    s.sv.values = file.block("supervector").col(0);
    s.sv.subject_id = header_field<std::string>(file, "subject", path);
    s.sv.segment = header_field<std::string>(file, "segment", path);
    s.sv.prior_fingerprint = std::stoull(header_field<std::string>(file, "prior_fingerprint", path), nullptr, 16);
    s.session = header_field<std::string>(file, "session", path);
    s.kl = header_field<double>(file, "kl", path);
    s.wasserstein = header_field<double>(file, "wasserstein", path);
    s.adapt_hash = header_field<std::string>(file, "stage_hash", path);
    out.push_back(std::move(s));
  }
  for (const auto& s : out) {
    if (s.sv.prior_fingerprint != out.front().sv.prior_fingerprint) {
      fail(ErrorKind::PriorMismatch, "supervectors in " + dir.string() + " come from different background models");
    }
    if (s.adapt_hash != out.front().adapt_hash) {
      fail(ErrorKind::ConfigMismatch, "supervectors in " + dir.string() + " were adapted under different configs");
    }
  }
  return out;
}

std::map<std::string, const io::ManifestEntry*> index_manifest(const io::Manifest& m) {
  std::map<std::string, const io::ManifestEntry*> out;
  for (const auto& e : m.recordings) out[e.recording_id()] = &e;
  return out;
}

const io::ManifestEntry& lookup(const std::map<std::string, const io::ManifestEntry*>& index,
                                const LoadedSupervector& s) {
  const auto it = index.find(s.sv.subject_id + "_" + s.session);
  if (it == index.end()) {
    fail(ErrorKind::MissingArtifact, "manifest has no recording " + s.sv.subject_id + "_" + s.session);
  }
  return *it->second;
}

std::vector<std::string> names_of(const std::vector<int>& active) {
  std::vector<std::string> out;
  for (int c : active) out.emplace_back(causal::category_names()[static_cast<std::size_t>(c)]);
  return out;
}

std::vector<int> active_of(const Vector& w) {
  std::vector<int> out;
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) > 0.0) out.push_back(static_cast<int>(i));
  }
  return out;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void log_event(const fs::path& dir, const std::string& message) {
  fs::create_directories(dir);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  std::ofstream out(dir / "oeg.log", std::ios::app);
  out << stamp << ' ' << message << '\n';
}

synth::CohortSpec parse_cohort_spec(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Format, path.string() + ": cohort spec must be a JSON object");
  synth::CohortSpec spec;
  try {
    static const char* const known[] = {"counts", "duration_s", "frame_rate", "seed", "separation",
                                        "suboptimal_fraction", "discharge", "landmark_noise", "effects"};
    for (const auto& [key, value] : j.items()) {
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
          std::end(known)) {
        fail(ErrorKind::Format, path.string() + ": unknown field '" + key + "'");
      }
    }
    const std::array<const char*, 3> groups{"control", "depressive_like", "schizophrenic_like"};
    if (j.contains("counts")) {
      const auto& counts = j.at("counts");
      if (!counts.is_object()) fail(ErrorKind::Format, path.string() + ": 'counts' must be an object");
      for (const auto& [key, value] : counts.items()) {
        const auto it = std::find_if(groups.begin(), groups.end(), [&](const char* g) { return key == g; });
        if (it == groups.end()) fail(ErrorKind::Format, path.string() + ": unknown regime '" + key + "'");
        spec.counts[static_cast<std::size_t>(it - groups.begin())] = value.get<int>();
      }
    }
    if (j.contains("duration_s")) spec.duration_s = j.at("duration_s").get<double>();
    if (j.contains("frame_rate")) spec.frame_rate = j.at("frame_rate").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("separation")) spec.separation = j.at("separation").get<double>();
    if (j.contains("suboptimal_fraction")) spec.suboptimal_fraction = j.at("suboptimal_fraction").get<double>();
    if (j.contains("discharge")) spec.discharge = j.at("discharge").get<bool>();
    if (j.contains("landmark_noise")) spec.landmark_noise = j.at("landmark_noise").get<double>();
    if (j.contains("effects")) {
      for (const auto& [key, value] : j.at("effects").items()) {
        const auto it = std::find_if(groups.begin() + 1, groups.end(), [&](const char* g) { return key == g; });
        if (it == groups.end()) fail(ErrorKind::Format, path.string() + ": effects only apply to patient regimes");
        const auto row = value.get<std::vector<double>>();
        if (row.size() != causal::kCategories) fail(ErrorKind::Format, path.string() + ": effects need 11 entries");
        std::copy(row.begin(), row.end(), spec.effects[static_cast<std::size_t>(it - groups.begin())].begin());
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  try {
    spec.validate();
    for (std::size_t g = 1; g < 3; ++g) synth::make_regime(static_cast<causal::PatientType>(g), spec.separation);
  } catch (const Error& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return spec;
}

void cmd_synth(const synth::CohortSpec& spec, const fs::path& out_dir) {
  const auto subjects = synth::plan_cohort(spec);
  fs::create_directories(out_dir);

  struct Job {
    const synth::SubjectInfo* subject;
    std::string session;
  };
  std::vector<Job> jobs;
  for (const auto& s : subjects) {
    jobs.push_back({&s, "admission"});
    if (spec.discharge && s.type != causal::PatientType::control) jobs.push_back({&s, "discharge"});
  }

  io::Manifest manifest;
  manifest.frame_rate = spec.frame_rate;
  manifest.duration_s = spec.duration_s;
  manifest.seed = spec.seed;
  manifest.recordings.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto rec = synth::generate_recording(spec, *job.subject, job.session);
    io::ManifestEntry e;
    e.subject = job.subject->id;
    e.session = job.session;
    e.type = job.subject->type;
    e.hamd_in = job.subject->hamd_in;
    e.hamd_out = job.subject->hamd_out;
    e.treatment = job.subject->treatment;
    e.clinical_category = job.subject->clinical_category;
    e.best_category = job.subject->best_category;
    e.reaction_time_ms = job.subject->reaction_time_ms;
    const std::string stem = e.recording_id();
    e.landmarks = stem + "_landmarks.csv";
    e.aux = stem + "_aux.csv";
    e.segments = stem + "_segments.json";
    io::write_landmark_csv(out_dir / e.landmarks, rec.landmarks);
    io::write_aux_csv(out_dir / e.aux, rec.aux);
    io::write_segments(out_dir / e.segments, rec.segments, spec.frame_rate);
    manifest.recordings[i] = std::move(e);
  });
  io::write_manifest(out_dir / "manifest.json", manifest);
  log_event(out_dir, "synth: " + std::to_string(jobs.size()) + " recordings");
}

int cmd_features(const fs::path& dataset_dir, const PipelineConfig& config, const fs::path& out_dir) {
  const auto manifest = io::read_manifest(dataset_dir / "manifest.json");
  if (manifest.recordings.empty()) fail(ErrorKind::Format, "manifest lists no recordings");
  const auto segment = manifold::parse_segment(config.str("segment"));
  manifold::ManifoldConfig mc;
  mc.k = config.num("manifold.k");
  mc.eps = config.num("manifold.eps");
  mc.validate();
  const dynamics::WindowSpec wspec{config.num("window.length_s"), config.num("window.overlap_s")};
  wspec.validate();
  if (config.integer("var.order") < 1) fail(ErrorKind::Format, "var.order must be at least 1");
  if (config.integer("reduce.geodesic") < 1 || config.integer("reduce.coeff") < 1) {
    fail(ErrorKind::Format, "reduction dimensions must be at least 1");
  }

  std::vector<Geometry> geometry(manifest.recordings.size());
  parallel_for(geometry.size(), [&](std::size_t i) {
    try {
      geometry[i] = load_geometry(dataset_dir, manifest, manifest.recordings[i], segment, mc);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::MissingArtifact) throw;
      geometry[i].entry = &manifest.recordings[i];
      geometry[i].error = e.what();
    }
  });

  int failures = 0;
  auto report_failure = [&](Geometry& g) {
    std::cerr << "features: " << g.entry->recording_id() << ": " << g.error << '\n';
    ++failures;
  };
  std::vector<const Matrix*> velocity_parts;
  for (auto& g : geometry) {
    if (g.error.empty()) velocity_parts.push_back(&g.velocity);
  }
  if (velocity_parts.empty()) {
    for (auto& g : geometry) report_failure(g);
    return failures;
  }
  const auto geo_basis = pooled_basis(finite_rows(velocity_parts), config.integer("reduce.geodesic"));

  std::vector<RawAtoms> raw(geometry.size());
  parallel_for(geometry.size(), [&](std::size_t i) {
    if (!geometry[i].error.empty()) return;
    try {
      raw[i] = var_atoms(geometry[i], geo_basis, config, manifest.frame_rate);
    } catch (const Error& e) {
      geometry[i].error = e.what();
    }
  });
  std::vector<const Matrix*> atom_parts;
  for (std::size_t i = 0; i < geometry.size(); ++i) {
    if (geometry[i].error.empty()) atom_parts.push_back(&raw[i].atoms);
  }
  for (auto& g : geometry) {
    if (!g.error.empty()) report_failure(g);
  }
  if (atom_parts.empty()) return failures;
  // Coefficients of near-integrated channels (pose) vary far more than the
  // rest; scaling every coefficient to unit variance keeps them from owning
  // the principal directions.
  const Matrix pooled_atoms = finite_rows(atom_parts);
  const Vector coeff_center = pooled_atoms.colwise().mean().transpose();
  Vector coeff_scale =
      ((pooled_atoms.rowwise() - coeff_center.transpose()).cwiseAbs2().colwise().mean().transpose()).cwiseSqrt();
  const double scale_floor = 1e-12 * std::max(1.0, coeff_scale.maxCoeff());
  for (Index j = 0; j < coeff_scale.size(); ++j) {
    if (!(coeff_scale(j) > scale_floor)) coeff_scale(j) = 1.0;
  }
  auto standardize = [&](const Matrix& a) -> Matrix {
    return ((a.rowwise() - coeff_center.transpose()).array().rowwise() / coeff_scale.transpose().array()).matrix();
  };
  const auto coeff_basis = pooled_basis(standardize(pooled_atoms), config.integer("reduce.coeff"));

  fs::create_directories(out_dir);
  json common;
  common["stage_hash"] = config.stage_hash(Stage::features);
  common["config_hash"] = config.full_hash();
  common["config"] = config_echo(config);
  common["segment"] = config.str("segment");

  json basis_header = common;
  basis_header["kind"] = "basis";
  basis_header["geodesic_captured_variance"] = geo_basis.captured_variance;
  basis_header["coeff_captured_variance"] = coeff_basis.captured_variance;
  io::write_binary(out_dir / "basis.oegb", io::kBasisMagic, basis_header,
                   {{"geodesic_projection", geo_basis.projection},
                    {"geodesic_mean", column(geo_basis.mean)},
                    {"coeff_center", column(coeff_center)},
                    {"coeff_scale", column(coeff_scale)},
                    {"coeff_projection", coeff_basis.projection},
                    {"coeff_mean", column(coeff_basis.mean)}});

  Index written = 0;
  for (std::size_t i = 0; i < geometry.size(); ++i) {
    const auto& g = geometry[i];
    if (!g.error.empty()) continue;
    const Matrix atoms = dynamics::apply_basis(standardize(raw[i].atoms), coeff_basis);
    json h = common;
    h["kind"] = "features";
    h["subject"] = g.entry->subject;
    h["session"] = g.entry->session;
    h["windows"] = atoms.rows();
    h["atom_dim"] = atoms.cols();
    h["channels"] = raw[i].channels;
    h["var_order"] = config.integer("var.order");
    h["low_variance"] = raw[i].low_variance;
    h["skipped_windows"] = raw[i].skipped_windows;
    h["ridge_windows"] = raw[i].ridge_windows;
    h["degenerate_frames"] = g.degenerate;
    h["gap_rows"] = g.gap_rows;
    io::write_binary(out_dir / (g.entry->recording_id() + ".oegf"), io::kFeatureMagic, h, {{"atoms", atoms}});
    ++written;
  }
  log_event(out_dir, "features: " + std::to_string(written) + " written, " + std::to_string(failures) + " failed");
  return failures;
}

void cmd_train_ubm(const fs::path& features_dir, const PipelineConfig& config, const fs::path& out_file) {
  const auto files = io::list_files(features_dir, ".oegf");
  if (files.empty()) fail(ErrorKind::MissingArtifact, "no feature files in " + features_dir.string());
  std::vector<Matrix> parts;
  std::string features_hash;
  Index rows = 0;
  for (const auto& path : files) {
    auto file = io::read_binary(path, io::kFeatureMagic);
    const auto hash = header_field<std::string>(file, "stage_hash", path);
    if (features_hash.empty()) features_hash = hash;
    if (hash != features_hash) fail(ErrorKind::ConfigMismatch, path.string() + ": feature config differs from its siblings");
    parts.push_back(file.block("atoms"));
    rows += parts.back().rows();
    if (parts.back().cols() != parts.front().cols()) fail(ErrorKind::Format, path.string() + ": atom width differs");
  }
  Matrix atoms(rows, parts.front().cols());
  Index k = 0;
  for (const auto& p : parts) {
    atoms.middleRows(k, p.rows()) = p;
    k += p.rows();
  }

  ubm::EmOptions options;
  options.components = config.integer("ubm.components");
  options.seed = static_cast<std::uint64_t>(config.integer("seed"));
  options.max_iters = static_cast<int>(config.integer("ubm.max_iters"));
  options.floor_frac = config.num("ubm.floor_frac");
  ubm::EmTrace trace;
  const auto model = ubm::train_em(atoms, options, &trace);

  json h;
  h["kind"] = "ubm";
  h["components"] = model.components();
  h["dim"] = model.dim();
  h["seed"] = model.seed;
  h["atoms"] = atoms.rows();
  h["fingerprint"] = hex64(model.fingerprint());
  h["features_hash"] = features_hash;
  h["stage_hash"] = config.stage_hash(Stage::ubm);
  h["config_hash"] = config.full_hash();
  h["config"] = config_echo(config);
  h["em"] = {{"iterations", trace.iterations},
             {"converged", trace.converged},
             {"reseeded_iterations", trace.reseeded_iterations},
             {"mean_log_likelihood", trace.mean_log_likelihood.back()}};
  io::write_binary(out_file, io::kModelMagic, h,
                   {{"weights", column(model.weights)},
                    {"means", model.means},
                    {"variances", model.variances},
                    {"variance_floor", column(model.variance_floor)}});
  log_event(out_file.has_parent_path() ? out_file.parent_path() : fs::path("."),
            "train-ubm: C=" + std::to_string(model.components()) + " on " + std::to_string(atoms.rows()) + " atoms");
}

void cmd_adapt(const fs::path& features_dir, const fs::path& ubm_file, const PipelineConfig& config,
               const fs::path& out_dir) {
  const auto prior = load_model(ubm_file);
  const auto features_hash = header_field<std::string>(prior.file, "features_hash", ubm_file);
  const auto ubm_hash = header_field<std::string>(prior.file, "stage_hash", ubm_file);
  const auto files = io::list_files(features_dir, ".oegf");
  if (files.empty()) fail(ErrorKind::MissingArtifact, "no feature files in " + features_dir.string());
  const auto posterior = config.flag("ubm.weighted_posterior") ? ubm::Posterior::weighted : ubm::Posterior::unweighted;
  const double relevance = config.num("ubm.relevance");
  const std::string fingerprint = hex64(prior.model.fingerprint());

  fs::create_directories(out_dir);
  {
    // The prior's own supervector: the origin that MAP offsets are measured from.
    const ubm::AdaptedModel unadapted{prior.model.means, prior.model.weights, prior.model.fingerprint()};
    json h;
    h["kind"] = "prior_supervector";
    h["prior_fingerprint"] = fingerprint;
    h["ubm_hash"] = ubm_hash;
    io::write_binary(out_dir / "prior.oegp", io::kSupervectorMagic, h,
                     {{"supervector", column(ubm::supervector(unadapted, prior.model).values)}});
  }
  for (const auto& path : files) {
    const auto file = io::read_binary(path, io::kFeatureMagic);
    if (header_field<std::string>(file, "stage_hash", path) != features_hash) {
      fail(ErrorKind::ConfigMismatch, path.string() + " was not produced under the background model's feature config");
    }
    const Matrix& atoms = file.block("atoms");
    const auto stats = ubm::accumulate(prior.model, atoms, posterior);
    const auto adapted = ubm::map_adapt(stats, prior.model, relevance);
    auto sv = ubm::supervector(adapted, prior.model);

    json h;
    h["kind"] = "supervector";
    h["subject"] = header_field<std::string>(file, "subject", path);
    h["session"] = header_field<std::string>(file, "session", path);
    h["segment"] = header_field<std::string>(file, "segment", path);
    h["atoms"] = atoms.rows();
    h["prior_fingerprint"] = fingerprint;
    h["kl"] = ubm::kl_distance(prior.model, adapted);
    h["wasserstein"] = ubm::weight_wasserstein(prior.model, adapted);
    h["features_hash"] = features_hash;
    h["ubm_hash"] = ubm_hash;
    h["stage_hash"] = config.stage_hash(Stage::adapt);
    h["config_hash"] = config.full_hash();
    io::write_binary(out_dir / (path.stem().string() + ".oegs"), io::kSupervectorMagic, h,
                     {{"supervector", column(sv.values)}, {"weights", column(adapted.weights)}});
  }
  log_event(out_dir, "adapt: " + std::to_string(files.size()) + " supervectors");
}

void cmd_kernel_matrix(const fs::path& sv_dir, const fs::path& out_file) {
  const auto svs = load_supervectors(sv_dir);
  const auto n = static_cast<Index>(svs.size());
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      k(i, j) = ubm::kernel(svs[static_cast<std::size_t>(i)].sv, svs[static_cast<std::size_t>(j)].sv);
      k(j, i) = k(i, j);
    }
  }
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(k, Eigen::EigenvaluesOnly).eigenvalues();
  if (eig.minCoeff() < -1e-8 * std::max(1.0, eig.cwiseAbs().maxCoeff())) {
    log::warn("kernel matrix is not positive semidefinite (min eigenvalue " + io::format_double(eig.minCoeff()) + ")");
  }
  std::string out = "id";
  for (const auto& s : svs) out += "," + s.sv.subject_id + "_" + s.session;
  out += '\n';
  for (Index i = 0; i < n; ++i) {
    const auto& s = svs[static_cast<std::size_t>(i)];
    out += s.sv.subject_id + "_" + s.session;
    for (Index j = 0; j < n; ++j) out += "," + io::format_double(k(i, j));
    out += '\n';
  }
  io::write_text(out_file, out);
  log_event(out_file.has_parent_path() ? out_file.parent_path() : fs::path("."),
            "kernel-matrix: " + std::to_string(n) + " recordings");
}

void cmd_cv(const fs::path& sv_dir, const fs::path& dataset_dir, const PipelineConfig& config,
            const fs::path& out_dir) {
  const auto svs = load_supervectors(sv_dir);
  const auto manifest = io::read_manifest(dataset_dir / "manifest.json");
  const auto index = index_manifest(manifest);
  gpr::GpConfig gp{config.num("gp.bias_var"), config.num("gp.noise_var"), config.flag("gp.normalize")};
  Vector origin = Vector::Zero(svs.front().sv.values.size());
  if (config.flag("gp.center")) {
    const fs::path prior_path = sv_dir / "prior.oegp";
    const auto prior = io::read_binary(prior_path, io::kSupervectorMagic);
    const auto fp = std::stoull(header_field<std::string>(prior, "prior_fingerprint", prior_path), nullptr, 16);
    if (fp != svs.front().sv.prior_fingerprint) {
      fail(ErrorKind::PriorMismatch, prior_path.string() + " belongs to a different background model");
    }
    origin = prior.block("supervector").col(0);
  }

  struct Target {
    std::string name;
    bool patients_only;
    double (*value)(const io::ManifestEntry&);
  };
  const std::vector<Target> targets{
      {"status", false, [](const io::ManifestEntry& e) { return e.type == causal::PatientType::control ? -1.0 : 1.0; }},
      {"type", true,
       [](const io::ManifestEntry& e) { return e.type == causal::PatientType::schizophrenic_like ? 1.0 : -1.0; }},
      {"hamd_out", true, [](const io::ManifestEntry& e) { return static_cast<double>(e.hamd_out); }},
      {"responder", true,
       [](const io::ManifestEntry& e) { return gpr::responder_label(e.hamd_in, e.hamd_out) ? 1.0 : -1.0; }},
  };

  json report;
  report["stage_hash"] = config.stage_hash(Stage::evaluation);
  report["adapt_hash"] = svs.front().adapt_hash;
  report["config_hash"] = config.full_hash();
  report["targets"] = json::object();
  fs::create_directories(out_dir);
  for (const auto& t : targets) {
    std::vector<gpr::Sample> samples;
    for (const auto& s : svs) {
      if (s.session != "admission") continue;
      const auto& e = lookup(index, s);
      if (t.patients_only && e.type == causal::PatientType::control) continue;
      samples.push_back({e.subject, s.sv.subject_id + "_" + s.session, s.sv.values - origin, t.value(e)});
    }
    json entry;
    entry["target_name"] = t.name;
    entry["n_subjects"] = samples.size();
    std::string csv = "subject,y_true,y_pred\n";
    try {
      const auto r = gpr::loso_cv(samples, gp, t.name);
      entry["pearson_r"] = r.pearson_r;
      entry["folds"] = r.folds;
      entry["skipped_subjects"] = r.skipped_subjects;
      json rows = json::array();
      for (const auto& p : r.predictions) {
        rows.push_back({{"id", p.subject}, {"y_true", p.y_true}, {"y_pred", p.y_pred}});
        csv += p.subject + "," + io::format_double(p.y_true) + "," + io::format_double(p.y_pred) + "\n";
      }
      entry["per_subject"] = std::move(rows);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ZeroVariance && e.kind() != ErrorKind::InvalidArgument) throw;
      entry["pearson_r"] = nullptr;
      entry["per_subject"] = json::array();
      entry["error"] = std::string(to_string(e.kind())) + ": " + e.what();
    }
    io::write_text(out_dir / ("cv_" + t.name + ".csv"), csv);
    report["targets"][t.name] = std::move(entry);
  }
  io::write_text(out_dir / "cv_report.json", report.dump(2) + "\n");
  log_event(out_dir, "cv: " + std::to_string(targets.size()) + " targets");
}

void cmd_causal(const fs::path& sv_dir, const fs::path& dataset_dir, const PipelineConfig& config,
                const fs::path& out_dir) {
  const auto svs = load_supervectors(sv_dir);
  const auto manifest = io::read_manifest(dataset_dir / "manifest.json");
  const auto index = index_manifest(manifest);

  causal::CausalConfig cc;
  cc.features = config.integer("causal.features");
  cc.bins.count = static_cast<int>(config.integer("causal.bins"));
  cc.bins.width = config.num("causal.bin_width");
  cc.ranks = {config.integer("causal.rank_features"), config.integer("causal.rank_treatment"),
              config.integer("causal.rank_severity")};
  cc.max_active = static_cast<int>(config.integer("causal.max_active"));

  std::vector<causal::SubjectRecord> records;
  std::vector<const io::ManifestEntry*> entries;
  for (const auto& s : svs) {
    if (s.session != "admission") continue;
    const auto& e = lookup(index, s);
    records.push_back({e.subject, s.sv.values, e.treatment, e.hamd_in, e.hamd_out, e.type});
    entries.push_back(&e);
  }
  const auto tensor = causal::build_tensor(records, cc);
  const auto model = causal::hosvd(tensor.data, cc.ranks);

  json subjects = json::array();
  std::vector<int> clinical_count(causal::kCategories, 0), recommended_count(causal::kCategories, 0);
  double predicted_reduction = 0.0, clinical_reduction = 0.0;
  int valid = 0, feasible = 0, with_best = 0, best_known = 0, treated = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.treated() || r.hamd_in <= 0) continue;
    ++treated;
    const auto x = tensor.reducer.reduce(r.supervector);
    const auto rec = causal::recommend(model, tensor.bins, x, r.hamd_in, r.treatment, cc.max_active, cc.tie_tolerance);
    const auto clinical = active_of(r.treatment);
    for (int c : clinical) ++clinical_count[static_cast<std::size_t>(c)];
    for (int c : rec.active) ++recommended_count[static_cast<std::size_t>(c)];
    clinical_reduction += r.hamd_in - r.hamd_out;
    if (std::isfinite(rec.predicted_hamd_out)) {
      ++valid;
      predicted_reduction += r.hamd_in - rec.predicted_hamd_out;
    }
    feasible += rec.feasible ? 1 : 0;
    const int best = entries[i]->best_category;
    if (best >= 0) {
      ++best_known;
      with_best += std::find(rec.active.begin(), rec.active.end(), best) != rec.active.end() ? 1 : 0;
    }
    subjects.push_back({{"subject", r.subject},
                        {"hamd_in", r.hamd_in},
                        {"hamd_out", r.hamd_out},
                        {"clinical", names_of(clinical)},
                        {"recommended", names_of(rec.active)},
                        {"predicted_hamd_out", number_or_null(rec.predicted_hamd_out)},
                        {"feasible", rec.feasible},
                        {"distance_from_clinical", rec.distance_from_clinical}});
  }

  json out;
  out["stage_hash"] = config.stage_hash(Stage::evaluation);
  out["adapt_hash"] = svs.front().adapt_hash;
  out["config_hash"] = config.full_hash();
  out["model"] = {{"ranks", {model.modes[0].cols(), model.modes[1].cols(), model.modes[2].cols()}},
                  {"features", tensor.reducer.features()},
                  {"records", tensor.records},
                  {"reconstruction_error", model.reconstruction_error},
                  {"relative_error", model.relative_error}};
  out["summary"] = {{"treated", treated},
                    {"feasible", feasible},
                    {"mean_clinical_reduction", treated ? clinical_reduction / treated : 0.0},
                    {"mean_predicted_reduction", number_or_null(valid ? predicted_reduction / valid : NAN)},
                    {"contains_best_fraction", number_or_null(best_known ? double(with_best) / best_known : NAN)}};
  out["subjects"] = std::move(subjects);
  fs::create_directories(out_dir);
  io::write_text(out_dir / "recommendations.json", out.dump(2) + "\n");

  std::string freq = "category,name,clinical,recommended\n";
  for (int c = 0; c < causal::kCategories; ++c) {
    freq += std::to_string(c + 1) + ",\"" + std::string(causal::category_names()[static_cast<std::size_t>(c)]) +
            "\"," + std::to_string(clinical_count[static_cast<std::size_t>(c)]) + "," +
            std::to_string(recommended_count[static_cast<std::size_t>(c)]) + "\n";
  }
  io::write_text(out_dir / "category_frequency.csv", freq);

  std::vector<ubm::Supervector> controls;
  for (const auto& s : svs) {
    if (s.session == "admission" && lookup(index, s).type == causal::PatientType::control) controls.push_back(s.sv);
  }
  if (controls.empty()) {
    log::warn("causal: no admission controls, control_dot.csv not written");
  } else {
    std::string dot = "subject,session,type,dot\n";
    for (const auto& s : svs) {
      dot += s.sv.subject_id + "," + s.session + "," + std::string(causal::to_string(lookup(index, s).type)) + "," +
             io::format_double(ubm::control_mean_dot(s.sv, controls)) + "\n";
    }
    io::write_text(out_dir / "control_dot.csv", dot);
  }

  std::string rt = "subject,session,type,wasserstein,reaction_time_ms\n";
  for (const auto& s : svs) {
    const auto& e = lookup(index, s);
    rt += s.sv.subject_id + "," + s.session + "," + std::string(causal::to_string(e.type)) + "," +
          io::format_double(s.wasserstein) + "," + io::format_double(e.reaction_time_ms) + "\n";
  }
  io::write_text(out_dir / "wasserstein_rt.csv", rt);
  log_event(out_dir, "causal: " + std::to_string(treated) + " treated subjects");
}

std::string cmd_report(const fs::path& results_dir, const fs::path& out_file) {
  const fs::path cv_path = results_dir / "cv_report.json";
  const fs::path causal_path = results_dir / "recommendations.json";
  if (!fs::exists(cv_path) && !fs::exists(causal_path)) {
    fail(ErrorKind::MissingArtifact, "missing file: " + cv_path.string() + " (and no recommendations.json)");
  }
  json summary = json::object();
  std::string text;
  try {
    if (fs::exists(cv_path)) {
      const auto cv = json::parse(io::read_text(cv_path));
      for (const auto& [name, entry] : cv.at("targets").items()) {
        summary["cv"][name] = entry.at("pearson_r");
        text += "cv " + name + ": r = " +
                (entry.at("pearson_r").is_null() ? std::string("n/a") : io::format_double(entry.at("pearson_r").get<double>())) +
                "\n";
      }
    }
    if (fs::exists(causal_path)) {
      const auto rec = json::parse(io::read_text(causal_path));
      summary["causal"] = rec.at("summary");
      for (const auto& [name, value] : rec.at("summary").items()) text += "causal " + name + ": " + value.dump() + "\n";
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, results_dir.string() + ": " + e.what());
  }
  io::write_text(out_file, summary.dump(2) + "\n");
  return text;
}

}  // namespace oeg::pipeline
