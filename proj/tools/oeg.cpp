// oeg: command-line front end for the face-dynamics pipeline.
//
// Exit codes: 0 success, 1 runtime failure, 2 malformed input or config,
// 3 missing artifact.

#include "oeg/config.hpp"
#include "oeg/error.hpp"
#include "oeg/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

int exit_code(oeg::ErrorKind kind) {
  switch (kind) {
    case oeg::ErrorKind::MissingArtifact:
      return 3;
    case oeg::ErrorKind::Format:
    case oeg::ErrorKind::InvalidArgument:
    case oeg::ErrorKind::ConfigMismatch:
    case oeg::ErrorKind::InvalidScore:
      return 2;
    default:
      return 1;
  }
}

struct CommonOptions {
  std::string config_path;
  std::optional<std::string> segment;
  std::optional<long> components;
  std::optional<long> seed;

  oeg::PipelineConfig resolve() const {
    auto cfg = config_path.empty() ? oeg::PipelineConfig{} : oeg::PipelineConfig::load(config_path);
    if (segment) cfg.set("segment", *segment);
    if (components) cfg.set("ubm.components", std::to_string(*components));
    if (seed) cfg.set("seed", std::to_string(*seed));
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face-dynamics feature pipeline: synthetic cohorts, shape-geodesic VAR features, "
               "background-model supervectors, GP evaluation and counterfactual treatment search"};
  app.require_subcommand(1);
  CommonOptions common;
  std::string in_a, in_b, out;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "key=value config file");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("spec", in_a, "cohort spec (JSON)")->required();
  synth->add_option("--out", out, "dataset directory")->required();
  synth->add_option("--seed", common.seed, "override the spec seed");

  auto* features = app.add_subcommand("features", "extract VAR coefficient atoms per recording");
  features->add_option("dataset", in_a, "dataset directory with manifest.json")->required();
  features->add_option("--out", out, "feature directory")->required();
  features->add_option("--segment", common.segment, "full | interview | mimic | story");
  add_config(features);

  auto* train = app.add_subcommand("train-ubm", "train the background mixture");
  train->add_option("features", in_a, "feature directory")->required();
  train->add_option("--out", out, "model file")->required();
  train->add_option("--components", common.components, "mixture size");
  train->add_option("--seed", common.seed, "initialization seed");
  add_config(train);

  auto* adapt = app.add_subcommand("adapt", "MAP-adapt the mixture per recording");
  adapt->add_option("features", in_a, "feature directory")->required();
  adapt->add_option("ubm", in_b, "model file")->required();
  adapt->add_option("--out", out, "supervector directory")->required();
  add_config(adapt);

  auto* kernel = app.add_subcommand("kernel-matrix", "supervector dot-product kernel");
  kernel->add_option("supervectors", in_a, "supervector directory")->required();
  kernel->add_option("--out", out, "CSV file")->required();

  auto* cv = app.add_subcommand("cv", "leave-one-subject-out GP regression");
  cv->add_option("supervectors", in_a, "supervector directory")->required();
  cv->add_option("dataset", in_b, "dataset directory with manifest.json")->required();
  cv->add_option("--out", out, "report directory")->required();
  add_config(cv);

  auto* causal = app.add_subcommand("causal", "Tucker model and counterfactual treatment search");
  causal->add_option("supervectors", in_a, "supervector directory")->required();
  causal->add_option("dataset", in_b, "dataset directory with manifest.json")->required();
  causal->add_option("--out", out, "report directory")->required();
  add_config(causal);

  auto* report = app.add_subcommand("report", "summarize cv and causal outputs");
  report->add_option("results", in_a, "directory holding cv_report.json / recommendations.json")->required();
  report->add_option("--out", out, "summary JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      auto spec = oeg::pipeline::parse_cohort_spec(in_a);
      if (common.seed) spec.seed = static_cast<std::uint64_t>(*common.seed);
      oeg::pipeline::cmd_synth(spec, out);
    } else if (*features) {
      const int failed = oeg::pipeline::cmd_features(in_a, common.resolve(), out);
      if (failed > 0) {
        std::cerr << "features: " << failed << " recording(s) failed\n";
        return 1;
      }
    } else if (*train) {
      oeg::pipeline::cmd_train_ubm(in_a, common.resolve(), out);
    } else if (*adapt) {
      oeg::pipeline::cmd_adapt(in_a, in_b, common.resolve(), out);
    } else if (*kernel) {
      oeg::pipeline::cmd_kernel_matrix(in_a, out);
    } else if (*cv) {
      oeg::pipeline::cmd_cv(in_a, in_b, common.resolve(), out);
    } else if (*causal) {
      oeg::pipeline::cmd_causal(in_a, in_b, common.resolve(), out);
    } else if (*report) {
      std::cout << oeg::pipeline::cmd_report(in_a, out);
    }
  } catch (const oeg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
