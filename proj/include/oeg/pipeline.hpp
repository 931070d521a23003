#pragma once

// Command implementations behind the `oeg` tool. Each reads artifacts from
// disk and writes its outputs deterministically; timestamps only ever go to
// the `oeg.log` sidecar in the output directory.

#include "oeg/config.hpp"
#include "oeg/synth.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace oeg::pipeline {

namespace fs = std::filesystem;

// JSON cohort spec, e.g.
//   {"counts": {"control": 20, "depressive_like": 10, "schizophrenic_like": 10},
//    "duration_s": 120, "frame_rate": 25, "seed": 1, "separation": 1.0,
//    "suboptimal_fraction": 0.5, "discharge": false, "landmark_noise": 0.05,
//    "effects": {"depressive_like": [11 values], "schizophrenic_like": [...]}}
// Every field is optional. Throws Format on malformed input.
synth::CohortSpec parse_cohort_spec(const fs::path& path);

// Writes <subject>_<session>_{landmarks.csv,aux.csv,segments.json} per
// recording plus manifest.json.
void cmd_synth(const synth::CohortSpec& spec, const fs::path& out_dir);

// Returns the number of recordings that failed (each is reported on stderr
// and skipped). Writes one .oegf per recording plus basis.oegb.
int cmd_features(const fs::path& dataset_dir, const PipelineConfig& config, const fs::path& out_dir);

void cmd_train_ubm(const fs::path& features_dir, const PipelineConfig& config, const fs::path& out_file);

void cmd_adapt(const fs::path& features_dir, const fs::path& ubm_file, const PipelineConfig& config,
               const fs::path& out_dir);

void cmd_kernel_matrix(const fs::path& sv_dir, const fs::path& out_file);

// LOSO GP regression for status, type, hamd_out and responder on admission
// supervectors: cv_report.json plus cv_<target>.csv (subject,y_true,y_pred).
void cmd_cv(const fs::path& sv_dir, const fs::path& dataset_dir, const PipelineConfig& config,
            const fs::path& out_dir);

// Tucker model and counterfactual search: recommendations.json,
// category_frequency.csv, control_dot.csv and wasserstein_rt.csv.
void cmd_causal(const fs::path& sv_dir, const fs::path& dataset_dir, const PipelineConfig& config,
                const fs::path& out_dir);

// Condenses cv_report.json and recommendations.json from `results_dir` into
// summary.json; returns the text printed to stdout.
std::string cmd_report(const fs::path& results_dir, const fs::path& out_file);

// Appends a timestamped line to <dir>/oeg.log.
void log_event(const fs::path& dir, const std::string& message);

}  // namespace oeg::pipeline
