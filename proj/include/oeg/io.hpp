#pragma once

// On-disk formats: landmark and auxiliary CSVs, per-recording segment JSON,
// the cohort manifest, and the binary artifact container.
//
// Binary artifacts start with one line of JSON (keys sorted, '\n'
// terminated), followed by an 8-byte magic and the payload: the blocks named
// in the header's "blocks" list, each rows x cols little-endian float64 in
// row-major order.

#include "oeg/manifold.hpp"
#include "oeg/synth.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oeg::io {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr std::string_view kFeatureMagic = "OEGFEAT1";
inline constexpr std::string_view kModelMagic = "OEGGMM01";
inline constexpr std::string_view kSupervectorMagic = "OEGSUPV1";
inline constexpr std::string_view kBasisMagic = "OEGBASE1";

// Shortest round-trip decimal form; identical inputs give identical bytes.
std::string format_double(double value);

// Throws MissingArtifact when the file does not exist, Format on read errors.
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

void write_landmark_csv(const fs::path& path, const manifold::LandmarkSequence& seq);
manifold::LandmarkSequence read_landmark_csv(const fs::path& path, double frame_rate);

inline const std::vector<std::string>& aux_channel_names() {
  static const std::vector<std::string> names{"pose_x", "pose_y", "pose_roll", "gaze_x", "gaze_y"};
  return names;
}
void write_aux_csv(const fs::path& path, const Matrix& aux);
Matrix read_aux_csv(const fs::path& path);

void write_segments(const fs::path& path, const synth::SegmentBounds& bounds, double frame_rate);
synth::SegmentBounds read_segments(const fs::path& path);

struct ManifestEntry {
  std::string subject;
  std::string session;  // admission | discharge
  causal::PatientType type = causal::PatientType::control;
  int hamd_in = 0;
  int hamd_out = 0;
  Vector treatment;
  int clinical_category = -1;
  int best_category = -1;
  double reaction_time_ms = 0.0;
  std::string landmarks;  // paths relative to the dataset directory
  std::string aux;
  std::string segments;

  std::string recording_id() const { return subject + "_" + session; }
};

struct Manifest {
  double frame_rate = 25.0;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> recordings;
};

void write_manifest(const fs::path& path, const Manifest& manifest);
Manifest read_manifest(const fs::path& path);

struct Block {
  std::string name;
  Matrix data;
};

struct BinaryFile {
  json header;
  std::vector<Block> blocks;

  const Matrix& block(std::string_view name) const;
};

void write_binary(const fs::path& path, std::string_view magic, json header, const std::vector<Block>& blocks);
BinaryFile read_binary(const fs::path& path, std::string_view magic);

// Files in `dir` with the given extension, sorted by name.
std::vector<fs::path> list_files(const fs::path& dir, std::string_view extension);

}  // namespace oeg::io
