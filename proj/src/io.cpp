#include "oeg/io.hpp"

#include "oeg/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace oeg::io {
namespace {

static_assert(std::endian::native == std::endian::little, "binary artifacts assume a little-endian host");

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view text, const fs::path& path, std::size_t line) {
  double value = 0.0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    if (text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
    fail(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": bad number '" + std::string(text) + "'");
  }
  return value;
}

long parse_int(std::string_view text, const fs::path& path, std::size_t line) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": bad integer '" + std::string(text) + "'");
  }
  return value;
}

// Line iterator over a whole-file buffer; strips a trailing '\r'.
class Lines {
 public:
  explicit Lines(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const auto end = text_.find('\n', pos_);
    line = text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_);
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number_;
    return true;
  }
  std::size_t number() const { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

template <typename T>
T field(const json& j, const char* key, const fs::path& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) fail(ErrorKind::Format, "cannot format number");
  return std::string(buf, ptr);
}

std::string read_text(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::MissingArtifact, "missing file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Format, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Format, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::Format, "write failed: " + path.string());
}

void write_landmark_csv(const fs::path& path, const manifold::LandmarkSequence& seq) {
  if (seq.frames.empty()) fail(ErrorKind::InvalidArgument, "empty landmark sequence");
  const auto d = seq.frames.front().dim();
  std::string out = d == 3 ? "frame,landmark,x,y,z\n" : "frame,landmark,x,y\n";
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const auto& p = seq.frames[t].points;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      out += std::to_string(t);
      out += ',';
      out += std::to_string(i);
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        out += ',';
        out += format_double(p(i, c));
      }
      out += '\n';
    }
  }
  write_text(path, out);
}

manifold::LandmarkSequence read_landmark_csv(const fs::path& path, double frame_rate) {
  const std::string text = read_text(path);
  Lines lines(text);
  std::string_view line;
  if (!lines.next(line)) fail(ErrorKind::Format, path.string() + ": empty file");
  Eigen::Index dim = 0;
  if (line == "frame,landmark,x,y") {
    dim = 2;
  } else if (line == "frame,landmark,x,y,z") {
    dim = 3;
  } else {
    fail(ErrorKind::Format, path.string() + ": unexpected header '" + std::string(line) + "'");
  }

  std::vector<std::vector<double>> rows;  // per frame, flattened landmark-major
  long expected_landmark = 0;
  while (lines.next(line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (static_cast<Eigen::Index>(cells.size()) != 2 + dim) {
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(lines.number()) + ": wrong column count");
    }
    const long frame = parse_int(cells[0], path, lines.number());
    const long landmark = parse_int(cells[1], path, lines.number());
    if (frame == static_cast<long>(rows.size())) {
      rows.emplace_back();
      expected_landmark = 0;
    }
    if (frame != static_cast<long>(rows.size()) - 1 || landmark != expected_landmark) {
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(lines.number()) + ": rows out of order");
    }
    ++expected_landmark;
    for (Eigen::Index c = 0; c < dim; ++c) rows.back().push_back(parse_double(cells[2 + c], path, lines.number()));
  }
  if (rows.empty()) fail(ErrorKind::Format, path.string() + ": no landmark rows");

  manifold::LandmarkSequence seq;
  seq.frame_rate = frame_rate;
  const auto n = static_cast<Eigen::Index>(rows.front().size()) / dim;
  for (const auto& r : rows) {
    if (static_cast<Eigen::Index>(r.size()) != n * dim) fail(ErrorKind::Format, path.string() + ": ragged frames");
    manifold::LandmarkFrame f;
    f.points = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        r.data(), n, dim);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

void write_aux_csv(const fs::path& path, const Matrix& aux) {
  const auto& names = aux_channel_names();
  if (aux.cols() != static_cast<Eigen::Index>(names.size())) fail(ErrorKind::InvalidArgument, "aux needs 5 columns");
  std::string out = "frame";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (Eigen::Index t = 0; t < aux.rows(); ++t) {
    out += std::to_string(t);
    for (Eigen::Index c = 0; c < aux.cols(); ++c) {
      out += ',';
      out += format_double(aux(t, c));
    }
    out += '\n';
  }
  write_text(path, out);
}

Matrix read_aux_csv(const fs::path& path) {
  const std::string text = read_text(path);
  Lines lines(text);
  std::string_view line;
  if (!lines.next(line)) fail(ErrorKind::Format, path.string() + ": empty file");
  std::string header = "frame";
  for (const auto& n : aux_channel_names()) header += "," + n;
  if (line != header) fail(ErrorKind::Format, path.string() + ": unexpected header");
  std::vector<double> values;
  long rows = 0;
  while (lines.next(line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 6) fail(ErrorKind::Format, path.string() + ":" + std::to_string(lines.number()) + ": wrong column count");
    if (parse_int(cells[0], path, lines.number()) != rows) fail(ErrorKind::Format, path.string() + ": frames out of order");
    for (std::size_t c = 1; c < 6; ++c) values.push_back(parse_double(cells[c], path, lines.number()));
    ++rows;
  }
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows, 5);
}

void write_segments(const fs::path& path, const synth::SegmentBounds& b, double frame_rate) {
  json j;
  j["frame_rate"] = frame_rate;
  j["frames"] = b.frames;
  j["interview"] = {0, b.interview_end};
  j["mimic"] = {b.interview_end, b.mimic_end};
  j["story"] = {b.mimic_end, b.frames};
  write_text(path, j.dump(2) + "\n");
}

synth::SegmentBounds read_segments(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  synth::SegmentBounds b;
  b.frames = field<Eigen::Index>(j, "frames", path);
  const auto interview = field<std::vector<Eigen::Index>>(j, "interview", path);
  const auto mimic = field<std::vector<Eigen::Index>>(j, "mimic", path);
  const auto story = field<std::vector<Eigen::Index>>(j, "story", path);
  if (interview.size() != 2 || mimic.size() != 2 || story.size() != 2 || interview[0] != 0 ||
      interview[1] != mimic[0] || mimic[1] != story[0] || story[1] != b.frames || mimic[0] > mimic[1]) {
    fail(ErrorKind::Format, path.string() + ": segments must tile the recording");
  }
  b.interview_end = interview[1];
  b.mimic_end = mimic[1];
  return b;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  json j;
  j["frame_rate"] = m.frame_rate;
  j["duration_s"] = m.duration_s;
  j["seed"] = m.seed;
  j["categories"] = std::vector<std::string>(causal::category_names().begin(), causal::category_names().end());
  json recs = json::array();
  for (const auto& e : m.recordings) {
    json r;
    r["subject"] = e.subject;
    r["session"] = e.session;
    r["type"] = std::string(causal::to_string(e.type));
    r["hamd_in"] = e.hamd_in;
    r["hamd_out"] = e.hamd_out;
    r["treatment"] = std::vector<double>(e.treatment.data(), e.treatment.data() + e.treatment.size());
    r["clinical_category"] = e.clinical_category;
    r["best_category"] = e.best_category;
    r["reaction_time_ms"] = e.reaction_time_ms;
    r["landmarks"] = e.landmarks;
    r["aux"] = e.aux;
    r["segments"] = e.segments;
    recs.push_back(std::move(r));
  }
  j["recordings"] = std::move(recs);
  write_text(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  Manifest m;
  m.frame_rate = field<double>(j, "frame_rate", path);
  m.duration_s = field<double>(j, "duration_s", path);
  m.seed = field<std::uint64_t>(j, "seed", path);
  if (!(m.frame_rate > 0.0)) fail(ErrorKind::Format, path.string() + ": frame_rate must be positive");
  if (!j.contains("recordings") || !j["recordings"].is_array()) {
    fail(ErrorKind::Format, path.string() + ": 'recordings' must be an array");
  }
  for (const auto& r : j["recordings"]) {
    ManifestEntry e;
    e.subject = field<std::string>(r, "subject", path);
    e.session = field<std::string>(r, "session", path);
    try {
      e.type = causal::parse_patient_type(field<std::string>(r, "type", path));
    } catch (const Error& err) {
      fail(ErrorKind::Format, path.string() + ": " + err.what());
    }
    e.hamd_in = field<int>(r, "hamd_in", path);
    e.hamd_out = field<int>(r, "hamd_out", path);
    const auto w = field<std::vector<double>>(r, "treatment", path);
    if (w.size() != causal::kCategories) fail(ErrorKind::Format, path.string() + ": treatment needs 11 entries");
    e.treatment = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    e.clinical_category = field<int>(r, "clinical_category", path);
    e.best_category = field<int>(r, "best_category", path);
    e.reaction_time_ms = field<double>(r, "reaction_time_ms", path);
    e.landmarks = field<std::string>(r, "landmarks", path);
    e.aux = field<std::string>(r, "aux", path);
    e.segments = field<std::string>(r, "segments", path);
    m.recordings.push_back(std::move(e));
  }
  return m;
}

const Matrix& BinaryFile::block(std::string_view name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b.data;
  }
  fail(ErrorKind::Format, "artifact has no block '" + std::string(name) + "'");
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_binary(const fs::path& path, std::string_view magic, json header, const std::vector<Block>& blocks) {
  if (magic.size() != 8) fail(ErrorKind::InvalidArgument, "magic must be 8 bytes");
  json layout = json::array();
  std::size_t values = 0;
  for (const auto& b : blocks) {
    layout.push_back({{"name", b.name}, {"rows", b.data.rows()}, {"cols", b.data.cols()}});
    values += static_cast<std::size_t>(b.data.size());
  }
  header["blocks"] = std::move(layout);
  std::string out = header.dump();
  out += '\n';
  out += magic;
  const std::size_t offset = out.size();
  out.resize(offset + values * sizeof(double));
  char* cursor = out.data() + offset;
  for (const auto& b : blocks) {
    const RowMatrix row_major = b.data;
    const std::size_t bytes = static_cast<std::size_t>(row_major.size()) * sizeof(double);
    if (bytes) std::memcpy(cursor, row_major.data(), bytes);
    cursor += bytes;
  }
  write_text(path, out);
}

BinaryFile read_binary(const fs::path& path, std::string_view magic) {
  const std::string text = read_text(path);
  const auto newline = text.find('\n');
  if (newline == std::string::npos) fail(ErrorKind::Format, path.string() + ": missing header line");
  BinaryFile file;
  try {
    file.header = json::parse(std::string_view(text).substr(0, newline));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, path.string() + ": bad header: " + e.what());
  }
  if (text.compare(newline + 1, magic.size(), magic) != 0) {
    fail(ErrorKind::Format, path.string() + ": expected magic " + std::string(magic));
  }
  std::size_t cursor = newline + 1 + magic.size();
  if (!file.header.contains("blocks") || !file.header["blocks"].is_array()) {
    fail(ErrorKind::Format, path.string() + ": header lacks a block layout");
  }
  for (const auto& entry : file.header["blocks"]) {
    Block b;
    b.name = field<std::string>(entry, "name", path);
    const auto rows = field<Eigen::Index>(entry, "rows", path);
    const auto cols = field<Eigen::Index>(entry, "cols", path);
    if (rows < 0 || cols < 0) fail(ErrorKind::Format, path.string() + ": negative block size");
    const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (cursor + bytes > text.size()) fail(ErrorKind::Format, path.string() + ": truncated payload");
    RowMatrix row_major(rows, cols);
    if (bytes) std::memcpy(row_major.data(), text.data() + cursor, bytes);
    b.data = row_major;
    cursor += bytes;
    file.blocks.push_back(std::move(b));
  }
  if (cursor != text.size()) fail(ErrorKind::Format, path.string() + ": trailing bytes after payload");
  return file;
}

std::vector<fs::path> list_files(const fs::path& dir, std::string_view extension) {
  if (!fs::is_directory(dir)) fail(ErrorKind::MissingArtifact, "missing directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oeg::io
