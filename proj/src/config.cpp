#include "oeg/config.hpp"

#include "oeg/error.hpp"
#include "oeg/io.hpp"
#include "oeg/manifold.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

namespace oeg {
namespace {

enum class Kind { real, integer, boolean, segment };

struct KeySpec {
  const char* key;
  const char* fallback;
  Kind kind;
  Stage stage;
};

constexpr KeySpec kKeys[] = {
    {"window.length_s", "10", Kind::real, Stage::features},
    {"window.overlap_s", "1", Kind::real, Stage::features},
    {"var.order", "3", Kind::integer, Stage::features},
    {"reduce.geodesic", "16", Kind::integer, Stage::features},
    {"reduce.coeff", "64", Kind::integer, Stage::features},
    {"manifold.k", "1", Kind::real, Stage::features},
    {"manifold.eps", "1e-8", Kind::real, Stage::features},
    {"gap.max_frames", "5", Kind::integer, Stage::features},
    {"segment", "full", Kind::segment, Stage::features},
    {"ubm.components", "64", Kind::integer, Stage::ubm},
    {"ubm.max_iters", "50", Kind::integer, Stage::ubm},
    {"ubm.floor_frac", "1e-3", Kind::real, Stage::ubm},
    {"seed", "7", Kind::integer, Stage::ubm},
    {"ubm.relevance", "16", Kind::real, Stage::adapt},
    {"ubm.weighted_posterior", "true", Kind::boolean, Stage::adapt},
    {"gp.bias_var", "1", Kind::real, Stage::evaluation},
    {"gp.noise_var", "0.1", Kind::real, Stage::evaluation},
    {"gp.normalize", "true", Kind::boolean, Stage::evaluation},
    {"gp.center", "true", Kind::boolean, Stage::evaluation},
    {"causal.features", "32", Kind::integer, Stage::evaluation},
    {"causal.bins", "13", Kind::integer, Stage::evaluation},
    {"causal.bin_width", "4", Kind::real, Stage::evaluation},
    {"causal.rank_features", "0", Kind::integer, Stage::evaluation},
    {"causal.rank_treatment", "0", Kind::integer, Stage::evaluation},
    {"causal.rank_severity", "0", Kind::integer, Stage::evaluation},
    {"causal.max_active", "3", Kind::integer, Stage::evaluation},
};

const KeySpec* find_key(std::string_view key) {
  for (const auto& k : kKeys) {
    if (key == k.key) return &k;
  }
  return nullptr;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Canonical text so "1.0" and "1" hash alike.
std::string canonical(const KeySpec& spec, std::string_view value) {
  const std::string text(value);
  switch (spec.kind) {
    case Kind::real: {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v)) {
        fail(ErrorKind::Format, std::string("config key '") + spec.key + "' expects a number, got '" + text + "'");
      }
      return io::format_double(v);
    }
    case Kind::integer: {
      long v = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size() || v < 0) {
        fail(ErrorKind::Format,
             std::string("config key '") + spec.key + "' expects a nonnegative integer, got '" + text + "'");
      }
      return std::to_string(v);
    }
    case Kind::boolean:
      if (value == "true" || value == "1" || value == "yes") return "true";
      if (value == "false" || value == "0" || value == "no") return "false";
      fail(ErrorKind::Format, std::string("config key '") + spec.key + "' expects true/false, got '" + text + "'");
    case Kind::segment:
      try {
        return std::string(manifold::to_string(manifold::parse_segment(value)));
      } catch (const Error&) {
        fail(ErrorKind::Format, "segment must be full, interview, mimic or story, got '" + text + "'");
      }
  }
  return text;
}

std::string fnv_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

PipelineConfig::PipelineConfig() {
  for (const auto& k : kKeys) values_[k.key] = canonical(k, k.fallback);
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  const KeySpec* spec = find_key(key);
  if (!spec) fail(ErrorKind::Format, "unknown config key '" + std::string(key) + "'");
  values_[spec->key] = canonical(*spec, trim(value));
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  PipelineConfig cfg;
  const std::string text = io::read_text(path);
  std::size_t pos = 0, number = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line(text.data() + pos, (end == std::string::npos ? text.size() : end) - pos);
    pos = end == std::string::npos ? text.size() : end + 1;
    ++number;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string PipelineConfig::str(std::string_view key) const {
  const auto it = values_.find(std::string(key));
  if (it == values_.end()) fail(ErrorKind::InvalidArgument, "no config key '" + std::string(key) + "'");
  return it->second;
}

double PipelineConfig::num(std::string_view key) const {
  const std::string v = str(key);
  double out = 0.0;
  std::from_chars(v.data(), v.data() + v.size(), out);
  return out;
}

long PipelineConfig::integer(std::string_view key) const {
  const std::string v = str(key);
  long out = 0;
  std::from_chars(v.data(), v.data() + v.size(), out);
  return out;
}

bool PipelineConfig::flag(std::string_view key) const { return str(key) == "true"; }

std::string PipelineConfig::stage_hash(Stage stage) const {
  std::string text;
  for (const auto& k : kKeys) {
    if (static_cast<int>(k.stage) <= static_cast<int>(stage)) {
      text += k.key;
      text += '=';
      text += values_.at(k.key);
      text += '\n';
    }
  }
  return fnv_hex(text);
}

std::string PipelineConfig::full_hash() const { return stage_hash(Stage::evaluation); }

}  // namespace oeg
