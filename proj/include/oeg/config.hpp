#pragma once

// Flat key=value pipeline configuration. Every key has a default; a config
// file only lists overrides. Lines starting with '#' are comments.
//
//   window.length_s     10      window.overlap_s   1       var.order 3
//   reduce.geodesic     16      reduce.coeff       64
//   manifold.k          1       manifold.eps       1e-8    gap.max_frames 5
//   ubm.components      64      ubm.relevance      16      ubm.max_iters 50
//   ubm.floor_frac      1e-3    ubm.weighted_posterior true
//   gp.bias_var         1       gp.noise_var       0.1     gp.normalize true
//   gp.center           true    (regress on the offset from the prior supervector)
//   causal.features     32      causal.bins        13      causal.bin_width 4
//   causal.rank_features / causal.rank_treatment / causal.rank_severity  0 (full)
//   causal.max_active   3       seed 7                     segment full

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace oeg {

enum class Stage { features, ubm, adapt, evaluation };

class PipelineConfig {
 public:
  PipelineConfig();

  // Throws Format for unknown keys, unparsable values or malformed lines.
  static PipelineConfig load(const std::filesystem::path& path);
  void set(std::string_view key, std::string_view value);

  const std::map<std::string, std::string>& entries() const { return values_; }
  std::string str(std::string_view key) const;
  double num(std::string_view key) const;
  long integer(std::string_view key) const;
  bool flag(std::string_view key) const;

  // FNV-1a over the canonical "key=value" lines of every key that can
  // influence the given stage's output (upstream keys included). Changing,
  // say, the mixture size leaves the feature-stage hash untouched.
  std::string stage_hash(Stage stage) const;
  std::string full_hash() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace oeg
