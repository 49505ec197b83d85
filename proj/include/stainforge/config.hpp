#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stainforge/acd.hpp"
#include "stainforge/augment.hpp"
#include "stainforge/dataset.hpp"
#include "stainforge/normalizer.hpp"

namespace stainforge {

/// Everything a CLI run can tune. Values come from built-in defaults, then a
/// flat key=value file, then command-line flags, later sources winning.
struct RunConfig {
  acd::AcdHyperparams hyperparams;
  acd::AcdParams init = acd::ruifrok_init();
  AugmentConfig augment;
  BackgroundMode background = BackgroundMode::Fixed;
  std::size_t workers = 1;
  double threshold = 0.5;
  int magnification = 0;
  SplitUnit split_unit = SplitUnit::Image;
  std::size_t count = 1;
  std::map<std::string, std::filesystem::path> paths;

  NormalizeOptions normalize_options() const;
};

/// Recognised keys, in documentation order.
const std::vector<std::string>& config_keys();
bool is_path_key(const std::string& key);

/// Applies one setting. Throws ParseError for unknown keys or bad values;
/// `where` prefixes the message.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where);

/// Reads key=value lines ('#' comments allowed) onto cfg. Duplicate keys are errors.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Cross-field checks after all sources are merged.
void validate(const RunConfig& cfg);

/// `requested` capped by STAINFORGE_THREADS when that is set.
std::size_t effective_workers(std::size_t requested);

}  // namespace stainforge
