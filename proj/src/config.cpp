#include "stainforge/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "stainforge/error.hpp"
#include "stainforge/text.hpp"

namespace stainforge {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

[[noreturn]] void bad(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::ParseError, where + ": " + msg);
}

double real(const std::string& v, const std::string& where) { return text::parse_real(v, where); }

std::uint64_t uint(const std::string& v, const std::string& where) { return text::parse_uint(v, where); }

bool boolean(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(where, "expected true or false, got '" + v + "'");
}

acd::Vec3 triple(const std::string& v, const std::string& where) {
  std::vector<double> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(real(item, where));
  if (parts.size() != 3) bad(where, "expected three comma-separated numbers, got '" + v + "'");
  return {parts[0], parts[1], parts[2]};
}

const std::vector<std::string> kPathKeys{"image",       "input",       "input_dir",  "manifest", "template",
                                         "out_dir",     "out_profile", "out_manifest", "out_report", "predictions",
                                         "report",      "root",        "dump_od"};

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = [] {
    std::vector<std::pair<std::string, Setter>> t{
        {"lambda_p", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.lambda_p = real(v, w); }},
        {"lambda_b", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.lambda_b = real(v, w); }},
        {"lambda_e", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.lambda_e = real(v, w); }},
        {"eta", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.eta = real(v, w); }},
        {"gamma", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.gamma = real(v, w); }},
        {"learning_rate",
         [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.learning_rate = real(v, w); }},
        {"max_iters", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.max_iters = uint(v, w); }},
        {"tol", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.tol = real(v, w); }},
        {"sample_n", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.sample_n = uint(v, w); }},
        {"tissue_threshold",
         [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.tissue_threshold = real(v, w); }},
        {"weight_init",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           if (v == "balanced") {
             c.hyperparams.weight_init = acd::WeightInit::Balanced;
           } else if (v == "given") {
             c.hyperparams.weight_init = acd::WeightInit::Given;
           } else {
             bad(w, "weight_init must be balanced or given");
           }
         }},
        {"fit_threads", [](RunConfig& c, const std::string& v, const std::string& w) { c.hyperparams.threads = uint(v, w); }},
        {"init_h",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           const auto h = triple(v, w);
           const auto p = acd::AcdParams::from_vectors(h, acd::unit_vector(c.init.theta_e, c.init.phi_e));
           c.init.theta_h = p.theta_h;
           c.init.phi_h = p.phi_h;
         }},
        {"init_e",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           const auto e = triple(v, w);
           const auto p = acd::AcdParams::from_vectors(acd::unit_vector(c.init.theta_h, c.init.phi_h), e);
           c.init.theta_e = p.theta_e;
           c.init.phi_e = p.phi_e;
         }},
        {"init_wh",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           const double x = real(v, w);
           if (!(x > 0.0)) bad(w, "init_wh must be > 0");
           c.init.log_wh = std::log(x);
         }},
        {"init_we",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           const double x = real(v, w);
           if (!(x > 0.0)) bad(w, "init_we must be > 0");
           c.init.log_we = std::log(x);
         }},
        {"background",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           if (v == "fixed") {
             c.background = BackgroundMode::Fixed;
           } else if (v == "estimate") {
             c.background = BackgroundMode::Estimate;
           } else {
             bad(w, "background must be fixed or estimate");
           }
         }},
        {"seed",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           c.hyperparams.seed = uint(v, w);
           c.augment.seed = c.hyperparams.seed;
         }},
        {"shear_range", [](RunConfig& c, const std::string& v, const std::string& w) { c.augment.shear_range = real(v, w); }},
        {"zoom_range", [](RunConfig& c, const std::string& v, const std::string& w) { c.augment.zoom_range = real(v, w); }},
        {"rotation_range",
         [](RunConfig& c, const std::string& v, const std::string& w) { c.augment.rotation_range = real(v, w); }},
        {"horizontal_flip",
         [](RunConfig& c, const std::string& v, const std::string& w) { c.augment.horizontal_flip = boolean(v, w); }},
        {"width_shift_range",
         [](RunConfig& c, const std::string& v, const std::string& w) { c.augment.width_shift_range = real(v, w); }},
        {"height_shift_range",
         [](RunConfig& c, const std::string& v, const std::string& w) { c.augment.height_shift_range = real(v, w); }},
        {"fill_mode",
         [](RunConfig&, const std::string& v, const std::string& w) {
           if (v != "nearest") bad(w, "fill_mode supports only nearest");
         }},
        {"count", [](RunConfig& c, const std::string& v, const std::string& w) { c.count = uint(v, w); }},
        {"workers", [](RunConfig& c, const std::string& v, const std::string& w) { c.workers = uint(v, w); }},
        {"threshold", [](RunConfig& c, const std::string& v, const std::string& w) { c.threshold = real(v, w); }},
        {"magnification",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           const auto m = uint(v, w);
           if (m != 0 && m != 40 && m != 100 && m != 200 && m != 400) bad(w, "magnification must be 40, 100, 200 or 400");
           c.magnification = static_cast<int>(m);
         }},
        {"split_unit",
         [](RunConfig& c, const std::string& v, const std::string& w) {
           if (v == "image") {
             c.split_unit = SplitUnit::Image;
           } else if (v == "patient") {
             c.split_unit = SplitUnit::Patient;
           } else {
             bad(w, "split_unit must be image or patient");
           }
         }},
    };
    for (const auto& k : kPathKeys) {
      t.emplace_back(k, [k](RunConfig& c, const std::string& v, const std::string&) { c.paths[k] = v; });
    }
    return t;
  }();
  return table;
}

}  // namespace

NormalizeOptions RunConfig::normalize_options() const {
  NormalizeOptions o;
  o.hyperparams = hyperparams;
  o.background = background;
  o.init = init;
  return o;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, fn] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

bool is_path_key(const std::string& key) {
  return std::find(kPathKeys.begin(), kPathKeys.end(), key) != kPathKeys.end();
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where) {
  for (const auto& [name, fn] : setters()) {
    if (name == key) {
      fn(cfg, value, where + ": " + key);
      return;
    }
  }
  bad(where, "unknown key '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    std::optional<std::pair<std::string, std::string>> kv;
    try {
      kv = text::split_key_value(line, line_no);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    if (!kv) continue;
    if (!seen.insert(kv->first).second) bad(where, "duplicate key '" + kv->first + "'");
    apply_setting(cfg, kv->first, kv->second, where);
  }
}

void validate(const RunConfig& cfg) {
  cfg.hyperparams.validate();
  cfg.augment.validate();
  acd::build_matrix(cfg.init);
  if (cfg.workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must be in [0,1]");
  }
}

std::size_t effective_workers(std::size_t requested) {
  const char* env = std::getenv("STAINFORGE_THREADS");
  if (env == nullptr || *env == '\0') return requested;
  std::uint64_t cap = 0;
  try {
    cap = text::parse_uint(env, "STAINFORGE_THREADS");
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidArgument, e.what());
  }
  if (cap == 0) throw Error(ErrorCode::InvalidArgument, "STAINFORGE_THREADS must be >= 1");
  return std::min<std::size_t>(requested, cap);
}

}  // namespace stainforge
