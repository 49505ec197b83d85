#include "stainforge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>

#include "stainforge/color_model.hpp"
#include "stainforge/config.hpp"
#include "stainforge/dataset.hpp"
#include "stainforge/error.hpp"
#include "stainforge/metrics.hpp"
#include "stainforge/normalizer.hpp"
#include "stainforge/parallel.hpp"
#include "stainforge/png_io.hpp"
#include "stainforge/profile_io.hpp"
#include "stainforge/text.hpp"

namespace stainforge {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kFitKeys{"lambda_p",    "lambda_b",    "lambda_e",        "eta",
                                        "gamma",       "learning_rate", "max_iters",     "tol",
                                        "sample_n",    "tissue_threshold", "weight_init", "fit_threads",
                                        "init_h",      "init_e",      "init_wh",         "init_we",
                                        "background",  "seed"};
const std::vector<std::string> kAugmentKeys{"shear_range",        "zoom_range", "rotation_range",
                                            "horizontal_flip",    "width_shift_range",
                                            "height_shift_range", "fill_mode",  "seed", "count", "workers"};

std::string flag_for(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

// Collects string-valued flags for a subcommand; merged over the config file
// through the same setter so every source is validated identically.
struct FlagSet {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::string config_path;

  void add(CLI::App* app, const std::string& key, const std::string& help = {}) {
    options.emplace_back(key, app->add_option(flag_for(key), values[key], help));
  }
  void add_all(CLI::App* app, const std::vector<std::string>& keys) {
    for (const auto& k : keys) add(app, k);
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) apply_setting(cfg, key, values.at(key), "flag " + flag_for(key));
    }
    validate(cfg);
    return cfg;
  }
};

fs::path need_path(const RunConfig& cfg, const std::string& key) {
  auto it = cfg.paths.find(key);
  if (it == cfg.paths.end() || it->second.empty()) {
    throw Error(ErrorCode::InvalidArgument, flag_for(key) + " is required");
  }
  return it->second;
}

std::optional<fs::path> opt_path(const RunConfig& cfg, const std::string& key) {
  auto it = cfg.paths.find(key);
  if (it == cfg.paths.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

std::vector<fs::path> png_files_in(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

// Outputs must not overwrite inputs or each other.
void check_jobs(const std::vector<BatchJob>& jobs) {
  std::set<fs::path> outputs;
  for (const auto& j : jobs) {
    if (!outputs.insert(j.output.lexically_normal()).second) {
      throw Error(ErrorCode::InvalidArgument, "two inputs map to the same output " + j.output.string());
    }
    std::error_code ec;
    if (fs::exists(j.output, ec) && fs::equivalent(j.input, j.output, ec)) {
      throw Error(ErrorCode::InvalidArgument, "output would overwrite input " + j.input.string());
    }
  }
}

int cmd_fit_template(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path image = need_path(cfg, "image");
  const fs::path profile_path = need_path(cfg, "out_profile");
  const RgbImage img = read_png(image);
  err << "fitting " << image.string() << " (" << img.width() << "x" << img.height() << ")\n";
  const TemplateProfile t = extract_template_profile(img, cfg.normalize_options(), image.string());
  ensure_parent(profile_path);
  save_profile(profile_path, t);
  if (auto dump = opt_path(cfg, "dump_od")) {
    ensure_parent(*dump);
    write_od_dump(*dump, rgb_to_od(img, t.background));
  }
  out << "profile " << profile_path.string() << "\n"
      << "wh " << text::format_real(t.profile.wh) << "\n"
      << "we " << text::format_real(t.profile.we) << "\n";
  return 0;
}

int cmd_normalize(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto manifest = opt_path(cfg, "manifest");
  const auto input_dir = opt_path(cfg, "input_dir");
  if (manifest.has_value() == input_dir.has_value()) {
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --manifest or --input-dir");
  }
  const TemplateProfile tmpl = load_profile(need_path(cfg, "template"));
  const fs::path out_dir = need_path(cfg, "out_dir");

  std::vector<fs::path> inputs;
  if (manifest) {
    for (const auto& row : read_manifest(*manifest)) inputs.push_back(row.record.path);
  } else {
    inputs = png_files_in(*input_dir);
  }
  const auto jobs = jobs_for(inputs, out_dir);
  check_jobs(jobs);
  ensure_dir(out_dir);

  const std::size_t workers = effective_workers(cfg.workers);
  err << "normalizing " << jobs.size() << " images with " << workers << " workers\n";
  const BatchReport report = normalize_batch(jobs, tmpl, cfg.normalize_options(), workers);
  for (std::size_t i = 0; i < report.items.size(); ++i) {
    const auto& item = report.items[i];
    char ms[32];
    std::snprintf(ms, sizeof(ms), "%.1f", item.millis);
    err << "[" << (i + 1) << "/" << report.items.size() << "] " << item.input.string() << " "
        << (item.ok ? "ok" : "failed") << " " << ms << " ms" << (item.ok ? "" : " " + item.error) << "\n";
  }
  const fs::path report_path = opt_path(cfg, "report").value_or(out_dir / "batch_report.csv");
  ensure_parent(report_path);
  write_batch_report(report_path, report);

  char line[160];
  std::snprintf(line, sizeof(line), "images %zu failures %zu total_ms %.3f mean_ms %.3f\n", report.items.size(),
                report.failures(), report.total_millis, report.mean_millis());
  out << line << "report " << report_path.string() << "\n";
  return report.failures() == 0 ? 0 : kExitBatchFailures;
}

int cmd_augment(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path input = need_path(cfg, "input");
  const fs::path out_dir = need_path(cfg, "out_dir");
  if (cfg.count == 0) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
  const RgbImage img = read_png(input);

  // Parameters are drawn serially so the stream is the same for any worker count.
  SplitMix64 rng(cfg.augment.seed);
  std::vector<AugmentParams> params(cfg.count);
  for (auto& p : params) p = sample_params(cfg.augment, rng, img.width(), img.height());

  ensure_dir(out_dir);
  std::vector<fs::path> outputs(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "_aug_%04zu.png", i);
    outputs[i] = out_dir / (input.stem().string() + suffix);
  }
  std::vector<std::string> errors(cfg.count);
  const std::size_t workers = effective_workers(cfg.workers);
  err << "augmenting " << input.string() << " x" << cfg.count << "\n";
  parallel_for(cfg.count, workers, [&](std::size_t i) {
    try {
      write_png(outputs[i], apply_transform(img, make_transform(params[i], img.width(), img.height())));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::size_t failures = 0;
  for (std::size_t i = 0; i < cfg.count; ++i) {
    if (!errors[i].empty()) {
      ++failures;
      err << outputs[i].string() << ": " << errors[i] << "\n";
    } else {
      out << outputs[i].string() << "\n";
    }
  }
  return failures == 0 ? 0 : kExitBatchFailures;
}

int cmd_split(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path root = need_path(cfg, "root");
  const fs::path manifest_path = need_path(cfg, "out_manifest");
  const ScanResult scanned = scan(root, cfg.magnification);
  for (const auto& s : scanned.skipped) err << "skipped " << s.path.string() << ": " << s.reason << "\n";
  const SplitManifest m = split(scanned.records, cfg.hyperparams.seed, cfg.split_unit);
  ensure_parent(manifest_path);
  write_manifest(manifest_path, m);
  out << "records " << scanned.records.size() << " skipped " << scanned.skipped.size() << "\n"
      << "train " << m.train.size() << " validation " << m.validation.size() << " test " << m.test.size() << "\n"
      << "manifest " << manifest_path.string() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const EvalReport report = evaluate_file(need_path(cfg, "predictions"), cfg.threshold);
  const std::string table = format_table(report);
  out << table;
  if (auto path = opt_path(cfg, "out_report")) {
    ensure_parent(*path);
    write_report(*path, report);
    auto txt = *path;
    txt.replace_extension(".txt");
    std::ofstream f(txt, std::ios::binary);
    if (!(f << table)) throw Error(ErrorCode::IoError, "write failed for " + txt.string());
  }
  return 0;
}

int cmd_check_gradient(const RunConfig& cfg, std::size_t points, std::ostream& out, std::ostream& err,
                       const CliHooks& hooks) {
  GradientCheckOptions opts;
  opts.seed = cfg.hyperparams.seed;
  opts.points = points;
  opts.hyperparams = cfg.hyperparams;
  const GradientCheckResult r = check_gradient(opts, hooks.gradient);
  out << "points " << r.points << " failures " << r.failures << " max_rel_error "
      << text::format_real(r.max_rel_error) << " max_abs_error " << text::format_real(r.max_abs_error) << "\n";
  if (!r.passed()) {
    err << "error: GradientCheckFailed: worst point " << r.worst_point << " coordinate " << r.worst_coord << "\n";
    return exit_code(ErrorCode::GradientCheckFailed);
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliHooks& hooks) {
  CLI::App app{"stainforge: H&E stain normalization and preprocessing"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    FlagSet flags;
  };
  std::map<std::string, Sub> subs;
  auto make = [&](const std::string& name, const std::string& help) -> Sub& {
    Sub& s = subs[name];
    s.app = app.add_subcommand(name, help);
    s.app->add_option("--config", s.flags.config_path, "key=value file; flags override it");
    return s;
  };

  Sub& fit = make("fit-template", "fit a stain profile on a template image");
  fit.flags.add(fit.app, "image", "template PNG");
  fit.flags.add(fit.app, "out_profile", "profile file to write");
  fit.flags.add(fit.app, "dump_od", "optional optical density dump");
  fit.flags.add_all(fit.app, kFitKeys);

  Sub& norm = make("normalize", "normalize images to a template profile");
  norm.flags.add(norm.app, "manifest", "manifest CSV listing inputs");
  norm.flags.add(norm.app, "input_dir", "directory of PNG inputs");
  norm.flags.add(norm.app, "template", "profile from fit-template");
  norm.flags.add(norm.app, "out_dir", "output directory");
  norm.flags.add(norm.app, "report", "batch report CSV (default <out-dir>/batch_report.csv)");
  norm.flags.add(norm.app, "workers");
  norm.flags.add_all(norm.app, kFitKeys);

  Sub& aug = make("augment", "write randomly augmented copies of an image");
  aug.flags.add(aug.app, "input", "source PNG");
  aug.flags.add(aug.app, "out_dir", "output directory");
  aug.flags.add_all(aug.app, kAugmentKeys);

  Sub& spl = make("split", "scan a BreakHis tree and write a train/validation/test manifest");
  spl.flags.add(spl.app, "root", "dataset root");
  spl.flags.add(spl.app, "out_manifest", "manifest CSV to write");
  spl.flags.add_all(spl.app, {"magnification", "seed", "split_unit"});

  Sub& ev = make("evaluate", "score classifier predictions");
  ev.flags.add(ev.app, "predictions", "CSV with path,true_label,score");
  ev.flags.add(ev.app, "out_report", "report CSV; the ROC curve and text table are written beside it");
  ev.flags.add(ev.app, "threshold");

  Sub& grad = make("check-gradient", "compare the analytic gradient with finite differences");
  std::size_t points = 100;
  grad.app->add_option("--points", points, "random parameter points")->check(CLI::PositiveNumber);
  grad.flags.add_all(grad.app, {"seed"});

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    for (auto& [name, s] : subs) {
      if (!s.app->parsed()) continue;
      const RunConfig cfg = s.flags.resolve();
      if (name == "fit-template") return cmd_fit_template(cfg, out, err);
      if (name == "normalize") return cmd_normalize(cfg, out, err);
      if (name == "augment") return cmd_augment(cfg, out, err);
      if (name == "split") return cmd_split(cfg, out, err);
      if (name == "evaluate") return cmd_evaluate(cfg, out, err);
      if (name == "check-gradient") return cmd_check_gradient(cfg, points, out, err, hooks);
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return exit_code(ErrorCode::IoError);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUnexpected;
  }
  return kExitUsage;
}

}  // namespace stainforge
