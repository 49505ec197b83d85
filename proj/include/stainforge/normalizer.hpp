#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stainforge/acd.hpp"
#include "stainforge/color_model.hpp"
#include "stainforge/image.hpp"

namespace stainforge {

/// Fitted stain model of the reference image every source is mapped onto.
struct TemplateProfile {
  acd::StainProfile profile;
  BackgroundIntensity background;
  acd::AcdHyperparams hyperparams;
  std::string source_path;
  std::string source_hash;  // FNV-1a 64 of dimensions + pixel bytes, hex
};

enum class BackgroundMode { Fixed, Estimate };

struct NormalizeOptions {
  acd::AcdHyperparams hyperparams;
  BackgroundMode background = BackgroundMode::Fixed;
  acd::AcdParams init = acd::ruifrok_init();
};

std::string content_hash(const RgbImage& img);

TemplateProfile extract_template_profile(const RgbImage& img, const NormalizeOptions& opts,
                                         const std::string& source_path = {});

/// Fits the source image, separates its stain densities (clamped to >= 0) and
/// recombines them in the template's stain basis.
RgbImage normalize_image(const RgbImage& src, const TemplateProfile& tmpl, const NormalizeOptions& opts);

/// The recombination step alone, for a source profile that is already fitted.
RgbImage recombine(const OdImage& src_od, const acd::StainProfile& src_profile,
                   const TemplateProfile& tmpl);

struct BatchItem {
  std::filesystem::path input;
  std::filesystem::path output;
  bool ok = false;
  double millis = 0.0;
  std::string error;
};

struct BatchReport {
  std::vector<BatchItem> items;
  double total_millis = 0.0;

  std::size_t failures() const;
  double mean_millis() const;
};

struct BatchJob {
  std::filesystem::path input;
  std::filesystem::path output;
};

/// Output path for each input is out_dir / filename.
std::vector<BatchJob> jobs_for(const std::vector<std::filesystem::path>& inputs,
                               const std::filesystem::path& out_dir);

/// Normalizes every job on a bounded worker pool. Per-image failures are
/// recorded in the report, never thrown. Report order follows job order.
BatchReport normalize_batch(const std::vector<BatchJob>& jobs, const TemplateProfile& tmpl,
                            const NormalizeOptions& opts, std::size_t workers);

/// CSV: input_path,status,millis,error_message
void write_batch_report(const std::filesystem::path& path, const BatchReport& report);

}  // namespace stainforge
