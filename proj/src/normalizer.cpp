#include "stainforge/normalizer.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "stainforge/csv.hpp"
#include "stainforge/error.hpp"
#include "stainforge/parallel.hpp"
#include "stainforge/png_io.hpp"

namespace stainforge {

namespace {

BackgroundIntensity background_for(const RgbImage& img, BackgroundMode mode) {
  return mode == BackgroundMode::Estimate ? estimate_background(img) : BackgroundIntensity{};
}

acd::FitResult fit_image(const OdImage& od, const NormalizeOptions& opts) {
  const TissueMask mask = tissue_mask(od, opts.hyperparams.tissue_threshold);
  return acd::fit(od, mask, opts.hyperparams, opts.init);
}

double millis_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string content_hash(const RgbImage& img) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (std::uint64_t dim : {static_cast<std::uint64_t>(img.width()), static_cast<std::uint64_t>(img.height())}) {
    for (int i = 0; i < 8; ++i) mix(static_cast<std::uint8_t>(dim >> (8 * i)));
  }
  for (std::uint8_t b : img.data()) mix(b);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TemplateProfile extract_template_profile(const RgbImage& img, const NormalizeOptions& opts,
                                         const std::string& source_path) {
  TemplateProfile t;
  t.background = background_for(img, opts.background);
  t.hyperparams = opts.hyperparams;
  t.profile = fit_image(rgb_to_od(img, t.background), opts).profile;
  t.source_path = source_path;
  t.source_hash = content_hash(img);
  return t;
}

RgbImage recombine(const OdImage& src_od, const acd::StainProfile& src_profile,
                   const TemplateProfile& tmpl) {
  const acd::Mat3 separate = src_profile.separation_matrix();
  // Inverse of the template's own separation, so a template normalized
  // against itself maps back onto its input.
  const acd::Mat3 rebuild = tmpl.profile.reconstruction_matrix();
  OdImage out(src_od.width(), src_od.height());
  auto in = src_od.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src_od.pixel_count(); ++i) {
    acd::Vec3 s = separate * acd::Vec3(in[3 * i], in[3 * i + 1], in[3 * i + 2]);
    s = s.cwiseMax(0.0);
    const acd::Vec3 od = (rebuild * s).cwiseMax(0.0);
    dst[3 * i] = od(0);
    dst[3 * i + 1] = od(1);
    dst[3 * i + 2] = od(2);
  }
  return od_to_rgb(out, tmpl.background);
}

RgbImage normalize_image(const RgbImage& src, const TemplateProfile& tmpl, const NormalizeOptions& opts) {
  const OdImage od = rgb_to_od(src, background_for(src, opts.background));
  const acd::FitResult fitted = fit_image(od, opts);
  return recombine(od, fitted.profile, tmpl);
}

std::size_t BatchReport::failures() const {
  std::size_t n = 0;
  for (const auto& item : items) n += item.ok ? 0 : 1;
  return n;
}

double BatchReport::mean_millis() const {
  if (items.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& item : items) sum += item.millis;
  return sum / static_cast<double>(items.size());
}

std::vector<BatchJob> jobs_for(const std::vector<std::filesystem::path>& inputs,
                               const std::filesystem::path& out_dir) {
  std::vector<BatchJob> jobs;
  jobs.reserve(inputs.size());
  for (const auto& in : inputs) jobs.push_back({in, out_dir / in.filename()});
  return jobs;
}

BatchReport normalize_batch(const std::vector<BatchJob>& jobs, const TemplateProfile& tmpl,
                            const NormalizeOptions& opts, std::size_t workers) {
  BatchReport report;
  report.items.resize(jobs.size());
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    BatchItem& item = report.items[i];
    item.input = jobs[i].input;
    item.output = jobs[i].output;
    const auto start = std::chrono::steady_clock::now();
    try {
      const RgbImage src = read_png(jobs[i].input);
      const RgbImage out = normalize_image(src, tmpl, opts);
      if (jobs[i].output.has_parent_path()) {
        std::filesystem::create_directories(jobs[i].output.parent_path());
      }
      write_png(jobs[i].output, out);
      item.ok = true;
    } catch (const Error& e) {
      item.error = std::string(to_string(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
      item.error = e.what();
    }
    item.millis = millis_since(start);
  });
  report.total_millis = millis_since(t0);
  return report;
}

void write_batch_report(const std::filesystem::path& path, const BatchReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  csv::write_row(out, {"input_path", "status", "millis", "error_message"});
  for (const auto& item : report.items) {
    char millis[32];
    std::snprintf(millis, sizeof(millis), "%.3f", item.millis);
    csv::write_row(out, {item.input.string(), item.ok ? "ok" : "failed", millis, item.error});
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace stainforge
