#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stainforge {

enum class Label { Benign, Malignant };

std::string to_string(Label label);
std::optional<Label> parse_label(std::string_view s);

struct SampleRecord {
  std::filesystem::path path;
  Label label = Label::Benign;
  int magnification = 0;  // 40, 100, 200 or 400
  std::string patient_id;
  std::string subtype;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct SkippedFile {
  std::filesystem::path path;
  std::string reason;
};

struct ScanResult {
  std::vector<SampleRecord> records;  // sorted by path
  std::vector<SkippedFile> skipped;
};

/// Parses a BreakHis image name such as SOB_B_TA-14-3411F-200-001.png.
/// Returns nullopt with `reason` filled when the name does not parse.
std::optional<SampleRecord> parse_breakhis_name(const std::filesystem::path& path, std::string* reason);

/// Walks a BreakHis-style tree. magnification 0 keeps every magnification.
/// Files whose names do not parse, or whose class folder contradicts the
/// name, are listed in `skipped`. Throws EmptyDataset when nothing matches.
ScanResult scan(const std::filesystem::path& root, int magnification = 0);

enum class SplitUnit { Image, Patient };

struct SplitManifest {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> validation;
  std::vector<SampleRecord> test;
  std::uint64_t seed = 0;
};

/// Stratified split: 30% of each class to test (rounded half up), then 10% of
/// the remaining pool (floored) to validation, spread across classes by
/// largest remainder. Throws SingleClass / InvalidArgument on bad input.
SplitManifest split(const std::vector<SampleRecord>& records, std::uint64_t seed,
                    SplitUnit unit = SplitUnit::Image);

/// CSV columns path,label,magnification,patient_id,subtype,split; rows sorted by path.
void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest);

struct ManifestRow {
  SampleRecord record;
  std::string split;
};
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace stainforge
