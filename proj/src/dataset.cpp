#include "stainforge/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>

#include "stainforge/csv.hpp"
#include "stainforge/error.hpp"
#include "stainforge/rng.hpp"
#include "stainforge/text.hpp"

namespace stainforge {

namespace {

struct SubtypeInfo {
  const char* code;
  const char* name;
  Label label;
};

constexpr std::array<SubtypeInfo, 8> kSubtypes{{
    {"A", "adenosis", Label::Benign},
    {"F", "fibroadenoma", Label::Benign},
    {"PT", "phyllodes_tumor", Label::Benign},
    {"TA", "tubular_adenoma", Label::Benign},
    {"DC", "ductal_carcinoma", Label::Malignant},
    {"LC", "lobular_carcinoma", Label::Malignant},
    {"MC", "mucinous_carcinoma", Label::Malignant},
    {"PC", "papillary_carcinoma", Label::Malignant},
}};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool valid_magnification(int m) { return m == 40 || m == 100 || m == 200 || m == 400; }

// Class folder named in the path below root, if any.
std::optional<Label> folder_label(const std::filesystem::path& rel) {
  std::optional<Label> found;
  for (const auto& part : rel.parent_path()) {
    if (auto l = parse_label(lower(part.string()))) found = l;
  }
  return found;
}

// Allocates `total` across groups proportionally to `sizes` by largest
// remainder; ties go to the earlier group.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& sizes) {
  std::size_t sum = 0;
  for (auto s : sizes) sum += s;
  std::vector<std::size_t> out(sizes.size(), 0);
  if (sum == 0) return out;
  std::vector<std::pair<std::size_t, std::size_t>> rem;  // (remainder, index)
  std::size_t given = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    out[i] = total * sizes[i] / sum;
    given += out[i];
    rem.emplace_back(total * sizes[i] % sum, i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; given < total; ++k, ++given) ++out[rem[k].second];
  return out;
}

std::size_t test_quota(std::size_t n) { return (3 * n + 5) / 10; }  // round(0.3 n), halves up

}  // namespace

std::string to_string(Label label) { return label == Label::Benign ? "benign" : "malignant"; }

std::optional<Label> parse_label(std::string_view s) {
  if (s == "benign") return Label::Benign;
  if (s == "malignant") return Label::Malignant;
  return std::nullopt;
}

std::optional<SampleRecord> parse_breakhis_name(const std::filesystem::path& path, std::string* reason) {
  static const std::regex pattern(R"(^SOB_([BM])_([A-Z]+)-(\d+)-([A-Za-z0-9]+)-(\d+)-(\d+)$)");
  auto fail = [&](std::string why) -> std::optional<SampleRecord> {
    if (reason) *reason = std::move(why);
    return std::nullopt;
  };
  if (lower(path.extension().string()) != ".png") return fail("not a .png file");
  const std::string stem = path.stem().string();
  std::smatch m;
  if (!std::regex_match(stem, m, pattern)) return fail("name does not match SOB_<B|M>_<type>-<yy>-<id>-<mag>-<seq>");

  SampleRecord r;
  r.path = path;
  r.label = m[1] == "B" ? Label::Benign : Label::Malignant;
  const std::string code = m[2];
  const auto* info = std::find_if(kSubtypes.begin(), kSubtypes.end(),
                                  [&](const SubtypeInfo& s) { return code == s.code; });
  if (info == kSubtypes.end()) return fail("unknown subtype code '" + code + "'");
  if (info->label != r.label) return fail("subtype '" + code + "' contradicts class letter");
  r.subtype = info->name;
  r.patient_id = std::string(m[3]) + "-" + std::string(m[4]);
  r.magnification = static_cast<int>(text::parse_uint(m[5].str(), "magnification"));
  if (!valid_magnification(r.magnification)) return fail("magnification " + m[5].str() + " not in {40,100,200,400}");
  return r;
}

ScanResult scan(const std::filesystem::path& root, int magnification) {
  namespace fs = std::filesystem;
  if (magnification != 0 && !valid_magnification(magnification)) {
    throw Error(ErrorCode::InvalidArgument, "magnification filter must be 40, 100, 200 or 400");
  }
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::IoError, "dataset root " + root.string() + " is not a readable directory");
  }
  ScanResult result;
  for (auto it = fs::recursive_directory_iterator(root, ec); it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (ec) throw Error(ErrorCode::IoError, "cannot walk " + root.string() + ": " + ec.message());
    if (!it->is_regular_file()) continue;
    const fs::path& p = it->path();
    std::string reason;
    auto rec = parse_breakhis_name(p, &reason);
    if (!rec) {
      result.skipped.push_back({p, reason});
      continue;
    }
    if (auto folder = folder_label(fs::relative(p, root)); folder && *folder != rec->label) {
      result.skipped.push_back({p, "class folder contradicts file name"});
      continue;
    }
    if (magnification == 0 || rec->magnification == magnification) result.records.push_back(std::move(*rec));
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot walk " + root.string() + ": " + ec.message());

  std::sort(result.records.begin(), result.records.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.path < b.path; });
  std::sort(result.skipped.begin(), result.skipped.end(),
            [](const SkippedFile& a, const SkippedFile& b) { return a.path < b.path; });
  if (result.records.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no images under " + root.string() +
                                             (magnification ? " at " + std::to_string(magnification) + "x" : ""));
  }
  return result;
}

SplitManifest split(const std::vector<SampleRecord>& records, std::uint64_t seed, SplitUnit unit) {
  if (records.size() < 10) {
    throw Error(ErrorCode::InvalidArgument, "need at least 10 records to split, got " +
                                                std::to_string(records.size()));
  }
  std::array<std::vector<SampleRecord>, 2> by_class;
  for (const auto& r : records) by_class[r.label == Label::Benign ? 0 : 1].push_back(r);
  if (by_class[0].empty() || by_class[1].empty()) {
    throw Error(ErrorCode::SingleClass, "split needs both benign and malignant records");
  }

  SplitMix64 rng(seed);
  // Each class becomes a shuffled list of units (single images, or all images
  // of one patient) so both modes share the allocation below.
  std::array<std::vector<std::vector<SampleRecord>>, 2> units;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& recs = by_class[c];
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    if (unit == SplitUnit::Image) {
      for (auto& r : recs) units[c].push_back({r});
    } else {
      std::map<std::string, std::vector<SampleRecord>> groups;
      for (auto& r : recs) groups[r.patient_id].push_back(r);
      for (auto& [id, g] : groups) units[c].push_back(std::move(g));
    }
    rng.shuffle(units[c]);
  }

  std::array<std::size_t, 2> test_target{};
  std::vector<std::size_t> pool(2);
  for (std::size_t c = 0; c < 2; ++c) {
    test_target[c] = test_quota(by_class[c].size());
    pool[c] = by_class[c].size() - test_target[c];
  }
  const auto val_target = apportion((pool[0] + pool[1]) / 10, pool);

  SplitManifest m;
  m.seed = seed;
  for (std::size_t c = 0; c < 2; ++c) {
    std::size_t in_test = 0, in_val = 0;
    for (auto& u : units[c]) {
      std::vector<SampleRecord>* dest = &m.train;
      if (in_test < test_target[c]) {
        dest = &m.test;
        in_test += u.size();
      } else if (in_val < val_target[c]) {
        dest = &m.validation;
        in_val += u.size();
      }
      dest->insert(dest->end(), u.begin(), u.end());
    }
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
  std::vector<std::pair<const SampleRecord*, const char*>> rows;
  for (const auto& r : manifest.train) rows.emplace_back(&r, "train");
  for (const auto& r : manifest.validation) rows.emplace_back(&r, "validation");
  for (const auto& r : manifest.test) rows.emplace_back(&r, "test");
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first->path < b.first->path; });

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  csv::write_row(out, {"path", "label", "magnification", "patient_id", "subtype", "split"});
  for (const auto& [r, s] : rows) {
    csv::write_row(out, {r->path.string(), to_string(r->label), std::to_string(r->magnification),
                         r->patient_id, r->subtype, s});
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path.string() + ": empty manifest");
  ++line_no;
  const auto header = csv::parse_line(line, line_no);
  const std::vector<std::string> expected{"path", "label", "magnification", "patient_id", "subtype", "split"};
  if (header != expected) {
    throw Error(ErrorCode::ParseError, path.string() + ": line 1: unexpected manifest header");
  }
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = csv::parse_line(line, line_no);
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    if (f.size() != expected.size()) throw Error(ErrorCode::ParseError, where + ": expected 6 fields");
    ManifestRow row;
    row.record.path = f[0];
    auto label = parse_label(f[1]);
    if (!label) throw Error(ErrorCode::ParseError, where + ": bad label '" + f[1] + "'");
    row.record.label = *label;
    row.record.magnification = static_cast<int>(text::parse_uint(f[2], where + ": magnification"));
    row.record.patient_id = f[3];
    row.record.subtype = f[4];
    row.split = f[5];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace stainforge
