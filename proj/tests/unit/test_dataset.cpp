#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "stainforge/dataset.hpp"
#include "stainforge/error.hpp"
#include "synthetic.hpp"

namespace stainforge {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

TEST(Dataset, ParsesBreakHisNames) {
  std::string why;
  const auto r = parse_breakhis_name("x/SOB_B_TA-14-3411F-200-001.png", &why);
  ASSERT_TRUE(r) << why;
  EXPECT_EQ(r->label, Label::Benign);
  EXPECT_EQ(r->magnification, 200);
  EXPECT_EQ(r->patient_id, "14-3411F");
  EXPECT_EQ(r->subtype, "tubular_adenoma");

  const auto m = parse_breakhis_name("SOB_M_DC-14-2523-400-010.png", &why);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->label, Label::Malignant);
  EXPECT_EQ(m->subtype, "ductal_carcinoma");

  for (const char* bad : {"SOB_B_TA-14-3411F-300-001.png", "SOB_B_DC-14-1-200-001.png", "SOB_X_TA-14-1-200-001.png",
                          "notes.txt", "SOB_B_TA-14-3411F-200.png"}) {
    why.clear();
    EXPECT_FALSE(parse_breakhis_name(bad, &why)) << bad;
    EXPECT_FALSE(why.empty());
  }
}

TEST(Dataset, ScanFindsLabelledImages) {
  const auto root = testing::scratch_dir("scan");
  testing::write_breakhis_tree(root, 5, 7, 200);
  std::ofstream(root / "benign" / "README.txt") << "x";
  std::ofstream(root / "benign" / "SOB_B_F-14-9-20-001.png") << "x";
  const ScanResult r = scan(root, 200);
  EXPECT_EQ(r.records.size(), 12u);
  std::size_t benign = 0;
  for (const auto& rec : r.records) benign += rec.label == Label::Benign;
  EXPECT_EQ(benign, 5u);
  EXPECT_EQ(r.skipped.size(), 2u);
  EXPECT_TRUE(std::is_sorted(r.records.begin(), r.records.end(),
                             [](const auto& a, const auto& b) { return a.path < b.path; }));
  EXPECT_EQ(code_of([&] { scan(root, 400); }), ErrorCode::EmptyDataset);
  std::filesystem::remove_all(root);
}

TEST(Dataset, FolderContradictingNameIsSkipped) {
  const auto root = testing::scratch_dir("scan_conflict");
  testing::write_breakhis_tree(root, 2, 2, 40);
  std::filesystem::create_directories(root / "benign" / "odd");
  std::ofstream(root / "benign" / "odd" / "SOB_M_DC-14-77-40-001.png") << "x";
  const ScanResult r = scan(root);
  EXPECT_EQ(r.records.size(), 4u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_NE(r.skipped[0].reason.find("folder"), std::string::npos);
  std::filesystem::remove_all(root);
}

TEST(Dataset, MissingRootIsIoError) {
  EXPECT_EQ(code_of([] { scan("/nonexistent/stainforge/root"); }), ErrorCode::IoError);
}

std::size_t benign_in(const std::vector<SampleRecord>& v) {
  return static_cast<std::size_t>(
      std::count_if(v.begin(), v.end(), [](const auto& r) { return r.label == Label::Benign; }));
}

TEST(Dataset, SplitArithmetic) {
  const auto m = split(testing::make_records(40, 60), 7);
  EXPECT_EQ(m.test.size(), 30u);
  EXPECT_EQ(benign_in(m.test), 12u);
  EXPECT_EQ(m.validation.size(), 7u);
  EXPECT_EQ(m.train.size(), 63u);
  EXPECT_EQ(m.seed, 7u);
}

TEST(Dataset, SplitIsDeterministicAndSeedDependent) {
  const auto recs = testing::make_records(40, 60);
  const auto a = split(recs, 3), b = split(recs, 3), c = split(recs, 4);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.test, c.test);
}

TEST(Dataset, SplitStratifiedAcrossSeeds) {
  const auto recs = testing::make_records(40, 60);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = split(recs, seed);
    std::set<std::filesystem::path> all;
    for (const auto* part : {&m.train, &m.validation, &m.test}) {
      const double expected = 0.4 * static_cast<double>(part->size());
      EXPECT_LE(std::abs(static_cast<double>(benign_in(*part)) - expected), 1.0) << seed;
      for (const auto& r : *part) EXPECT_TRUE(all.insert(r.path).second);
    }
    EXPECT_EQ(all.size(), 100u);
  }
}

TEST(Dataset, SplitPreconditions) {
  EXPECT_EQ(code_of([] { split(testing::make_records(20, 0), 1); }), ErrorCode::SingleClass);
  EXPECT_EQ(code_of([] { split(testing::make_records(4, 5), 1); }), ErrorCode::InvalidArgument);
}

TEST(Dataset, PatientSplitKeepsPatientsTogether) {
  const auto recs = testing::make_records(40, 60, 4);
  const auto m = split(recs, 2, SplitUnit::Patient);
  std::map<std::string, std::string> where;
  auto visit = [&](const std::vector<SampleRecord>& part, const std::string& name) {
    for (const auto& r : part) {
      auto [it, fresh] = where.emplace(r.patient_id, name);
      EXPECT_EQ(it->second, name) << r.patient_id;
    }
  };
  visit(m.train, "train");
  visit(m.validation, "validation");
  visit(m.test, "test");
  EXPECT_EQ(m.train.size() + m.validation.size() + m.test.size(), 100u);
  EXPECT_GE(m.test.size(), 30u);
}

TEST(Dataset, ManifestRoundTrip) {
  const auto dir = testing::scratch_dir("manifest");
  auto recs = testing::make_records(40, 60, 2);
  recs[0].path = "benign/with,comma.png";
  const auto m = split(recs, 11);
  write_manifest(dir / "m.csv", m);
  const auto rows = read_manifest(dir / "m.csv");
  ASSERT_EQ(rows.size(), 100u);
  std::map<std::string, std::size_t> counts;
  for (const auto& r : rows) ++counts[r.split];
  EXPECT_EQ(counts["test"], 30u);
  EXPECT_EQ(counts["validation"], 7u);
  EXPECT_EQ(counts["train"], 63u);
  EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end(),
                             [](const auto& a, const auto& b) { return a.record.path < b.record.path; }));
  const bool found = std::any_of(rows.begin(), rows.end(),
                                 [](const auto& r) { return r.record.path == "benign/with,comma.png"; });
  EXPECT_TRUE(found);

  std::ofstream(dir / "bad.csv") << "path,label\nx,benign\n";
  EXPECT_EQ(code_of([&] { read_manifest(dir / "bad.csv"); }), ErrorCode::ParseError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace stainforge
