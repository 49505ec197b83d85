#include "stainforge/profile_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "stainforge/error.hpp"
#include "stainforge/text.hpp"

namespace stainforge {

namespace {

const char* const kChannel[3] = {"r", "g", "b"};

std::string weight_init_name(acd::WeightInit w) {
  return w == acd::WeightInit::Balanced ? "balanced" : "given";
}

}  // namespace

std::string serialize_profile(const TemplateProfile& t) {
  using text::format_real;
  std::ostringstream out;
  out << "# stainforge stain profile\n";
  out << "schema_version=" << kProfileSchemaVersion << "\n";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out << "sca_" << r << c << "=" << format_real(t.profile.sca(r, c)) << "\n";
    }
  }
  out << "wh=" << format_real(t.profile.wh) << "\n";
  out << "we=" << format_real(t.profile.we) << "\n";
  for (int c = 0; c < 3; ++c) {
    out << "background_" << kChannel[c] << "=" << format_real(t.background.level[c]) << "\n";
  }
  const auto& hp = t.hyperparams;
  out << "lambda_p=" << format_real(hp.lambda_p) << "\n";
  out << "lambda_b=" << format_real(hp.lambda_b) << "\n";
  out << "lambda_e=" << format_real(hp.lambda_e) << "\n";
  out << "eta=" << format_real(hp.eta) << "\n";
  out << "gamma=" << format_real(hp.gamma) << "\n";
  out << "learning_rate=" << format_real(hp.learning_rate) << "\n";
  out << "max_iters=" << hp.max_iters << "\n";
  out << "tol=" << format_real(hp.tol) << "\n";
  out << "sample_n=" << hp.sample_n << "\n";
  out << "seed=" << hp.seed << "\n";
  out << "weight_init=" << weight_init_name(hp.weight_init) << "\n";
  out << "tissue_threshold=" << format_real(hp.tissue_threshold) << "\n";
  out << "source_path=" << t.source_path << "\n";
  out << "source_hash=" << t.source_hash << "\n";
  return out.str();
}

TemplateProfile parse_profile(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto entry = text::split_key_value(line, line_no);
    if (!entry) continue;
    if (!kv.emplace(entry->first, entry->second).second) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": duplicate key '" +
                                             entry->first + "'");
    }
  }

  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::ParseError, "profile is missing key '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto real = [&](const std::string& key) { return text::parse_real(take(key), key); };
  auto uint = [&](const std::string& key) { return text::parse_uint(take(key), key); };

  const auto version = uint("schema_version");
  if (version != kProfileSchemaVersion) {
    throw Error(ErrorCode::ParseError, "unsupported profile schema_version " + std::to_string(version));
  }
  TemplateProfile t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      t.profile.sca(r, c) = real("sca_" + std::to_string(r) + std::to_string(c));
    }
  }
  t.profile.wh = real("wh");
  t.profile.we = real("we");
  std::array<double, 3> bg{};
  for (int c = 0; c < 3; ++c) bg[c] = real(std::string("background_") + kChannel[c]);

  auto& hp = t.hyperparams;
  hp.lambda_p = real("lambda_p");
  hp.lambda_b = real("lambda_b");
  hp.lambda_e = real("lambda_e");
  hp.eta = real("eta");
  hp.gamma = real("gamma");
  hp.learning_rate = real("learning_rate");
  hp.max_iters = uint("max_iters");
  hp.tol = real("tol");
  hp.sample_n = uint("sample_n");
  hp.seed = uint("seed");
  const std::string wi = take("weight_init");
  if (wi == "balanced") {
    hp.weight_init = acd::WeightInit::Balanced;
  } else if (wi == "given") {
    hp.weight_init = acd::WeightInit::Given;
  } else {
    throw Error(ErrorCode::ParseError, "weight_init must be 'balanced' or 'given', got '" + wi + "'");
  }
  hp.tissue_threshold = real("tissue_threshold");
  t.source_path = take("source_path");
  t.source_hash = take("source_hash");

  if (!kv.empty()) throw Error(ErrorCode::ParseError, "unknown profile key '" + kv.begin()->first + "'");

  try {
    t.background = BackgroundIntensity(bg);
    t.profile.validate();
    hp.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid profile: ") + e.what());
  }
  return t;
}

void save_profile(const std::filesystem::path& path, const TemplateProfile& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << serialize_profile(t);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

TemplateProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open profile " + path.string());
  return parse_profile(in);
}

}  // namespace stainforge
