#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "stainforge/normalizer.hpp"

namespace stainforge {

inline constexpr int kProfileSchemaVersion = 1;

// Versioned key=value text: schema_version, the nine SCA entries row-major,
// wh, we, background levels, the hyperparameters of the fit and provenance.
// Reals use 17 significant digits so a reload is bit-exact.
std::string serialize_profile(const TemplateProfile& t);
TemplateProfile parse_profile(std::istream& in);

void save_profile(const std::filesystem::path& path, const TemplateProfile& t);
TemplateProfile load_profile(const std::filesystem::path& path);

}  // namespace stainforge
