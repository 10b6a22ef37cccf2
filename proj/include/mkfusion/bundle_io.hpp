#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mkfusion/files.hpp"
#include "mkfusion/taxonomy.hpp"

namespace mkfusion {

// JSON document: {"dims", "classes", "samples", "splits"}. Reals are written
// in shortest round-trip form, so load(save(b)) == b exactly.
std::string bundle_to_json(const DatasetBundle& bundle);
DatasetBundle bundle_from_json(const std::string& text);

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& path);
DatasetBundle load_bundle(const std::filesystem::path& path);

}  // namespace mkfusion
