#include "mkfusion/bundle_io.hpp"

#include "json_fields.hpp"

namespace mkfusion {

using detail::field;
using detail::get_as;
using detail::Json;
using detail::real_array;

std::string bundle_to_json(const DatasetBundle& bundle) {
  Json doc;
  doc["dims"] = {{"visual", bundle.dims.visual}, {"semantic", bundle.dims.semantic}};
  Json classes = Json::array();
  for (const auto& c : bundle.classes) {
    classes.push_back({{"species_id", c.species_id},
                       {"genus_id", c.genus_id},
                       {"family_id", c.family_id},
                       {"name", c.name},
                       {"semantic", c.semantic}});
  }
  doc["classes"] = std::move(classes);
  Json samples = Json::array();
  for (const auto& s : bundle.samples) {
    samples.push_back({{"species_id", s.species_id}, {"visual", s.visual}});
  }
  doc["samples"] = std::move(samples);
  doc["splits"] = {{"seen", bundle.seen}, {"unseen", bundle.unseen}};
  return doc.dump() + "\n";
}

DatasetBundle bundle_from_json(const std::string& text) {
  const Json doc = detail::parse_json(text, "dataset");
  DatasetBundle bundle;
  const Json& dims = field(doc, "dims");
  bundle.dims.visual = get_as<std::size_t>(field(dims, "visual", "dims"), "dims.visual");
  bundle.dims.semantic = get_as<std::size_t>(field(dims, "semantic", "dims"), "dims.semantic");

  const Json& classes = field(doc, "classes");
  if (!classes.is_array()) throw ParseError("field classes: expected array");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string path = "classes[" + std::to_string(i) + "]";
    const Json& c = classes[i];
    ClassRecord record;
    record.species_id = get_as<int>(field(c, "species_id", path), path + ".species_id");
    record.genus_id = get_as<int>(field(c, "genus_id", path), path + ".genus_id");
    record.family_id = get_as<int>(field(c, "family_id", path), path + ".family_id");
    record.name = get_as<std::string>(field(c, "name", path), path + ".name");
    record.semantic = real_array(field(c, "semantic", path), path + ".semantic");
    bundle.classes.push_back(std::move(record));
  }

  const Json& samples = field(doc, "samples");
  if (!samples.is_array()) throw ParseError("field samples: expected array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string path = "samples[" + std::to_string(i) + "]";
    Sample sample;
    sample.species_id = get_as<int>(field(samples[i], "species_id", path), path + ".species_id");
    sample.visual = real_array(field(samples[i], "visual", path), path + ".visual");
    bundle.samples.push_back(std::move(sample));
  }

  const Json& splits = field(doc, "splits");
  bundle.seen = get_as<std::vector<int>>(field(splits, "seen", "splits"), "splits.seen");
  bundle.unseen = get_as<std::vector<int>>(field(splits, "unseen", "splits"), "splits.unseen");

  try {
    bundle.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid dataset: ") + e.what());
  }
  return bundle;
}

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& path) {
  write_file_atomic(path, bundle_to_json(bundle));
}

DatasetBundle load_bundle(const std::filesystem::path& path) {
  return bundle_from_json(read_file(path));
}

}  // namespace mkfusion
