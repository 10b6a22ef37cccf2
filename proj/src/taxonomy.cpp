#include "mkfusion/taxonomy.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace mkfusion {

std::string_view level_name(Level level) {
  switch (level) {
    case Level::kSpecies: return "species";
    case Level::kGenus: return "genus";
    case Level::kFamily: return "family";
  }
  return "unknown";
}

Level parse_level(std::string_view name) {
  for (Level level : kLevels) {
    if (level_name(level) == name) return level;
  }
  throw std::invalid_argument("unknown knowledge level: " + std::string(name));
}

int ClassRecord::id_at(Level level) const {
  switch (level) {
    case Level::kSpecies: return species_id;
    case Level::kGenus: return genus_id;
    case Level::kFamily: return family_id;
  }
  return species_id;
}

const ClassRecord& DatasetBundle::record(int species_id) const {
  for (const auto& c : classes) {
    if (c.species_id == species_id) return c;
  }
  throw std::out_of_range("unknown species id " + std::to_string(species_id));
}

bool DatasetBundle::is_seen(int species_id) const {
  return std::find(seen.begin(), seen.end(), species_id) != seen.end();
}

bool DatasetBundle::is_unseen(int species_id) const {
  return std::find(unseen.begin(), unseen.end(), species_id) != unseen.end();
}

std::vector<std::size_t> DatasetBundle::sample_indices(std::span<const int> species) const {
  const std::set<int> wanted(species.begin(), species.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (wanted.contains(samples[i].species_id)) out.push_back(i);
  }
  return out;
}

void DatasetBundle::validate() const {
  std::set<int> species_ids;
  std::map<int, int> genus_family;
  for (const auto& c : classes) {
    if (c.species_id < 0 || c.genus_id < 0 || c.family_id < 0) {
      throw std::invalid_argument("class '" + c.name + "' has a negative id");
    }
    if (!species_ids.insert(c.species_id).second) {
      throw std::invalid_argument("duplicate species id " + std::to_string(c.species_id));
    }
    auto [it, inserted] = genus_family.emplace(c.genus_id, c.family_id);
    if (!inserted && it->second != c.family_id) {
      throw std::invalid_argument("genus " + std::to_string(c.genus_id) +
                                  " maps to more than one family");
    }
    if (c.semantic.size() != dims.semantic) {
      throw std::invalid_argument("class " + std::to_string(c.species_id) +
                                  " semantic dimension mismatch");
    }
  }
  std::set<int> seen_set(seen.begin(), seen.end());
  for (int id : unseen) {
    if (seen_set.contains(id)) {
      throw std::invalid_argument("species " + std::to_string(id) + " is both seen and unseen");
    }
  }
  for (int id : seen) {
    if (!species_ids.contains(id)) throw std::invalid_argument("unknown seen species " + std::to_string(id));
  }
  for (int id : unseen) {
    if (!species_ids.contains(id)) throw std::invalid_argument("unknown unseen species " + std::to_string(id));
  }
  for (const auto& s : samples) {
    if (!species_ids.contains(s.species_id)) {
      throw std::invalid_argument("sample refers to unknown species " + std::to_string(s.species_id));
    }
    if (!seen_set.contains(s.species_id) && !is_unseen(s.species_id)) {
      throw std::invalid_argument("species " + std::to_string(s.species_id) + " is in no split");
    }
    if (s.visual.size() != dims.visual) {
      throw std::invalid_argument("sample visual dimension mismatch");
    }
  }
}

std::map<int, std::vector<std::size_t>> KnowledgeDataset::members() const {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < entries.size(); ++i) out[entries[i].class_id].push_back(i);
  return out;
}

const KnowledgeDataset& KnowledgeDatasets::at(Level level) const {
  switch (level) {
    case Level::kSpecies: return species;
    case Level::kGenus: return genus;
    case Level::kFamily: return family;
  }
  return species;
}

const std::vector<double>& VisualCenters::at(int class_id) const {
  auto it = centers.find(class_id);
  if (it == centers.end()) {
    throw std::out_of_range("no " + std::string(level_name(level)) + " center for class " +
                            std::to_string(class_id));
  }
  return it->second;
}

KnowledgeDatasets derive_knowledge_datasets(const SampleSource& source) {
  std::unordered_map<int, const ClassRecord*> by_species;
  for (const auto& c : source.classes()) by_species.emplace(c.species_id, &c);
  const std::set<int> seen(source.seen_species().begin(), source.seen_species().end());
  for (int id : seen) {
    if (!by_species.contains(id)) {
      throw std::invalid_argument("seen species " + std::to_string(id) +
                                  " has no genus/family mapping");
    }
  }

  KnowledgeDatasets out;
  out.species.level = Level::kSpecies;
  out.genus.level = Level::kGenus;
  out.family.level = Level::kFamily;
  std::array<std::set<int>, 3> ids;
  for (std::size_t i = 0; i < source.sample_count(); ++i) {
    const int species = source.sample_species(i);
    if (!seen.contains(species)) continue;
    const ClassRecord& record = *by_species.at(species);
    const auto visual = source.sample_visual(i);
    for (Level level : kLevels) {
      KnowledgeDataset& d = level == Level::kSpecies ? out.species
                            : level == Level::kGenus ? out.genus
                                                     : out.family;
      KnowledgeEntry entry;
      entry.visual.assign(visual.begin(), visual.end());
      entry.class_id = record.id_at(level);
      entry.species_id = species;
      entry.semantic = record.semantic;
      ids[static_cast<std::size_t>(level)].insert(entry.class_id);
      d.entries.push_back(std::move(entry));
    }
  }
  out.species.class_ids.assign(ids[0].begin(), ids[0].end());
  out.genus.class_ids.assign(ids[1].begin(), ids[1].end());
  out.family.class_ids.assign(ids[2].begin(), ids[2].end());
  return out;
}

KnowledgeDatasets derive_knowledge_datasets(const DatasetBundle& bundle) {
  return derive_knowledge_datasets(BundleSource(bundle));
}

VisualCenters compute_visual_centers(const KnowledgeDataset& dataset) {
  VisualCenters out;
  out.level = dataset.level;
  std::map<int, std::size_t> counts;
  for (const auto& e : dataset.entries) {
    auto& center = out.centers[e.class_id];
    if (center.empty()) center.assign(e.visual.size(), 0.0);
    for (std::size_t j = 0; j < e.visual.size(); ++j) center[j] += e.visual[j];
    ++counts[e.class_id];
  }
  for (int id : dataset.class_ids) {
    if (!counts.contains(id)) {
      throw std::invalid_argument("class " + std::to_string(id) + " has no samples");
    }
  }
  for (auto& [id, center] : out.centers) {
    const double n = static_cast<double>(counts[id]);
    for (double& v : center) v /= n;
  }
  return out;
}

}  // namespace mkfusion
