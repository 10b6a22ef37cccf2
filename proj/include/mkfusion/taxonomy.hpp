#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mkfusion {

enum class Level { kSpecies = 0, kGenus = 1, kFamily = 2 };

inline constexpr std::array<Level, 3> kLevels = {Level::kSpecies, Level::kGenus, Level::kFamily};

std::string_view level_name(Level level);
Level parse_level(std::string_view name);

struct ClassRecord {
  int species_id = 0;
  int genus_id = 0;
  int family_id = 0;
  std::string name;
  std::vector<double> semantic;

  int id_at(Level level) const;
  friend bool operator==(const ClassRecord&, const ClassRecord&) = default;
};

struct Sample {
  std::vector<double> visual;
  int species_id = 0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dims {
  std::size_t visual = 0;
  std::size_t semantic = 0;
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Classes, samples of every species, and the seen/unseen partition of
// species ids. Which samples are "seen" follows from their species.
struct DatasetBundle {
  Dims dims;
  std::vector<ClassRecord> classes;
  std::vector<Sample> samples;
  std::vector<int> seen;
  std::vector<int> unseen;

  const ClassRecord& record(int species_id) const;
  bool is_seen(int species_id) const;
  bool is_unseen(int species_id) const;
  std::vector<std::size_t> sample_indices(std::span<const int> species) const;

  // Throws std::invalid_argument on the first violated invariant.
  void validate() const;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

// Read interface over a bundle. Training consumes data only through this,
// which lets audits observe exactly which visual vectors were touched.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual Dims dims() const = 0;
  virtual const std::vector<ClassRecord>& classes() const = 0;
  virtual const std::vector<int>& seen_species() const = 0;
  virtual std::size_t sample_count() const = 0;
  virtual int sample_species(std::size_t index) const = 0;
  virtual std::span<const double> sample_visual(std::size_t index) const = 0;
};

class BundleSource : public SampleSource {
 public:
  explicit BundleSource(const DatasetBundle& bundle) : bundle_(bundle) {}
  Dims dims() const override { return bundle_.dims; }
  const std::vector<ClassRecord>& classes() const override { return bundle_.classes; }
  const std::vector<int>& seen_species() const override { return bundle_.seen; }
  std::size_t sample_count() const override { return bundle_.samples.size(); }
  int sample_species(std::size_t index) const override {
    return bundle_.samples.at(index).species_id;
  }
  std::span<const double> sample_visual(std::size_t index) const override {
    return bundle_.samples.at(index).visual;
  }

 private:
  const DatasetBundle& bundle_;
};

struct KnowledgeEntry {
  std::vector<double> visual;
  int class_id = 0;
  int species_id = 0;
  std::vector<double> semantic;
};

// Seen samples relabeled at one level of the hierarchy.
struct KnowledgeDataset {
  Level level = Level::kSpecies;
  std::vector<KnowledgeEntry> entries;
  std::vector<int> class_ids;  // sorted, distinct

  std::size_t class_count() const { return class_ids.size(); }
  // Entry indices per class id.
  std::map<int, std::vector<std::size_t>> members() const;
};

struct KnowledgeDatasets {
  KnowledgeDataset species;
  KnowledgeDataset genus;
  KnowledgeDataset family;

  const KnowledgeDataset& at(Level level) const;
};

struct VisualCenters {
  Level level = Level::kSpecies;
  std::map<int, std::vector<double>> centers;

  const std::vector<double>& at(int class_id) const;
  bool contains(int class_id) const { return centers.contains(class_id); }
};

KnowledgeDatasets derive_knowledge_datasets(const SampleSource& source);
KnowledgeDatasets derive_knowledge_datasets(const DatasetBundle& bundle);

VisualCenters compute_visual_centers(const KnowledgeDataset& dataset);

}  // namespace mkfusion
