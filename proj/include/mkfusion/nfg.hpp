#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mkfusion/model.hpp"
#include "mkfusion/rng.hpp"
#include "mkfusion/taxonomy.hpp"

namespace mkfusion {

// ---- genetic operators ----

// Coefficients and positions for one mutation/crossover round over a
// d-dimensional semantic vector: floor(d * r) distinct positions each.
struct GeneticDraw {
  double mutation_rate = 0.0;   // r1
  double crossover_rate = 0.0;  // r2
  std::vector<std::size_t> mutation_positions;
  std::vector<std::size_t> crossover_positions;
};

GeneticDraw draw_genetic(std::size_t dim, Rng& rng);
std::vector<std::size_t> draw_positions(std::size_t dim, double rate, Rng& rng);

// At each position a fresh r ~ U(0,1): nonzero entries are multiplied by r,
// zero entries get r added. Other positions are copied.
std::vector<double> mutate(std::span<const double> parent, std::span<const std::size_t> positions,
                           Rng& rng);
std::vector<double> mutate(std::span<const double> parent, Rng& rng);

// Copy of a with the given positions taken from b.
std::vector<double> crossover(std::span<const double> a, std::span<const double> b,
                              std::span<const std::size_t> positions);
std::vector<double> crossover(std::span<const double> a, std::span<const double> b, Rng& rng);

// ---- pools ----

struct PoolKey {
  Level level = Level::kSpecies;
  int class_id = 0;
  friend auto operator<=>(const PoolKey&, const PoolKey&) = default;
};

// Stable offspring kept under the class of their parents.
struct EnhancedPool {
  std::map<PoolKey, std::vector<std::vector<double>>> entries;

  void add(PoolKey key, std::vector<double> semantic) {
    entries[key].push_back(std::move(semantic));
  }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
};

// Deviated offspring; no labels, no visuals.
struct NovelPool {
  std::vector<std::vector<double>> entries;

  void add(std::vector<double> semantic) { entries.push_back(std::move(semantic)); }
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

struct Pools {
  EnhancedPool enhanced;
  NovelPool novel;
  friend bool operator==(const Pools& a, const Pools& b) {
    return a.enhanced.entries == b.enhanced.entries && a.novel.entries == b.novel.entries;
  }
};

// Per level: the classes present in the knowledge datasets, their distinct
// member semantics and their member species.
class ClassIndex {
 public:
  struct ClassInfo {
    std::vector<std::vector<double>> semantics;
    std::vector<int> species;
  };

  ClassIndex() = default;
  explicit ClassIndex(const KnowledgeDatasets& datasets);

  const std::vector<int>& class_ids(Level level) const {
    return ids_[static_cast<std::size_t>(level)];
  }
  const ClassInfo& info(PoolKey key) const;
  bool empty() const;

  // Uniform over the seen species of the class: one-hot at species level.
  Tensor target(const MkfnetModel& model, PoolKey key) const;

 private:
  std::array<std::vector<int>, 3> ids_;
  std::map<PoolKey, ClassInfo> info_;
};

struct ParentDraw {
  PoolKey key;
  std::vector<double> first;
  std::vector<double> second;
};

// Uniform level, uniform class at that level, then two parents from the
// class's semantics plus its enhanced entries (with replacement only when a
// single candidate exists).
ParentDraw sample_parents(const ClassIndex& index, const EnhancedPool& enhanced, Rng& rng);

// ---- selection ----

struct StabilityThresholds {
  double kappa1 = 0.8;
  double kappa2 = 0.2;
};

void validate(const StabilityThresholds& thresholds);

enum class Selection { kEnhanced, kNovel, kDiscarded };

double cosine(std::span<const double> a, std::span<const double> b);

// Cosine between the fused synthesis of `semantic` (fresh noise) and `center`.
double stability(const MkfnetModel& model, std::span<const double> semantic,
                 std::span<const double> center, Rng& rng);

Selection classify_stability(double d, const StabilityThresholds& thresholds);

// Routes the offspring into the matching pool and returns the decision.
Selection select(PoolKey key, std::vector<double> semantic, double d,
                 const StabilityThresholds& thresholds, Pools& pools);

struct NfgRoundStats {
  std::size_t enhanced = 0;
  std::size_t novel = 0;
  std::size_t discarded = 0;
};

// Breeds `offspring` semantics (first half mutation, rest crossover), scores
// them in one fused batch against the parents' class centers and routes them.
NfgRoundStats run_nfg_round(const MkfnetModel& model, const ClassIndex& index,
                            const std::array<VisualCenters, 3>& centers,
                            const StabilityThresholds& thresholds, std::size_t offspring,
                            Pools& pools, Rng& rng);

// ---- regularizers ----

// Batches of pool semantics, drawn uniformly without replacement.
struct EnhancedBatch {
  Tensor semantics;
  Tensor targets;
};

std::optional<EnhancedBatch> sample_enhanced(const MkfnetModel& model, const ClassIndex& index,
                                             const EnhancedPool& pool, std::size_t batch,
                                             Rng& rng);
std::optional<Tensor> sample_novel(const NovelPool& pool, std::size_t batch, Rng& rng);

// Empty pools yield std::nullopt, i.e. a zero term. Generators are frozen;
// gradients reach the fusion module only.
std::optional<Var> loss_er(Tape& tape, const MkfnetModel& model, const ClassIndex& index,
                           const EnhancedPool& pool, std::size_t batch, Rng& rng);
std::optional<Var> loss_nr(Tape& tape, const MkfnetModel& model, const NovelPool& pool,
                           double lambda, std::size_t batch, Rng& rng);

}  // namespace mkfusion
