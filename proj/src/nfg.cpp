#include "mkfusion/nfg.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace mkfusion {

GeneticDraw draw_genetic(std::size_t dim, Rng& rng) {
  GeneticDraw draw;
  draw.mutation_rate = rng.uniform();
  draw.crossover_rate = rng.uniform();
  draw.mutation_positions = draw_positions(dim, draw.mutation_rate, rng);
  draw.crossover_positions = draw_positions(dim, draw.crossover_rate, rng);
  return draw;
}

std::vector<std::size_t> draw_positions(std::size_t dim, double rate, Rng& rng) {
  const auto count = static_cast<std::size_t>(std::floor(static_cast<double>(dim) * rate));
  return rng.sample_without_replacement(dim, std::min(count, dim));
}

std::vector<double> mutate(std::span<const double> parent, std::span<const std::size_t> positions,
                           Rng& rng) {
  std::vector<double> child(parent.begin(), parent.end());
  for (std::size_t p : positions) {
    if (p >= child.size()) throw std::out_of_range("mutate: position outside semantic vector");
    const double r = rng.uniform();
    if (child[p] != 0.0) {
      child[p] *= r;
    } else {
      child[p] += r;
    }
  }
  return child;
}

std::vector<double> mutate(std::span<const double> parent, Rng& rng) {
  const double rate = rng.uniform();
  const auto positions = draw_positions(parent.size(), rate, rng);
  return mutate(parent, positions, rng);
}

std::vector<double> crossover(std::span<const double> a, std::span<const double> b,
                              std::span<const std::size_t> positions) {
  if (a.size() != b.size()) {
    throw ShapeError("crossover: parent dimensions differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  std::vector<double> child(a.begin(), a.end());
  for (std::size_t p : positions) {
    if (p >= child.size()) throw std::out_of_range("crossover: position outside semantic vector");
    child[p] = b[p];
  }
  return child;
}

std::vector<double> crossover(std::span<const double> a, std::span<const double> b, Rng& rng) {
  if (a.size() != b.size()) {
    throw ShapeError("crossover: parent dimensions differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  const double rate = rng.uniform();
  const auto positions = draw_positions(a.size(), rate, rng);
  return crossover(a, b, positions);
}

std::size_t EnhancedPool::size() const {
  std::size_t n = 0;
  for (const auto& [key, list] : entries) n += list.size();
  return n;
}

ClassIndex::ClassIndex(const KnowledgeDatasets& datasets) {
  for (Level level : kLevels) {
    const KnowledgeDataset& d = datasets.at(level);
    ids_[static_cast<std::size_t>(level)] = d.class_ids;
    std::map<int, std::set<int>> seen_species;
    for (const auto& e : d.entries) {
      ClassInfo& info = info_[PoolKey{level, e.class_id}];
      if (seen_species[e.class_id].insert(e.species_id).second) {
        info.species.push_back(e.species_id);
        if (std::find(info.semantics.begin(), info.semantics.end(), e.semantic) ==
            info.semantics.end()) {
          info.semantics.push_back(e.semantic);
        }
      }
    }
  }
}

const ClassIndex::ClassInfo& ClassIndex::info(PoolKey key) const {
  auto it = info_.find(key);
  if (it == info_.end()) {
    throw std::out_of_range("no " + std::string(level_name(key.level)) + " class " +
                            std::to_string(key.class_id));
  }
  return it->second;
}

bool ClassIndex::empty() const {
  return ids_[0].empty() && ids_[1].empty() && ids_[2].empty();
}

Tensor ClassIndex::target(const MkfnetModel& model, PoolKey key) const {
  const auto& species = info(key).species;
  Tensor out = Tensor::zeros({1, model.seen_class_count()});
  for (int id : species) {
    out[static_cast<std::size_t>(model.class_index(id))] = 1.0 / static_cast<double>(species.size());
  }
  return out;
}

ParentDraw sample_parents(const ClassIndex& index, const EnhancedPool& enhanced, Rng& rng) {
  if (index.empty()) throw std::invalid_argument("sample_parents: empty knowledge datasets");
  const Level level = kLevels[rng.index(kLevels.size())];
  const auto& ids = index.class_ids(level);
  if (ids.empty()) throw std::invalid_argument("sample_parents: no classes at chosen level");
  const PoolKey key{level, ids[rng.index(ids.size())]};

  std::vector<const std::vector<double>*> candidates;
  for (const auto& s : index.info(key).semantics) candidates.push_back(&s);
  if (auto it = enhanced.entries.find(key); it != enhanced.entries.end()) {
    for (const auto& s : it->second) candidates.push_back(&s);
  }
  ParentDraw draw;
  draw.key = key;
  if (candidates.size() == 1) {
    draw.first = *candidates[0];
    draw.second = *candidates[0];
  } else {
    const auto pick = rng.sample_without_replacement(candidates.size(), 2);
    draw.first = *candidates[pick[0]];
    draw.second = *candidates[pick[1]];
  }
  return draw;
}

void validate(const StabilityThresholds& thresholds) {
  if (!(thresholds.kappa1 > thresholds.kappa2)) {
    throw std::invalid_argument("stability thresholds require kappa1 > kappa2 (got " +
                                std::to_string(thresholds.kappa1) + " <= " +
                                std::to_string(thresholds.kappa2) + ")");
  }
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine: vector lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double stability(const MkfnetModel& model, std::span<const double> semantic,
                 std::span<const double> center, Rng& rng) {
  const Tensor t({1, semantic.size()}, std::vector<double>(semantic.begin(), semantic.end()));
  const Tensor x = synthesize(model, t, sample_noise(1, model.config().noise_dim, rng));
  return cosine(x.data(), center);
}

Selection classify_stability(double d, const StabilityThresholds& thresholds) {
  if (d > thresholds.kappa1) return Selection::kEnhanced;
  if (d < thresholds.kappa2) return Selection::kNovel;
  return Selection::kDiscarded;
}

Selection select(PoolKey key, std::vector<double> semantic, double d,
                 const StabilityThresholds& thresholds, Pools& pools) {
  validate(thresholds);
  const Selection s = classify_stability(d, thresholds);
  if (s == Selection::kEnhanced) pools.enhanced.add(key, std::move(semantic));
  if (s == Selection::kNovel) pools.novel.add(std::move(semantic));
  return s;
}

NfgRoundStats run_nfg_round(const MkfnetModel& model, const ClassIndex& index,
                            const std::array<VisualCenters, 3>& centers,
                            const StabilityThresholds& thresholds, std::size_t offspring,
                            Pools& pools, Rng& rng) {
  validate(thresholds);
  NfgRoundStats stats;
  if (offspring == 0) return stats;
  std::vector<PoolKey> keys;
  std::vector<std::vector<double>> children;
  for (std::size_t i = 0; i < offspring; ++i) {
    ParentDraw parents = sample_parents(index, pools.enhanced, rng);
    keys.push_back(parents.key);
    children.push_back(i < offspring / 2 ? mutate(parents.first, rng)
                                         : crossover(parents.first, parents.second, rng));
  }
  const std::size_t dim = children[0].size();
  Tensor t = Tensor::zeros({offspring, dim});
  for (std::size_t i = 0; i < offspring; ++i) {
    std::copy(children[i].begin(), children[i].end(),
              t.data().begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  const Tensor x = synthesize(model, t, sample_noise(offspring, model.config().noise_dim, rng));
  for (std::size_t i = 0; i < offspring; ++i) {
    const auto& center = centers[static_cast<std::size_t>(keys[i].level)].at(keys[i].class_id);
    double d = 0.0;
    try {
      d = cosine(x.row(i), center);
    } catch (const NumericError&) {
      ++stats.discarded;  // undefined similarity
      continue;
    }
    switch (select(keys[i], std::move(children[i]), d, thresholds, pools)) {
      case Selection::kEnhanced: ++stats.enhanced; break;
      case Selection::kNovel: ++stats.novel; break;
      case Selection::kDiscarded: ++stats.discarded; break;
    }
  }
  return stats;
}

std::optional<EnhancedBatch> sample_enhanced(const MkfnetModel& model, const ClassIndex& index,
                                             const EnhancedPool& pool, std::size_t batch,
                                             Rng& rng) {
  std::vector<std::pair<PoolKey, const std::vector<double>*>> flat;
  for (const auto& [key, list] : pool.entries) {
    for (const auto& s : list) flat.emplace_back(key, &s);
  }
  if (flat.empty() || batch == 0) return std::nullopt;
  const auto pick = rng.sample_without_replacement(flat.size(), std::min(batch, flat.size()));
  const std::size_t dim = flat[0].second->size();
  const std::size_t k = model.seen_class_count();
  EnhancedBatch out{Tensor::zeros({pick.size(), dim}), Tensor::zeros({pick.size(), k})};
  for (std::size_t i = 0; i < pick.size(); ++i) {
    const auto& [key, semantic] = flat[pick[i]];
    std::copy(semantic->begin(), semantic->end(),
              out.semantics.data().begin() + static_cast<std::ptrdiff_t>(i * dim));
    const Tensor target = index.target(model, key);
    std::copy(target.data().begin(), target.data().end(),
              out.targets.data().begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  return out;
}

std::optional<Tensor> sample_novel(const NovelPool& pool, std::size_t batch, Rng& rng) {
  if (pool.empty() || batch == 0) return std::nullopt;
  const auto pick = rng.sample_without_replacement(pool.size(), std::min(batch, pool.size()));
  const std::size_t dim = pool.entries[0].size();
  Tensor out = Tensor::zeros({pick.size(), dim});
  for (std::size_t i = 0; i < pick.size(); ++i) {
    const auto& s = pool.entries[pick[i]];
    std::copy(s.begin(), s.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return out;
}

std::optional<Var> loss_er(Tape& tape, const MkfnetModel& model, const ClassIndex& index,
                           const EnhancedPool& pool, std::size_t batch, Rng& rng) {
  auto sample = sample_enhanced(model, index, pool, batch, rng);
  if (!sample) return std::nullopt;
  const Tensor z = sample_noise(sample->semantics.rows(), model.config().noise_dim, rng);
  const Synthesis s = synthesize(tape, model, tape.constant(sample->semantics),
                                 tape.constant(z), Binding::kFrozen, Binding::kTrainable);
  return loss_enhanced(tape, model, s.fused, sample->targets);
}

std::optional<Var> loss_nr(Tape& tape, const MkfnetModel& model, const NovelPool& pool,
                           double lambda, std::size_t batch, Rng& rng) {
  auto semantics = sample_novel(pool, batch, rng);
  if (!semantics) return std::nullopt;
  const Tensor z = sample_noise(semantics->rows(), model.config().noise_dim, rng);
  const Synthesis s = synthesize(tape, model, tape.constant(*semantics), tape.constant(z),
                                 Binding::kFrozen, Binding::kTrainable);
  return loss_novel(tape, model, s.fused, lambda);
}

}  // namespace mkfusion
