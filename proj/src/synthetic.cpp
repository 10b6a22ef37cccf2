#include "mkfusion/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mkfusion/rng.hpp"

namespace mkfusion {
namespace {

std::vector<double> gaussian(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// (rows x cols) with N(0, 1/cols) entries so projections keep per-coordinate variance.
std::vector<double> random_map(Rng& rng, std::size_t rows, std::size_t cols) {
  return gaussian(rng, rows * cols, 1.0 / std::sqrt(static_cast<double>(cols)));
}

std::vector<double> apply(const std::vector<double>& map, std::size_t rows,
                          const std::vector<double>& x) {
  std::vector<double> out(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) out[i] += map[i * x.size() + j] * x[j];
  }
  return out;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.families < 1 || spec.genera_per_family < 1 || spec.species_per_genus < 1 ||
      spec.samples_per_species < 1) {
    throw std::invalid_argument("synthetic spec: every count must be at least 1");
  }
  if (spec.visual_dim < 1 || spec.semantic_dim < 1 || spec.latent_dim < 1) {
    throw std::invalid_argument("synthetic spec: dimensions must be at least 1");
  }
  if (!(spec.unseen_fraction > 0.0 && spec.unseen_fraction < 1.0)) {
    throw std::invalid_argument("synthetic spec: unseen fraction must lie in (0, 1)");
  }
  if (!(spec.family_scale > spec.genus_scale && spec.genus_scale > spec.species_scale &&
        spec.species_scale > spec.sample_noise && spec.sample_noise >= 0.0 &&
        spec.semantic_noise >= 0.0)) {
    throw std::invalid_argument(
        "synthetic spec: scales must satisfy family > genus > species > sample noise >= 0");
  }
}

DatasetBundle generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  const std::size_t latent = spec.latent_dim;
  const auto visual_map = random_map(rng, spec.visual_dim, latent);
  const auto semantic_map = random_map(rng, spec.semantic_dim, latent);

  DatasetBundle bundle;
  bundle.dims = {spec.visual_dim, spec.semantic_dim};
  std::vector<std::vector<double>> visual_means;
  int genus_id = 0;
  int species_id = 0;
  for (int f = 0; f < spec.families; ++f) {
    const auto family_code = gaussian(rng, latent, spec.family_scale);
    for (int g = 0; g < spec.genera_per_family; ++g, ++genus_id) {
      auto genus_code = gaussian(rng, latent, spec.genus_scale);
      for (std::size_t k = 0; k < latent; ++k) genus_code[k] += family_code[k];
      for (int s = 0; s < spec.species_per_genus; ++s, ++species_id) {
        auto code = gaussian(rng, latent, spec.species_scale);
        for (std::size_t k = 0; k < latent; ++k) code[k] += genus_code[k];
        ClassRecord record;
        record.species_id = species_id;
        record.genus_id = genus_id;
        record.family_id = f;
        record.name = "family" + std::to_string(f) + "_genus" + std::to_string(genus_id) +
                      "_species" + std::to_string(species_id);
        record.semantic = apply(semantic_map, spec.semantic_dim, code);
        for (double& v : record.semantic) v += spec.semantic_noise * rng.normal();
        bundle.classes.push_back(std::move(record));
        visual_means.push_back(apply(visual_map, spec.visual_dim, code));
      }
    }
  }

  for (const auto& record : bundle.classes) {
    const auto& mu = visual_means[static_cast<std::size_t>(record.species_id)];
    for (int n = 0; n < spec.samples_per_species; ++n) {
      Sample sample;
      sample.species_id = record.species_id;
      sample.visual = mu;
      for (double& v : sample.visual) v += spec.sample_noise * rng.normal();
      bundle.samples.push_back(std::move(sample));
    }
  }

  // Unseen species drawn uniformly, keeping a seen species in every genus
  // whenever the requested count allows it.
  const std::size_t total = bundle.classes.size();
  if (total < 2) throw std::invalid_argument("synthetic spec: need at least two species");
  const auto wanted = static_cast<std::size_t>(std::clamp<long long>(
      std::llround(spec.unseen_fraction * static_cast<double>(total)), 1,
      static_cast<long long>(total) - 1));
  const auto order = rng.sample_without_replacement(total, total);
  std::map<int, int> seen_in_genus;
  for (const auto& c : bundle.classes) ++seen_in_genus[c.genus_id];
  std::vector<bool> chosen(total, false);
  std::size_t picked = 0;
  for (int pass = 0; pass < 2 && picked < wanted; ++pass) {
    for (std::size_t idx : order) {
      if (picked == wanted) break;
      if (chosen[idx]) continue;
      const int genus = bundle.classes[idx].genus_id;
      if (pass == 0 && seen_in_genus[genus] <= 1) continue;
      chosen[idx] = true;
      --seen_in_genus[genus];
      ++picked;
    }
  }
  for (std::size_t i = 0; i < total; ++i) {
    (chosen[i] ? bundle.unseen : bundle.seen).push_back(bundle.classes[i].species_id);
  }
  return bundle;
}

}  // namespace mkfusion
