#pragma once

#include <cstdint>

#include "mkfusion/taxonomy.hpp"

namespace mkfusion {

// Hierarchical Gaussian benchmark. Every species has a latent code
//   family offset + genus offset + species offset
// in a small latent space. Visual cluster means and class semantics are two
// fixed random linear maps of that code, so semantics predict visuals.
struct SyntheticSpec {
  int families = 3;
  int genera_per_family = 3;
  int species_per_genus = 4;
  int samples_per_species = 20;
  std::size_t visual_dim = 32;
  std::size_t semantic_dim = 16;
  std::size_t latent_dim = 8;
  double unseen_fraction = 0.17;
  double family_scale = 1.0;
  double genus_scale = 0.7;
  double species_scale = 0.5;
  double sample_noise = 0.15;
  double semantic_noise = 0.05;
};

void validate(const SyntheticSpec& spec);

DatasetBundle generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace mkfusion
