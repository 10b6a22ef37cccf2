#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mkfusion/autodiff.hpp"
#include "mkfusion/rng.hpp"
#include "mkfusion/taxonomy.hpp"

namespace mkfusion {

// Whether a forward pass records parameters as gradient-receiving leaves or
// as frozen constants.
enum class Binding { kTrainable, kFrozen };

enum class FusionMode { kAdaptive, kSumming };

std::string_view fusion_mode_name(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);

struct Linear {
  Tensor weight;  // (in x out)
  Tensor bias;    // (out)

  Linear() = default;
  // Uniform in [-1/sqrt(in), 1/sqrt(in)].
  Linear(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
  Var forward(Tape& tape, Var x, Binding binding) const;
};

// (t ++ z) -> hidden (leaky-relu) -> visual, linear output.
struct GeneratorNet {
  Level level = Level::kSpecies;
  std::size_t noise_dim = 0;
  double slope = 0.2;
  Linear hidden;
  Linear output;
};

// Two-layer trunk, then a realness head and a class-logit head.
struct DiscriminatorNet {
  double slope = 0.2;
  Linear trunk1;
  Linear trunk2;
  Linear realness;
  Linear classes;
};

// Per-level scorer: sigmoid(W2 leaky-relu(W1 x + b1) + b2).
struct FusionBranch {
  Linear hidden;
  Linear score;  // exactly one output neuron
};

struct FusionNet {
  double slope = 0.2;
  std::array<FusionBranch, 3> branches;  // indexed by Level

  FusionBranch& branch(Level level) { return branches[static_cast<std::size_t>(level)]; }
  const FusionBranch& branch(Level level) const {
    return branches[static_cast<std::size_t>(level)];
  }
};

struct ModelConfig {
  Dims dims;
  std::size_t noise_dim = 32;
  std::size_t generator_hidden = 256;
  std::size_t discriminator_hidden1 = 256;
  std::size_t discriminator_hidden2 = 128;
  std::size_t fusion_hidden = 64;
  double leaky_slope = 0.2;
  FusionMode fusion = FusionMode::kAdaptive;
};

class MkfnetModel {
 public:
  MkfnetModel() = default;
  // seen_species fixes the column order of the class head.
  MkfnetModel(const ModelConfig& config, std::vector<int> seen_species, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<int>& seen_species() const { return seen_species_; }
  std::size_t seen_class_count() const { return seen_species_.size(); }
  int class_index(int species_id) const;

  GeneratorNet& generator(Level level) { return generators_[static_cast<std::size_t>(level)]; }
  const GeneratorNet& generator(Level level) const {
    return generators_[static_cast<std::size_t>(level)];
  }
  DiscriminatorNet& discriminator() { return discriminator_; }
  const DiscriminatorNet& discriminator() const { return discriminator_; }
  FusionNet& fusion() { return fusion_; }
  const FusionNet& fusion() const { return fusion_; }

  std::vector<Tensor*> generator_parameters();
  std::vector<Tensor*> discriminator_parameters();
  // Trunk and realness head: the parameters subject to weight clipping.
  std::vector<Tensor*> critic_parameters();
  std::vector<Tensor*> fusion_parameters();
  std::vector<std::pair<std::string, Tensor*>> named_parameters();

 private:
  ModelConfig config_;
  std::vector<int> seen_species_;
  std::array<GeneratorNet, 3> generators_;
  DiscriminatorNet discriminator_;
  FusionNet fusion_;
};

// ---- tape-level forward passes ----

Var generate(Tape& tape, const GeneratorNet& g, Var semantic, Var noise, Binding binding);

struct Critique {
  Var realness;  // (n x 1)
  Var logits;    // (n x K^s)
};

Critique discriminate(Tape& tape, const DiscriminatorNet& d, Var x, Binding binding);

struct FusionOutput {
  Var fused;
  std::array<Var, 3> weights;  // (n x 1) per level, indexed by Level
};

// x is indexed by Level.
FusionOutput fuse(Tape& tape, const FusionNet& f, const std::array<Var, 3>& x, Binding binding);
Var fuse_baseline(Var family, Var genus, Var species);

struct Synthesis {
  std::array<Var, 3> per_level;  // indexed by Level
  Var fused;
  std::optional<std::array<Var, 3>> weights;
};

// Three generators on the same (t, z) followed by the configured fusion.
Synthesis synthesize(Tape& tape, const MkfnetModel& model, Var semantic, Var noise,
                     Binding generators, Binding fusion);

// ---- value-level convenience ----

struct FusionWeights {
  double family = 0.0;
  double genus = 0.0;
  double species = 0.0;
};

struct FusionResult {
  Tensor fused;
  std::vector<FusionWeights> weights;  // one per row
};

Tensor generate(const GeneratorNet& g, const Tensor& semantic, const Tensor& noise);
FusionResult fuse(const FusionNet& f, const Tensor& family, const Tensor& genus,
                  const Tensor& species);
Tensor fuse_baseline(const Tensor& family, const Tensor& genus, const Tensor& species);
std::pair<Tensor, Tensor> discriminate(const DiscriminatorNet& d, const Tensor& x);
// Fused visual features for semantic rows under given noise.
Tensor synthesize(const MkfnetModel& model, const Tensor& semantic, const Tensor& noise);

Tensor sample_noise(std::size_t rows, std::size_t noise_dim, Rng& rng);

// ---- losses ----

// Row i's center at this level, for labels given as class ids of that level.
Tensor gather_centers(const VisualCenters& centers, std::span<const int> labels);

// Mean squared distance between generated rows and their class centers.
Var loss_kr(Var generated, const VisualCenters& centers, std::span<const int> labels);

// (n x K^s) one-hot targets for species ids.
Tensor species_targets(const MkfnetModel& model, std::span<const int> species_ids);

// -mean(realness(x)) + cross-entropy(logits(x), targets) with D frozen.
Var adversarial_class_loss(Tape& tape, const MkfnetModel& model, Var x, const Tensor& targets);

struct GeneratorLoss {
  Var adversarial;
  Var classification;
  Var kr;
  Var total;
};

GeneratorLoss loss_generator(Tape& tape, const MkfnetModel& model, Var generated,
                             const Tensor& targets, Var kr);

struct DiscriminatorLoss {
  Var wasserstein;  // mean(realness(fake)) - mean(realness(real))
  Var classification;
  Var total;
};

DiscriminatorLoss loss_discriminator(Tape& tape, const MkfnetModel& model, Var real, Var fake,
                                     const Tensor& targets);

struct FusionLoss {
  Var adversarial;
  Var classification;
  std::optional<Var> enhanced;
  std::optional<Var> novel;
  Var total;
};

// Absent pool terms contribute zero.
FusionLoss loss_fusion(Tape& tape, const MkfnetModel& model, Var fused, const Tensor& targets,
                       std::optional<Var> enhanced, std::optional<Var> novel);

// Adversarial + classification on fused features of enhanced semantics.
Var loss_enhanced(Tape& tape, const MkfnetModel& model, Var fused, const Tensor& targets);

// +mean(realness) + lambda * mean ||softmax(logits) - uniform||^2.
Var loss_novel(Tape& tape, const MkfnetModel& model, Var fused, double lambda);

}  // namespace mkfusion
