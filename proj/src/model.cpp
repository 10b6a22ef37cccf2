#include "mkfusion/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mkfusion {
namespace {

Var bind(Tape& tape, const Tensor& param, Binding binding) {
  return binding == Binding::kTrainable ? tape.parameter(param) : tape.constant(param);
}

void append(std::vector<Tensor*>& out, Linear& layer) {
  out.push_back(&layer.weight);
  out.push_back(&layer.bias);
}

// Family + Genus + Species, in that order, so forced-uniform weights reproduce
// the baseline bit for bit.
Var weighted_sum(const std::array<Var, 3>& x, const std::array<Var, 3>& weights) {
  const auto term = [&](Level level) {
    const auto k = static_cast<std::size_t>(level);
    return scale_rows(x[k], weights[k]);
  };
  return term(Level::kFamily) + term(Level::kGenus) + term(Level::kSpecies);
}

}  // namespace

std::string_view fusion_mode_name(FusionMode mode) {
  return mode == FusionMode::kAdaptive ? "adaptive" : "summing";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "adaptive") return FusionMode::kAdaptive;
  if (name == "summing") return FusionMode::kSumming;
  throw std::invalid_argument("unknown fusion mode: " + std::string(name));
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(Tensor::zeros({in, out})), bias(Tensor::zeros({out})) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : weight.data()) w = rng.uniform(-bound, bound);
  for (double& b : bias.data()) b = rng.uniform(-bound, bound);
}

Var Linear::forward(Tape& tape, Var x, Binding binding) const {
  return add_row(matmul(x, bind(tape, weight, binding)), bind(tape, bias, binding));
}

MkfnetModel::MkfnetModel(const ModelConfig& config, std::vector<int> seen_species,
                         std::uint64_t seed)
    : config_(config), seen_species_(std::move(seen_species)) {
  if (seen_species_.empty()) throw std::invalid_argument("model needs at least one seen class");
  if (config.dims.visual == 0 || config.dims.semantic == 0 || config.noise_dim == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  const std::size_t in = config.dims.semantic + config.noise_dim;
  for (Level level : kLevels) {
    Rng rng(derive_seed(seed, 10 + static_cast<std::uint64_t>(level)));
    GeneratorNet& g = generator(level);
    g.level = level;
    g.noise_dim = config.noise_dim;
    g.slope = config.leaky_slope;
    g.hidden = Linear(in, config.generator_hidden, rng);
    g.output = Linear(config.generator_hidden, config.dims.visual, rng);
  }
  {
    Rng rng(derive_seed(seed, 20));
    discriminator_.slope = config.leaky_slope;
    discriminator_.trunk1 = Linear(config.dims.visual, config.discriminator_hidden1, rng);
    discriminator_.trunk2 =
        Linear(config.discriminator_hidden1, config.discriminator_hidden2, rng);
    discriminator_.realness = Linear(config.discriminator_hidden2, 1, rng);
    discriminator_.classes = Linear(config.discriminator_hidden2, seen_species_.size(), rng);
  }
  {
    Rng rng(derive_seed(seed, 30));
    fusion_.slope = config.leaky_slope;
    for (Level level : kLevels) {
      fusion_.branch(level).hidden = Linear(config.dims.visual, config.fusion_hidden, rng);
      fusion_.branch(level).score = Linear(config.fusion_hidden, 1, rng);
    }
  }
}

int MkfnetModel::class_index(int species_id) const {
  auto it = std::find(seen_species_.begin(), seen_species_.end(), species_id);
  if (it == seen_species_.end()) {
    throw std::out_of_range("species " + std::to_string(species_id) + " is not a seen class");
  }
  return static_cast<int>(it - seen_species_.begin());
}

std::vector<Tensor*> MkfnetModel::generator_parameters() {
  std::vector<Tensor*> out;
  for (auto& g : generators_) {
    append(out, g.hidden);
    append(out, g.output);
  }
  return out;
}

std::vector<Tensor*> MkfnetModel::discriminator_parameters() {
  std::vector<Tensor*> out = critic_parameters();
  append(out, discriminator_.classes);
  return out;
}

std::vector<Tensor*> MkfnetModel::critic_parameters() {
  std::vector<Tensor*> out;
  append(out, discriminator_.trunk1);
  append(out, discriminator_.trunk2);
  append(out, discriminator_.realness);
  return out;
}

std::vector<Tensor*> MkfnetModel::fusion_parameters() {
  std::vector<Tensor*> out;
  for (auto& b : fusion_.branches) {
    append(out, b.hidden);
    append(out, b.score);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> MkfnetModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  const auto add_linear = [&](const std::string& prefix, Linear& layer) {
    out.emplace_back(prefix + "/weight", &layer.weight);
    out.emplace_back(prefix + "/bias", &layer.bias);
  };
  for (Level level : kLevels) {
    const std::string prefix = "generator/" + std::string(level_name(level));
    add_linear(prefix + "/hidden", generator(level).hidden);
    add_linear(prefix + "/output", generator(level).output);
  }
  add_linear("discriminator/trunk1", discriminator_.trunk1);
  add_linear("discriminator/trunk2", discriminator_.trunk2);
  add_linear("discriminator/realness", discriminator_.realness);
  add_linear("discriminator/classes", discriminator_.classes);
  for (Level level : kLevels) {
    const std::string prefix = "fusion/" + std::string(level_name(level));
    add_linear(prefix + "/hidden", fusion_.branch(level).hidden);
    add_linear(prefix + "/score", fusion_.branch(level).score);
  }
  return out;
}

Var generate(Tape& tape, const GeneratorNet& g, Var semantic, Var noise, Binding binding) {
  if (noise.value().rank() != 2 || noise.value().cols() != g.noise_dim) {
    throw ShapeError("generate: noise must have " + std::to_string(g.noise_dim) + " columns, got " +
                     to_string(noise.value().shape()));
  }
  const Var input = concat_cols(semantic, noise);
  if (input.value().cols() != g.hidden.in()) {
    throw ShapeError("generate: semantic dimension " + std::to_string(semantic.value().cols()) +
                     " does not match generator input " +
                     std::to_string(g.hidden.in() - g.noise_dim));
  }
  const Var h = leaky_relu(g.hidden.forward(tape, input, binding), g.slope);
  return g.output.forward(tape, h, binding);
}

Critique discriminate(Tape& tape, const DiscriminatorNet& d, Var x, Binding binding) {
  if (x.value().rank() != 2 || x.value().cols() != d.trunk1.in()) {
    throw ShapeError("discriminate: expected " + std::to_string(d.trunk1.in()) +
                     " columns, got shape " + to_string(x.value().shape()));
  }
  const Var h1 = leaky_relu(d.trunk1.forward(tape, x, binding), d.slope);
  const Var h2 = leaky_relu(d.trunk2.forward(tape, h1, binding), d.slope);
  return {d.realness.forward(tape, h2, binding), d.classes.forward(tape, h2, binding)};
}

FusionOutput fuse(Tape& tape, const FusionNet& f, const std::array<Var, 3>& x, Binding binding) {
  const Shape& shape = x[0].value().shape();
  for (const Var& v : x) {
    if (v.value().shape() != shape) {
      throw ShapeError("fuse: level features differ in shape: " + to_string(shape) + " vs " +
                       to_string(v.value().shape()));
    }
  }
  std::array<Var, 3> scores;
  for (Level level : kLevels) {
    const auto k = static_cast<std::size_t>(level);
    const FusionBranch& b = f.branch(level);
    const Var h = leaky_relu(b.hidden.forward(tape, x[k], binding), f.slope);
    scores[k] = sigmoid(b.score.forward(tape, h, binding));
  }
  // rho_k = 1 / sum_j (s_j / s_k): equal to s_k / sum_j s_j, and exactly 1/3
  // whenever the three scores coincide.
  FusionOutput out;
  const Var one = tape.constant(Tensor::full(scores[0].value().shape(), 1.0));
  for (std::size_t k = 0; k < 3; ++k) {
    const Var ratios = div(scores[0], scores[k]) + div(scores[1], scores[k]) +
                       div(scores[2], scores[k]);
    out.weights[k] = div(one, ratios);
  }
  out.fused = weighted_sum(x, out.weights);
  return out;
}

Var fuse_baseline(Var family, Var genus, Var species) {
  Tape& tape = *family.tape;
  const Var third = tape.constant(Tensor::full({family.value().rows(), 1}, 1.0 / 3.0));
  std::array<Var, 3> x;
  x[static_cast<std::size_t>(Level::kFamily)] = family;
  x[static_cast<std::size_t>(Level::kGenus)] = genus;
  x[static_cast<std::size_t>(Level::kSpecies)] = species;
  return weighted_sum(x, {third, third, third});
}

Synthesis synthesize(Tape& tape, const MkfnetModel& model, Var semantic, Var noise,
                     Binding generators, Binding fusion) {
  Synthesis out;
  for (Level level : kLevels) {
    out.per_level[static_cast<std::size_t>(level)] =
        generate(tape, model.generator(level), semantic, noise, generators);
  }
  const auto& x = out.per_level;
  if (model.config().fusion == FusionMode::kAdaptive) {
    FusionOutput f = fuse(tape, model.fusion(), x, fusion);
    out.fused = f.fused;
    out.weights = f.weights;
  } else {
    out.fused = fuse_baseline(x[static_cast<std::size_t>(Level::kFamily)],
                              x[static_cast<std::size_t>(Level::kGenus)],
                              x[static_cast<std::size_t>(Level::kSpecies)]);
  }
  return out;
}

Tensor generate(const GeneratorNet& g, const Tensor& semantic, const Tensor& noise) {
  Tape tape;
  return generate(tape, g, tape.constant(semantic), tape.constant(noise), Binding::kFrozen)
      .value();
}

FusionResult fuse(const FusionNet& f, const Tensor& family, const Tensor& genus,
                  const Tensor& species) {
  Tape tape;
  std::array<Var, 3> x;
  x[static_cast<std::size_t>(Level::kFamily)] = tape.constant(family);
  x[static_cast<std::size_t>(Level::kGenus)] = tape.constant(genus);
  x[static_cast<std::size_t>(Level::kSpecies)] = tape.constant(species);
  const FusionOutput out = fuse(tape, f, x, Binding::kFrozen);
  FusionResult result;
  result.fused = out.fused.value();
  const auto& wf = out.weights[static_cast<std::size_t>(Level::kFamily)].value();
  const auto& wg = out.weights[static_cast<std::size_t>(Level::kGenus)].value();
  const auto& ws = out.weights[static_cast<std::size_t>(Level::kSpecies)].value();
  for (std::size_t i = 0; i < wf.size(); ++i) result.weights.push_back({wf[i], wg[i], ws[i]});
  return result;
}

Tensor fuse_baseline(const Tensor& family, const Tensor& genus, const Tensor& species) {
  Tape tape;
  return fuse_baseline(tape.constant(family), tape.constant(genus), tape.constant(species))
      .value();
}

std::pair<Tensor, Tensor> discriminate(const DiscriminatorNet& d, const Tensor& x) {
  Tape tape;
  const Critique c = discriminate(tape, d, tape.constant(x), Binding::kFrozen);
  return {c.realness.value(), c.logits.value()};
}

Tensor synthesize(const MkfnetModel& model, const Tensor& semantic, const Tensor& noise) {
  Tape tape;
  return synthesize(tape, model, tape.constant(semantic), tape.constant(noise), Binding::kFrozen,
                    Binding::kFrozen)
      .fused.value();
}

Tensor sample_noise(std::size_t rows, std::size_t noise_dim, Rng& rng) {
  Tensor z = Tensor::zeros({rows, noise_dim});
  for (double& v : z.data()) v = rng.normal();
  return z;
}

Tensor gather_centers(const VisualCenters& centers, std::span<const int> labels) {
  if (labels.empty()) throw ShapeError("gather_centers: empty label list");
  const std::size_t dim = centers.at(labels[0]).size();
  Tensor out = Tensor::zeros({labels.size(), dim});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& c = centers.at(labels[i]);
    std::copy(c.begin(), c.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return out;
}

Var loss_kr(Var generated, const VisualCenters& centers, std::span<const int> labels) {
  if (labels.size() != generated.value().rows()) {
    throw ShapeError("loss_kr: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(generated.value().rows()) + " rows");
  }
  const Var target = generated.tape->constant(gather_centers(centers, labels));
  return mean(l2_squared_distance(generated, target));
}

Tensor species_targets(const MkfnetModel& model, std::span<const int> species_ids) {
  std::vector<int> index;
  index.reserve(species_ids.size());
  for (int id : species_ids) index.push_back(model.class_index(id));
  return one_hot(index, model.seen_class_count());
}

Var adversarial_class_loss(Tape& tape, const MkfnetModel& model, Var x, const Tensor& targets) {
  const Critique c = discriminate(tape, model.discriminator(), x, Binding::kFrozen);
  return -mean(c.realness) + cross_entropy_with_logits(c.logits, targets);
}

GeneratorLoss loss_generator(Tape& tape, const MkfnetModel& model, Var generated,
                             const Tensor& targets, Var kr) {
  const Critique c = discriminate(tape, model.discriminator(), generated, Binding::kFrozen);
  GeneratorLoss out;
  out.adversarial = -mean(c.realness);
  out.classification = cross_entropy_with_logits(c.logits, targets);
  out.kr = kr;
  out.total = out.adversarial + out.classification + kr;
  return out;
}

DiscriminatorLoss loss_discriminator(Tape& tape, const MkfnetModel& model, Var real, Var fake,
                                     const Tensor& targets) {
  if (real.value().cols() != fake.value().cols()) {
    throw ShapeError("loss_discriminator: real " + to_string(real.value().shape()) +
                     " and fake " + to_string(fake.value().shape()) + " differ in width");
  }
  const Critique on_real = discriminate(tape, model.discriminator(), real, Binding::kTrainable);
  const Critique on_fake = discriminate(tape, model.discriminator(), fake, Binding::kTrainable);
  DiscriminatorLoss out;
  out.wasserstein = mean(on_fake.realness) - mean(on_real.realness);
  out.classification = cross_entropy_with_logits(on_real.logits, targets);
  out.total = out.wasserstein + out.classification;
  return out;
}

FusionLoss loss_fusion(Tape& tape, const MkfnetModel& model, Var fused, const Tensor& targets,
                       std::optional<Var> enhanced, std::optional<Var> novel) {
  const Critique c = discriminate(tape, model.discriminator(), fused, Binding::kFrozen);
  FusionLoss out;
  out.adversarial = -mean(c.realness);
  out.classification = cross_entropy_with_logits(c.logits, targets);
  out.enhanced = enhanced;
  out.novel = novel;
  out.total = out.adversarial + out.classification;
  if (enhanced) out.total = out.total + *enhanced;
  if (novel) out.total = out.total + *novel;
  return out;
}

Var loss_enhanced(Tape& tape, const MkfnetModel& model, Var fused, const Tensor& targets) {
  return adversarial_class_loss(tape, model, fused, targets);
}

Var loss_novel(Tape& tape, const MkfnetModel& model, Var fused, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("loss_novel: lambda must be non-negative");
  const Critique c = discriminate(tape, model.discriminator(), fused, Binding::kFrozen);
  const std::size_t n = c.logits.value().rows();
  const std::size_t k = c.logits.value().cols();
  const Var uniform = tape.constant(Tensor::full({n, k}, 1.0 / static_cast<double>(k)));
  const Var spread = mean(row_sum(square(softmax_rows(c.logits) - uniform)));
  return mean(c.realness) + lambda * spread;
}

}  // namespace mkfusion
