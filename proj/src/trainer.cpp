#include "mkfusion/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <stdexcept>

namespace mkfusion {
namespace {

constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kNfgStream = 2;
constexpr std::uint64_t kModelStream = 3;

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

Tensor rows_of(const KnowledgeDataset& d, std::span<const std::size_t> idx, bool visual) {
  const std::size_t dim =
      visual ? d.entries.front().visual.size() : d.entries.front().semantic.size();
  Tensor out = Tensor::zeros({idx.size(), dim});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& src = visual ? d.entries[idx[i]].visual : d.entries[idx[i]].semantic;
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return out;
}

std::vector<int> labels_of(const KnowledgeDataset& d, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(d.entries[i].class_id);
  return out;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (c.n_nfg < 0) throw std::invalid_argument("n_nfg must be non-negative");
  validate(StabilityThresholds{c.kappa1, c.kappa2});
  if (c.lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  if (c.batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(c.clip > 0.0)) throw std::invalid_argument("clip constant must be positive");
  if (c.noise_dim < 1) throw std::invalid_argument("noise dimension must be at least 1");
  if (c.generator_hidden < 1 || c.discriminator_hidden1 < 1 || c.discriminator_hidden2 < 1 ||
      c.fusion_hidden < 1) {
    throw std::invalid_argument("hidden widths must be at least 1");
  }
}

ModelConfig model_config(const TrainConfig& c, Dims dims) {
  ModelConfig m;
  m.dims = dims;
  m.noise_dim = c.noise_dim;
  m.generator_hidden = c.generator_hidden;
  m.discriminator_hidden1 = c.discriminator_hidden1;
  m.discriminator_hidden2 = c.discriminator_hidden2;
  m.fusion_hidden = c.fusion_hidden;
  m.fusion = c.fusion;
  return m;
}

std::string TrainReport::to_csv(bool with_timing) const {
  std::string out =
      "loop,l_d,l_g_species,l_g_genus,l_g_family,l_fm,l_er,l_nr,enhanced_size,novel_size,"
      "seconds\n";
  for (const auto& r : records) {
    out += std::to_string(r.loop) + "," + format_real(r.l_d) + "," + format_real(r.l_g_species) +
           "," + format_real(r.l_g_genus) + "," + format_real(r.l_g_family) + "," +
           format_real(r.l_fm) + "," + format_real(r.l_er) + "," + format_real(r.l_nr) + "," +
           std::to_string(r.enhanced_size) + "," + std::to_string(r.novel_size) + "," +
           format_real(with_timing ? r.seconds : 0.0) + "\n";
  }
  return out;
}

Trainer::Trainer(const TrainConfig& config, const SampleSource& source)
    : config_(config),
      batch_rng_(derive_seed(config.seed, kBatchStream)),
      nfg_rng_(derive_seed(config.seed, kNfgStream)) {
  validate(config_);
  prepare(source);
  std::vector<int> seen = datasets_.species.class_ids;
  model_ = MkfnetModel(model_config(config_, source.dims()), std::move(seen),
                       derive_seed(config_.seed, kModelStream));
  for (AdamState* s : {&optimizers_.discriminator, &optimizers_.generators, &optimizers_.fusion}) {
    s->config.learning_rate = config_.learning_rate;
  }
}

Trainer::Trainer(TrainerSnapshot snapshot, const SampleSource& source)
    : config_(snapshot.config),
      model_(std::move(snapshot.model)),
      pools_(std::move(snapshot.pools)),
      optimizers_(std::move(snapshot.optimizers)),
      loop_(snapshot.loop),
      discriminator_updates_(snapshot.discriminator_updates),
      generator_updates_(snapshot.generator_updates),
      report_(std::move(snapshot.report)) {
  validate(config_);
  prepare(source);
  if (model_.seen_species() != datasets_.species.class_ids) {
    throw std::invalid_argument("snapshot seen classes do not match the dataset");
  }
  if (model_.config().dims != source.dims()) {
    throw std::invalid_argument("snapshot dimensions do not match the dataset");
  }
  batch_rng_.set_state(snapshot.batch_rng_state);
  nfg_rng_.set_state(snapshot.nfg_rng_state);
}

void Trainer::prepare(const SampleSource& source) {
  datasets_ = derive_knowledge_datasets(source);
  if (datasets_.species.entries.empty()) {
    throw std::invalid_argument("training requires at least one seen sample");
  }
  for (Level level : kLevels) {
    centers_[static_cast<std::size_t>(level)] = compute_visual_centers(datasets_.at(level));
  }
  index_ = ClassIndex(datasets_);
}

TrainerSnapshot Trainer::snapshot() const {
  TrainerSnapshot s;
  s.config = config_;
  s.model = model_;
  s.pools = pools_;
  s.optimizers = optimizers_;
  s.batch_rng_state = batch_rng_.state();
  s.nfg_rng_state = nfg_rng_.state();
  s.loop = loop_;
  s.discriminator_updates = discriminator_updates_;
  s.generator_updates = generator_updates_;
  s.report = report_;
  return s;
}

std::vector<std::size_t> Trainer::sample_batch() {
  std::vector<std::size_t> idx(config_.batch_size);
  for (auto& i : idx) i = batch_rng_.index(datasets_.species.entries.size());
  return idx;
}

double Trainer::discriminator_step() {
  const auto idx = sample_batch();
  const KnowledgeDataset& species = datasets_.species;
  const Tensor t = rows_of(species, idx, false);
  const Tensor z = sample_noise(idx.size(), config_.noise_dim, batch_rng_);
  const Tensor fake = synthesize(model_, t, z);
  const auto labels = labels_of(species, idx);

  Tape tape;
  const DiscriminatorLoss loss =
      loss_discriminator(tape, model_, tape.constant(rows_of(species, idx, true)),
                         tape.constant(fake), species_targets(model_, labels));
  auto params = model_.discriminator_parameters();
  zero_grads(params);
  tape.backward(loss.total);
  adam_step(params, optimizers_.discriminator);
  clip_weights(model_.critic_parameters(), config_.clip);
  ++discriminator_updates_;
  return loss.total.item();
}

void Trainer::generator_fusion_step(LoopRecord& record) {
  const auto idx = sample_batch();
  const KnowledgeDataset& species = datasets_.species;
  const Tensor z = sample_noise(idx.size(), config_.noise_dim, batch_rng_);
  const Tensor targets = species_targets(model_, labels_of(species, idx));

  Tape tape;
  const Synthesis syn = synthesize(tape, model_, tape.constant(rows_of(species, idx, false)),
                                   tape.constant(z), Binding::kTrainable, Binding::kTrainable);
  std::optional<Var> generator_total;
  for (Level level : kLevels) {
    const auto k = static_cast<std::size_t>(level);
    const auto labels = labels_of(datasets_.at(level), idx);
    const Var kr = loss_kr(syn.per_level[k], centers_[k], labels);
    const GeneratorLoss g = loss_generator(tape, model_, syn.per_level[k], targets, kr);
    generator_total = generator_total ? *generator_total + g.total : g.total;
    const double value = g.total.item();
    if (level == Level::kSpecies) record.l_g_species = value;
    if (level == Level::kGenus) record.l_g_genus = value;
    if (level == Level::kFamily) record.l_g_family = value;
  }
  const auto er = loss_er(tape, model_, index_, pools_.enhanced, config_.batch_size, nfg_rng_);
  const auto nr = loss_nr(tape, model_, pools_.novel, config_.lambda, config_.batch_size, nfg_rng_);
  const FusionLoss fm = loss_fusion(tape, model_, syn.fused, targets, er, nr);
  record.l_er = er ? er->item() : 0.0;
  record.l_nr = nr ? nr->item() : 0.0;
  record.l_fm = fm.total.item();

  auto generators = model_.generator_parameters();
  auto fusion = model_.fusion_parameters();
  zero_grads(generators);
  zero_grads(fusion);
  tape.backward(*generator_total);
  adam_step(generators, optimizers_.generators);
  if (model_.config().fusion == FusionMode::kAdaptive) {
    zero_grads(fusion);
    tape.backward(fm.total);
    adam_step(fusion, optimizers_.fusion);
  }
  zero_grads(generators);
  ++generator_updates_;
}

void Trainer::run_loop() {
  const auto start = std::chrono::steady_clock::now();
  const int loop = loop_ + 1;
  LoopRecord record;
  record.loop = loop;
  try {
    if (loop > config_.n_nfg && config_.offspring > 0) {
      run_nfg_round(model_, index_, centers_, StabilityThresholds{config_.kappa1, config_.kappa2},
                    config_.offspring, pools_, nfg_rng_);
    }
    double critic = 0.0;
    for (int j = 0; j < kCriticStepsPerLoop; ++j) critic += discriminator_step();
    record.l_d = critic / kCriticStepsPerLoop;
    generator_fusion_step(record);
  } catch (const NumericError& e) {
    throw NumericError("non-finite value in training loop " + std::to_string(loop) + ": " +
                       e.what());
  }
  record.enhanced_size = pools_.enhanced.size();
  record.novel_size = pools_.novel.size();
  record.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  loop_ = loop;
  report_.records.push_back(record);
}

void Trainer::run() {
  while (!finished()) run_loop();
}

TrainResult train(const TrainConfig& config, const SampleSource& source) {
  Trainer trainer(config, source);
  trainer.run();
  return {trainer.model(), trainer.pools(), trainer.report()};
}

TrainResult train(const TrainConfig& config, const DatasetBundle& bundle) {
  return train(config, BundleSource(bundle));
}

}  // namespace mkfusion
