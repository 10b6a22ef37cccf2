#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mkfusion/adam.hpp"
#include "mkfusion/model.hpp"
#include "mkfusion/nfg.hpp"
#include "mkfusion/rng.hpp"
#include "mkfusion/taxonomy.hpp"

namespace mkfusion {

inline constexpr int kCriticStepsPerLoop = 5;

struct TrainConfig {
  int steps = 300;    // outer loops
  int n_nfg = 3;      // NFG runs on loops with index > n_nfg
  double kappa1 = 0.8;
  double kappa2 = 0.2;
  double lambda = 1.0;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::size_t noise_dim = 32;
  double clip = 0.01;
  std::uint64_t seed = 1;
  std::size_t offspring = 64;
  std::size_t generator_hidden = 256;
  std::size_t discriminator_hidden1 = 256;
  std::size_t discriminator_hidden2 = 128;
  std::size_t fusion_hidden = 64;
  FusionMode fusion = FusionMode::kAdaptive;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& config);
ModelConfig model_config(const TrainConfig& config, Dims dims);

struct LoopRecord {
  int loop = 0;
  double l_d = 0.0;  // mean over the loop's critic updates
  double l_g_species = 0.0;
  double l_g_genus = 0.0;
  double l_g_family = 0.0;
  double l_fm = 0.0;
  double l_er = 0.0;
  double l_nr = 0.0;
  std::size_t enhanced_size = 0;
  std::size_t novel_size = 0;
  double seconds = 0.0;

  friend bool operator==(const LoopRecord&, const LoopRecord&) = default;
};

struct TrainReport {
  std::vector<LoopRecord> records;

  // Wall time varies run to run; without timing the seconds column is 0 and
  // the CSV is a deterministic function of config and data.
  std::string to_csv(bool with_timing) const;
};

struct OptimizerStates {
  AdamState discriminator;
  AdamState generators;
  AdamState fusion;
};

// Everything needed to continue a run bit-for-bit.
struct TrainerSnapshot {
  TrainConfig config;
  MkfnetModel model;
  Pools pools;
  OptimizerStates optimizers;
  std::string batch_rng_state;
  std::string nfg_rng_state;
  int loop = 0;
  std::uint64_t discriminator_updates = 0;
  std::uint64_t generator_updates = 0;
  TrainReport report;
};

// Runs the MKFNet schedule: per outer loop an optional NFG round, exactly
// kCriticStepsPerLoop discriminator updates, then one generator update
// (from the three generator losses) and one fusion update (fusion loss).
// Data is read through the source only while constructing.
class Trainer {
 public:
  Trainer(const TrainConfig& config, const SampleSource& source);
  Trainer(TrainerSnapshot snapshot, const SampleSource& source);

  void run_loop();
  // Continues until config.steps loops have run.
  void run();

  int loop() const { return loop_; }
  bool finished() const { return loop_ >= config_.steps; }
  std::uint64_t discriminator_updates() const { return discriminator_updates_; }
  std::uint64_t generator_updates() const { return generator_updates_; }

  const TrainConfig& config() const { return config_; }
  const MkfnetModel& model() const { return model_; }
  const Pools& pools() const { return pools_; }
  const TrainReport& report() const { return report_; }
  const KnowledgeDatasets& datasets() const { return datasets_; }
  const std::array<VisualCenters, 3>& centers() const { return centers_; }

  TrainerSnapshot snapshot() const;

 private:
  void prepare(const SampleSource& source);
  std::vector<std::size_t> sample_batch();
  double discriminator_step();
  void generator_fusion_step(LoopRecord& record);

  TrainConfig config_;
  KnowledgeDatasets datasets_;
  std::array<VisualCenters, 3> centers_;
  ClassIndex index_;
  MkfnetModel model_;
  Pools pools_;
  OptimizerStates optimizers_;
  Rng batch_rng_;
  Rng nfg_rng_;
  int loop_ = 0;
  std::uint64_t discriminator_updates_ = 0;
  std::uint64_t generator_updates_ = 0;
  TrainReport report_;
};

struct TrainResult {
  MkfnetModel model;
  Pools pools;
  TrainReport report;
};

TrainResult train(const TrainConfig& config, const SampleSource& source);
TrainResult train(const TrainConfig& config, const DatasetBundle& bundle);

}  // namespace mkfusion
