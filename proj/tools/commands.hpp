#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mkfusion/eval.hpp"
#include "mkfusion/synthetic.hpp"
#include "mkfusion/trainer.hpp"

namespace mkfusion::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct GenDataArgs {
  SyntheticSpec spec;
  std::uint64_t seed = 1;
  std::filesystem::path out;
};

struct TrainArgs {
  TrainConfig config;
  std::filesystem::path data;
  std::filesystem::path out;  // directory
  std::filesystem::path resume;
  bool record_time = false;
};

struct EvalArgs {
  EvalOptions options;
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path out;  // directory
  bool svg = false;
};

struct RetrieveArgs {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  int class_id = 0;
  std::size_t k = kDefaultRetrievalK;
  std::size_t n_syn = kDefaultSyntheticPerClass;
  std::uint64_t seed = 1;
};

void run_gen_data(const GenDataArgs& args);
void run_train(const TrainArgs& args);
void run_eval(const EvalArgs& args);
void run_retrieve(const RetrieveArgs& args);

}  // namespace mkfusion::cli
