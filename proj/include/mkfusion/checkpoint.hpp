#pragma once

#include <filesystem>
#include <string>

#include "mkfusion/files.hpp"
#include "mkfusion/trainer.hpp"

namespace mkfusion {

inline constexpr int kCheckpointVersion = 1;

// Full trainer state as one JSON document. Parameters and pool entries are
// stored as {"shape", "data"}; pools are keyed enhanced/<level>/<class> and
// novel/<index>. Reals round-trip exactly.
std::string checkpoint_to_json(const TrainerSnapshot& snapshot);
// Version mismatch, truncation and structural damage raise ParseError.
TrainerSnapshot checkpoint_from_json(const std::string& text);

void save_checkpoint(const TrainerSnapshot& snapshot, const std::filesystem::path& path);
TrainerSnapshot load_checkpoint(const std::filesystem::path& path);

// Keys follow the CLI flag names (steps, n-nfg, kappa1, ...).
std::string train_config_to_json(const TrainConfig& config);
// Applies the keys present in `text` on top of `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text, TrainConfig base = {});

}  // namespace mkfusion
