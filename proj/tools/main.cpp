#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "mkfusion/files.hpp"

namespace {

using Json = nlohmann::json;

// --config documents are one flat JSON object whose keys are long flag names.
// CLI11 only reads config files on the top-level app, so subcommands apply
// them here after parsing; options already given on the command line win.
void apply_config(CLI::App* app, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config file " + path + ": expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (opt == nullptr || !opt->get_configurable()) {
      throw std::invalid_argument("config file " + path + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_number()) {
      text = value.dump();
    } else {
      throw std::invalid_argument("config file " + path + ": key '" + key + "' must be a scalar");
    }
    try {
      opt->add_result(text);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw std::invalid_argument("config file " + path + ": " + key + ": " + e.what());
    }
  }
}

// Seed precedence: flag, then --config, then MKFUSION_SEED, then the default.
void seed_fallback(const CLI::Option* opt, std::uint64_t& seed) {
  if (opt->count() > 0) return;
  if (const char* env = std::getenv("MKFUSION_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("MKFUSION_SEED is not an unsigned integer: ") + env);
    }
  }
}

CLI::App* with_config(CLI::App* app, std::string& path) {
  app->add_option("--config", path, "JSON file with flag values (flags given on the command line win)")
      ->configurable(false)
      ->check(CLI::ExistingFile);
  return app;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mkfusion;
  using namespace mkfusion::cli;

  CLI::App app{"Hierarchical generative zero-shot learning toolkit", "mkfusion"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  std::string config_path;

  GenDataArgs gen;
  auto* gen_cmd = with_config(app.add_subcommand("gen-data", "Write a synthetic hierarchical dataset"), config_path);
  gen_cmd->add_option("--families", gen.spec.families, "Number of families")->capture_default_str();
  gen_cmd->add_option("--genera", gen.spec.genera_per_family, "Genera per family")->capture_default_str();
  gen_cmd->add_option("--species", gen.spec.species_per_genus, "Species per genus")->capture_default_str();
  gen_cmd->add_option("--samples", gen.spec.samples_per_species, "Samples per species")->capture_default_str();
  gen_cmd->add_option("--vis-dim", gen.spec.visual_dim, "Visual feature dimension")->capture_default_str();
  gen_cmd->add_option("--sem-dim", gen.spec.semantic_dim, "Semantic feature dimension")->capture_default_str();
  gen_cmd->add_option("--unseen-frac", gen.spec.unseen_fraction, "Fraction of unseen species")->capture_default_str();
  auto* gen_seed = gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Dataset JSON path")->required();

  TrainArgs train;
  auto* train_cmd = with_config(app.add_subcommand("train", "Train the model on a dataset"), config_path);
  train_cmd->add_option("--data", train.data, "Dataset JSON path")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  auto* steps = train_cmd->add_option("--steps", train.config.steps, "Outer training loops")->capture_default_str();
  std::vector<CLI::Option*> fixed_on_resume;
  fixed_on_resume.push_back(train_cmd->add_option("--n-nfg", train.config.n_nfg, "Loop after which feature generation starts")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--kappa1", train.config.kappa1, "Enhanced-pool stability threshold")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--kappa2", train.config.kappa2, "Novel-pool stability threshold")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--lambda", train.config.lambda, "Novel regularizer weight")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--batch-size", train.config.batch_size, "Minibatch size")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--lr", train.config.learning_rate, "Adam learning rate")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--noise-dim", train.config.noise_dim, "Noise dimension")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--clip", train.config.clip, "Critic weight clip")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--offspring", train.config.offspring, "Offspring per feature-generation round")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--gen-hidden", train.config.generator_hidden, "Generator hidden width")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--disc-hidden1", train.config.discriminator_hidden1, "Discriminator first hidden width")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--disc-hidden2", train.config.discriminator_hidden2, "Discriminator second hidden width")->capture_default_str());
  fixed_on_resume.push_back(train_cmd->add_option("--fusion-hidden", train.config.fusion_hidden, "Fusion branch hidden width")->capture_default_str());
  std::string fusion = "adaptive";
  fixed_on_resume.push_back(train_cmd->add_option("--fusion", fusion, "Fusion mode")->check(CLI::IsMember({"adaptive", "summing"}))->capture_default_str());
  auto* train_seed = train_cmd->add_option("--seed", train.config.seed, "Random seed")->capture_default_str();
  fixed_on_resume.push_back(train_seed);
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_flag("--record-time", train.record_time, "Write per-loop wall time into the report");

  EvalArgs eval;
  auto* eval_cmd = with_config(app.add_subcommand("eval", "Evaluate a checkpoint"), config_path);
  eval_cmd->add_option("--data", eval.data, "Dataset JSON path")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval.out, "Output directory")->required();
  eval_cmd->add_option("--n-syn", eval.options.n_syn, "Synthesized features per class")->capture_default_str()->check(CLI::PositiveNumber);
  std::string mode = "gzsl";
  eval_cmd->add_option("--mode", mode, "zsl or gzsl")->check(CLI::IsMember({"zsl", "gzsl"}))->capture_default_str();
  eval_cmd->add_option("--k", eval.options.k, "Retrieval depth")->capture_default_str()->check(CLI::PositiveNumber);
  auto* eval_seed = eval_cmd->add_option("--seed", eval.options.seed, "Prototype noise seed")->capture_default_str();
  eval_cmd->add_flag("--svg", eval.svg, "Also write the curve as SVG");

  RetrieveArgs retrieve;
  auto* retrieve_cmd = with_config(app.add_subcommand("retrieve", "Rank samples against a class prototype"), config_path);
  retrieve_cmd->add_option("--data", retrieve.data, "Dataset JSON path")->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--checkpoint", retrieve.checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--class", retrieve.class_id, "Species id")->required();
  retrieve_cmd->add_option("--k", retrieve.k, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  retrieve_cmd->add_option("--n-syn", retrieve.n_syn, "Synthesized features for the prototype")->capture_default_str()->check(CLI::PositiveNumber);
  auto* retrieve_seed = retrieve_cmd->add_option("--seed", retrieve.seed, "Prototype noise seed")->capture_default_str();
  retrieve_cmd->add_option("--out", retrieve.out, "Ranking CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) apply_config(sub, config_path);
    if (gen_cmd->parsed()) {
      seed_fallback(gen_seed, gen.seed);
      run_gen_data(gen);
    } else if (train_cmd->parsed()) {
      seed_fallback(train_seed, train.config.seed);
      train.config.fusion = parse_fusion_mode(fusion);
      if (!train.resume.empty()) {
        for (const CLI::Option* opt : fixed_on_resume) {
          if (opt->count() > 0) {
            throw std::invalid_argument(opt->get_name() +
                                        " cannot change when resuming; it comes from the checkpoint");
          }
        }
        if (steps->count() == 0) {
          throw std::invalid_argument("--steps is required with --resume");
        }
      }
      validate(train.config);
      run_train(train);
    } else if (eval_cmd->parsed()) {
      seed_fallback(eval_seed, eval.options.seed);
      eval.options.mode = parse_eval_mode(mode);
      run_eval(eval);
    } else if (retrieve_cmd->parsed()) {
      seed_fallback(retrieve_seed, retrieve.seed);
      run_retrieve(retrieve);
    }
  } catch (const std::exception& e) {
    std::cerr << "mkfusion: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
