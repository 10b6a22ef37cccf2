#include "mkfusion/checkpoint.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "json_fields.hpp"

namespace mkfusion {

using detail::field;
using detail::get_as;
using detail::Json;
using detail::real_array;

namespace {

constexpr const char* kFormat = "mkfusion-checkpoint";

Json config_json(const TrainConfig& c) {
  return Json{{"steps", c.steps},
              {"n-nfg", c.n_nfg},
              {"kappa1", c.kappa1},
              {"kappa2", c.kappa2},
              {"lambda", c.lambda},
              {"batch-size", c.batch_size},
              {"lr", c.learning_rate},
              {"noise-dim", c.noise_dim},
              {"clip", c.clip},
              {"seed", c.seed},
              {"offspring", c.offspring},
              {"gen-hidden", c.generator_hidden},
              {"disc-hidden1", c.discriminator_hidden1},
              {"disc-hidden2", c.discriminator_hidden2},
              {"fusion-hidden", c.fusion_hidden},
              {"fusion", std::string(fusion_mode_name(c.fusion))}};
}

template <typename T>
void read_key(const Json& obj, const char* key, T& out, const std::string& path) {
  if (obj.contains(key)) out = get_as<T>(obj.at(key), path + "." + key);
}

TrainConfig apply_config(const Json& obj, TrainConfig c, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected object");
  static const std::set<std::string> known = {
      "steps", "n-nfg", "kappa1", "kappa2", "lambda", "batch-size", "lr", "noise-dim",
      "clip", "seed", "offspring", "gen-hidden", "disc-hidden1", "disc-hidden2",
      "fusion-hidden", "fusion"};
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ParseError(path + ": unknown key '" + key + "'");
  }
  read_key(obj, "steps", c.steps, path);
  read_key(obj, "n-nfg", c.n_nfg, path);
  read_key(obj, "kappa1", c.kappa1, path);
  read_key(obj, "kappa2", c.kappa2, path);
  read_key(obj, "lambda", c.lambda, path);
  read_key(obj, "batch-size", c.batch_size, path);
  read_key(obj, "lr", c.learning_rate, path);
  read_key(obj, "noise-dim", c.noise_dim, path);
  read_key(obj, "clip", c.clip, path);
  read_key(obj, "seed", c.seed, path);
  read_key(obj, "offspring", c.offspring, path);
  read_key(obj, "gen-hidden", c.generator_hidden, path);
  read_key(obj, "disc-hidden1", c.discriminator_hidden1, path);
  read_key(obj, "disc-hidden2", c.discriminator_hidden2, path);
  read_key(obj, "fusion-hidden", c.fusion_hidden, path);
  if (obj.contains("fusion")) {
    try {
      c.fusion = parse_fusion_mode(get_as<std::string>(obj.at("fusion"), path + ".fusion"));
    } catch (const std::invalid_argument& e) {
      throw ParseError(path + ".fusion: " + e.what());
    }
  }
  return c;
}

Json tensor_json(const Tensor& t) { return Json{{"shape", t.shape()}, {"data", t.values()}}; }

Tensor tensor_from(const Json& j, const std::string& path) {
  const auto shape = get_as<Shape>(field(j, "shape", path), path + ".shape");
  auto data = real_array(field(j, "data", path), path + ".data");
  try {
    return Tensor(shape, std::move(data));
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
}

Json adam_json(const AdamState& s) {
  return Json{{"lr", s.config.learning_rate}, {"beta1", s.config.beta1},
              {"beta2", s.config.beta2},      {"epsilon", s.config.epsilon},
              {"step", s.step},               {"first_moment", s.first_moment},
              {"second_moment", s.second_moment}};
}

AdamState adam_from(const Json& j, const std::string& path) {
  AdamState s;
  s.config.learning_rate = get_as<double>(field(j, "lr", path), path + ".lr");
  s.config.beta1 = get_as<double>(field(j, "beta1", path), path + ".beta1");
  s.config.beta2 = get_as<double>(field(j, "beta2", path), path + ".beta2");
  s.config.epsilon = get_as<double>(field(j, "epsilon", path), path + ".epsilon");
  s.step = get_as<std::uint64_t>(field(j, "step", path), path + ".step");
  s.first_moment =
      get_as<std::vector<std::vector<double>>>(field(j, "first_moment", path), path + ".first_moment");
  s.second_moment = get_as<std::vector<std::vector<double>>>(field(j, "second_moment", path),
                                                             path + ".second_moment");
  if (s.first_moment.size() != s.second_moment.size()) {
    throw ParseError(path + ": moment lists differ in length");
  }
  return s;
}

Json record_json(const LoopRecord& r) {
  return Json{{"loop", r.loop},   {"l_d", r.l_d},
              {"l_g_species", r.l_g_species}, {"l_g_genus", r.l_g_genus},
              {"l_g_family", r.l_g_family},   {"l_fm", r.l_fm},
              {"l_er", r.l_er},   {"l_nr", r.l_nr},
              {"enhanced_size", r.enhanced_size}, {"novel_size", r.novel_size},
              {"seconds", r.seconds}};
}

LoopRecord record_from(const Json& j, const std::string& path) {
  LoopRecord r;
  r.loop = get_as<int>(field(j, "loop", path), path + ".loop");
  r.l_d = get_as<double>(field(j, "l_d", path), path + ".l_d");
  r.l_g_species = get_as<double>(field(j, "l_g_species", path), path + ".l_g_species");
  r.l_g_genus = get_as<double>(field(j, "l_g_genus", path), path + ".l_g_genus");
  r.l_g_family = get_as<double>(field(j, "l_g_family", path), path + ".l_g_family");
  r.l_fm = get_as<double>(field(j, "l_fm", path), path + ".l_fm");
  r.l_er = get_as<double>(field(j, "l_er", path), path + ".l_er");
  r.l_nr = get_as<double>(field(j, "l_nr", path), path + ".l_nr");
  r.enhanced_size = get_as<std::size_t>(field(j, "enhanced_size", path), path + ".enhanced_size");
  r.novel_size = get_as<std::size_t>(field(j, "novel_size", path), path + ".novel_size");
  r.seconds = get_as<double>(field(j, "seconds", path), path + ".seconds");
  return r;
}

Json pools_json(const Pools& pools) {
  Json out = Json::object();
  for (const auto& [key, list] : pools.enhanced.entries) {
    if (list.empty()) continue;
    const std::size_t dim = list.front().size();
    std::vector<double> flat;
    for (const auto& v : list) flat.insert(flat.end(), v.begin(), v.end());
    out["enhanced/" + std::string(level_name(key.level)) + "/" + std::to_string(key.class_id)] =
        tensor_json(Tensor({list.size(), dim}, std::move(flat)));
  }
  for (std::size_t i = 0; i < pools.novel.entries.size(); ++i) {
    const auto& v = pools.novel.entries[i];
    out["novel/" + std::to_string(i)] = tensor_json(Tensor({v.size()}, v));
  }
  return out;
}

int parse_int(std::string_view s, const std::string& path) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(path + ": bad integer '" + std::string(s) + "'");
  }
  return value;
}

Pools pools_from(const Json& j) {
  if (!j.is_object()) throw ParseError("pools: expected object");
  Pools pools;
  std::map<int, std::vector<double>> novel;
  for (const auto& [key, value] : j.items()) {
    const std::string path = "pools." + key;
    const Tensor t = tensor_from(value, path);
    if (key.starts_with("enhanced/")) {
      const std::string rest = key.substr(9);
      const auto slash = rest.find('/');
      if (slash == std::string::npos) throw ParseError(path + ": malformed key");
      PoolKey pk;
      try {
        pk.level = parse_level(rest.substr(0, slash));
      } catch (const std::invalid_argument& e) {
        throw ParseError(path + ": " + e.what());
      }
      pk.class_id = parse_int(rest.substr(slash + 1), path);
      if (t.rank() != 2) throw ParseError(path + ": expected rank-2 tensor");
      for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto row = t.row(r);
        pools.enhanced.add(pk, std::vector<double>(row.begin(), row.end()));
      }
    } else if (key.starts_with("novel/")) {
      if (t.rank() != 1) throw ParseError(path + ": expected rank-1 tensor");
      const int index = parse_int(std::string_view(key).substr(6), path);
      novel[index] = t.values();
    } else {
      throw ParseError(path + ": unknown pool key");
    }
  }
  int expected = 0;
  for (auto& [index, v] : novel) {
    if (index != expected++) throw ParseError("pools: novel indices are not contiguous");
    pools.novel.add(std::move(v));
  }
  return pools;
}

}  // namespace

std::string checkpoint_to_json(const TrainerSnapshot& s) {
  Json doc;
  doc["format"] = kFormat;
  doc["version"] = kCheckpointVersion;
  doc["config"] = config_json(s.config);
  const ModelConfig& mc = s.model.config();
  doc["model"] = {{"dims", {{"visual", mc.dims.visual}, {"semantic", mc.dims.semantic}}},
                  {"seen_species", s.model.seen_species()}};
  Json params = Json::object();
  MkfnetModel copy = s.model;
  for (const auto& [name, tensor] : copy.named_parameters()) params[name] = tensor_json(*tensor);
  doc["params"] = std::move(params);
  doc["optimizers"] = {{"discriminator", adam_json(s.optimizers.discriminator)},
                       {"generators", adam_json(s.optimizers.generators)},
                       {"fusion", adam_json(s.optimizers.fusion)}};
  doc["rng"] = {{"batch", s.batch_rng_state}, {"nfg", s.nfg_rng_state}};
  doc["progress"] = {{"loop", s.loop},
                     {"discriminator_updates", s.discriminator_updates},
                     {"generator_updates", s.generator_updates}};
  Json report = Json::array();
  for (const auto& r : s.report.records) report.push_back(record_json(r));
  doc["report"] = std::move(report);
  doc["pools"] = pools_json(s.pools);
  return doc.dump() + "\n";
}

TrainerSnapshot checkpoint_from_json(const std::string& text) {
  const Json doc = detail::parse_json(text, "checkpoint");
  if (get_as<std::string>(field(doc, "format"), "format") != kFormat) {
    throw ParseError("not a checkpoint file");
  }
  const int version = get_as<int>(field(doc, "version"), "version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  TrainerSnapshot s;
  s.config = apply_config(field(doc, "config"), TrainConfig{}, "config");

  const Json& model = field(doc, "model");
  const Json& dims = field(model, "dims", "model");
  Dims d;
  d.visual = get_as<std::size_t>(field(dims, "visual", "model.dims"), "model.dims.visual");
  d.semantic = get_as<std::size_t>(field(dims, "semantic", "model.dims"), "model.dims.semantic");
  auto seen = get_as<std::vector<int>>(field(model, "seen_species", "model"), "model.seen_species");
  try {
    s.model = MkfnetModel(model_config(s.config, d), std::move(seen), 0);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  const Json& params = field(doc, "params");
  auto named = s.model.named_parameters();
  if (!params.is_object() || params.size() != named.size()) {
    throw ParseError("params: expected " + std::to_string(named.size()) + " tensors");
  }
  for (auto& [name, tensor] : named) {
    Tensor loaded = tensor_from(field(params, name, "params"), "params." + name);
    if (loaded.shape() != tensor->shape()) {
      throw ParseError("params." + name + ": shape " + to_string(loaded.shape()) +
                       " does not match " + to_string(tensor->shape()));
    }
    *tensor = std::move(loaded);
  }

  const Json& opt = field(doc, "optimizers");
  s.optimizers.discriminator =
      adam_from(field(opt, "discriminator", "optimizers"), "optimizers.discriminator");
  s.optimizers.generators = adam_from(field(opt, "generators", "optimizers"), "optimizers.generators");
  s.optimizers.fusion = adam_from(field(opt, "fusion", "optimizers"), "optimizers.fusion");

  const Json& rng = field(doc, "rng");
  s.batch_rng_state = get_as<std::string>(field(rng, "batch", "rng"), "rng.batch");
  s.nfg_rng_state = get_as<std::string>(field(rng, "nfg", "rng"), "rng.nfg");
  try {
    Rng probe(0);
    probe.set_state(s.batch_rng_state);
    probe.set_state(s.nfg_rng_state);
  } catch (const std::exception& e) {
    throw ParseError(std::string("rng: ") + e.what());
  }

  const Json& progress = field(doc, "progress");
  s.loop = get_as<int>(field(progress, "loop", "progress"), "progress.loop");
  s.discriminator_updates = get_as<std::uint64_t>(
      field(progress, "discriminator_updates", "progress"), "progress.discriminator_updates");
  s.generator_updates = get_as<std::uint64_t>(field(progress, "generator_updates", "progress"),
                                              "progress.generator_updates");

  const Json& report = field(doc, "report");
  if (!report.is_array()) throw ParseError("report: expected array");
  for (std::size_t i = 0; i < report.size(); ++i) {
    s.report.records.push_back(record_from(report[i], "report[" + std::to_string(i) + "]"));
  }
  s.pools = pools_from(field(doc, "pools"));
  return s;
}

void save_checkpoint(const TrainerSnapshot& snapshot, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_json(snapshot));
}

TrainerSnapshot load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_file(path));
}

std::string train_config_to_json(const TrainConfig& config) {
  return config_json(config).dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text, TrainConfig base) {
  return apply_config(detail::parse_json(text, "config"), base, "config");
}

}  // namespace mkfusion
