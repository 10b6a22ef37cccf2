#include "commands.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <stdexcept>

#include <json.hpp>

#include "mkfusion/bundle_io.hpp"
#include "mkfusion/checkpoint.hpp"
#include "mkfusion/files.hpp"

namespace mkfusion::cli {
namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// Provenance record written next to each command's outputs.
class RunManifest {
 public:
  RunManifest(std::string command, Json config, std::uint64_t seed)
      : command_(std::move(command)), config_(std::move(config)), seed_(seed),
        started_(timestamp()) {}

  void input(const std::string& name, const fs::path& path) { inputs_[name] = path.string(); }
  void output(const std::string& name, const fs::path& path) { outputs_[name] = path.string(); }

  void write(const fs::path& path) const {
    Json doc{{"command", command_}, {"config", config_},   {"seed", seed_},
             {"inputs", inputs_},   {"outputs", outputs_}, {"version", kToolVersion},
             {"started", started_}, {"finished", timestamp()}};
    write_file_atomic(path, doc.dump(2) + "\n");
  }

 private:
  std::string command_;
  Json config_;
  std::uint64_t seed_;
  Json inputs_ = Json::object();
  Json outputs_ = Json::object();
  std::string started_;
};

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

MkfnetModel load_model(const fs::path& checkpoint) { return load_checkpoint(checkpoint).model; }

}  // namespace

void run_gen_data(const GenDataArgs& args) {
  RunManifest manifest("gen-data",
                       Json{{"families", args.spec.families},
                            {"genera", args.spec.genera_per_family},
                            {"species", args.spec.species_per_genus},
                            {"samples", args.spec.samples_per_species},
                            {"vis-dim", args.spec.visual_dim},
                            {"sem-dim", args.spec.semantic_dim},
                            {"unseen-frac", args.spec.unseen_fraction},
                            {"seed", args.seed}},
                       args.seed);
  const DatasetBundle bundle = generate_synthetic(args.spec, args.seed);
  save_bundle(bundle, args.out);
  manifest.output("dataset", args.out);
  manifest.write(sidecar(args.out));
}

void run_train(const TrainArgs& args) {
  const DatasetBundle bundle = load_bundle(args.data);
  const BundleSource source(bundle);
  std::optional<Trainer> trainer;
  if (!args.resume.empty()) {
    TrainerSnapshot snapshot = load_checkpoint(args.resume);
    snapshot.config.steps = args.config.steps;
    trainer.emplace(std::move(snapshot), source);
  } else {
    trainer.emplace(args.config, source);
  }
  RunManifest manifest("train", Json::parse(train_config_to_json(trainer->config())),
                       trainer->config().seed);
  manifest.input("dataset", args.data);
  if (!args.resume.empty()) manifest.input("resume", args.resume);

  trainer->run();

  TrainerSnapshot snapshot = trainer->snapshot();
  if (!args.record_time) {
    for (auto& r : snapshot.report.records) r.seconds = 0.0;
  }
  const fs::path checkpoint = args.out / "checkpoint.json";
  const fs::path report = args.out / "report.csv";
  save_checkpoint(snapshot, checkpoint);
  write_file_atomic(report, snapshot.report.to_csv(args.record_time));
  manifest.output("checkpoint", checkpoint);
  manifest.output("report", report);
  manifest.write(args.out / "manifest.json");
}

void run_eval(const EvalArgs& args) {
  const DatasetBundle bundle = load_bundle(args.data);
  const MkfnetModel model = load_model(args.checkpoint);
  RunManifest manifest("eval",
                       Json{{"mode", std::string(eval_mode_name(args.options.mode))},
                            {"n-syn", args.options.n_syn},
                            {"k", args.options.k},
                            {"seed", args.options.seed}},
                       args.options.seed);
  manifest.input("dataset", args.data);
  manifest.input("checkpoint", args.checkpoint);

  const Metrics metrics = evaluate(model, bundle, args.options);
  const fs::path text = args.out / "metrics.txt";
  const fs::path csv = args.out / "metrics.csv";
  const fs::path per_class = args.out / "per_class.csv";
  write_file_atomic(text, metrics_text(metrics));
  write_file_atomic(csv, metrics_csv(metrics));
  write_file_atomic(per_class, per_class_csv(metrics));
  manifest.output("metrics", text);
  manifest.output("metrics_csv", csv);
  manifest.output("per_class", per_class);
  if (metrics.gzsl) {
    const fs::path curve = args.out / "curve.csv";
    write_file_atomic(curve, curve_csv(metrics.gzsl->curve));
    manifest.output("curve", curve);
    if (args.svg) {
      const fs::path svg = args.out / "curve.svg";
      write_file_atomic(svg, curve_svg(metrics.gzsl->curve));
      manifest.output("curve_svg", svg);
    }
  }
  manifest.write(args.out / "manifest.json");
}

void run_retrieve(const RetrieveArgs& args) {
  const DatasetBundle bundle = load_bundle(args.data);
  const MkfnetModel model = load_model(args.checkpoint);
  if (model.config().dims != bundle.dims) {
    throw std::invalid_argument("checkpoint dimensions do not match the dataset");
  }
  const ClassRecord* record = nullptr;
  for (const auto& c : bundle.classes) {
    if (c.species_id == args.class_id) record = &c;
  }
  if (record == nullptr || (!bundle.is_seen(args.class_id) && !bundle.is_unseen(args.class_id))) {
    throw std::invalid_argument("unknown class id " + std::to_string(args.class_id));
  }
  RunManifest manifest("retrieve",
                       Json{{"class", args.class_id},
                            {"k", args.k},
                            {"n-syn", args.n_syn},
                            {"seed", args.seed}},
                       args.seed);
  manifest.input("dataset", args.data);
  manifest.input("checkpoint", args.checkpoint);

  const ClassPrototypes prototypes =
      synthesize_prototypes(model, {{args.class_id, record->semantic}}, args.n_syn, args.seed);
  std::vector<std::vector<double>> pool;
  for (const auto& s : bundle.samples) pool.push_back(s.visual);
  std::string csv = "rank,sample_id,similarity\n";
  std::size_t rank = 1;
  for (const auto& r : retrieve_topk(prototypes, pool, args.class_id, args.k)) {
    csv += std::to_string(rank++) + "," + std::to_string(r.sample) + "," + num(r.similarity) + "\n";
  }
  write_file_atomic(args.out, csv);
  manifest.output("ranking", args.out);
  manifest.write(sidecar(args.out));
}

}  // namespace mkfusion::cli
