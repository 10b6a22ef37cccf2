// Acceptance runner. One line per criterion: "[PASS] criterion N: ..." or
// "[FAIL] criterion N: ...". Exit status is nonzero if any selected check fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gradient_suite.hpp"
#include "mkfusion/checkpoint.hpp"
#include "mkfusion/eval.hpp"
#include "mkfusion/nfg.hpp"
#include "mkfusion/synthetic.hpp"
#include "mkfusion/trainer.hpp"

using namespace mkfusion;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << std::fixed << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

const DatasetBundle& default_bundle() {
  static const DatasetBundle b = generate_synthetic(SyntheticSpec{}, 1);
  return b;
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  Outcome out;
  const auto start = Clock::now();
  testing::GradientSuite suite(2024);
  Rng probe(77);
  std::size_t ops = 0;
  for (auto& c : suite.op_cases()) {
    const auto r = testing::gradcheck(c.build, c.params, c.coords, probe);
    out.require(r.failures == 0, c.name + " (" + r.first_failure + ")");
    ++ops;
  }
  double worst = 0.0, worst_abs = 0.0;
  std::string magnitudes;
  for (auto& c : suite.loss_cases(8, 200)) {
    const auto r = testing::gradcheck(c.build, c.params, c.coords, probe);
    out.require(r.failures == 0, c.name + " (" + r.first_failure + ")");
    out.require(r.checked >= 200, c.name + " checked only " + std::to_string(r.checked));
    out.require(r.largest_grad > 1e-3, c.name + " gradients are all near zero");
    worst = std::max(worst, r.worst_rel);
    worst_abs = std::max(worst_abs, r.worst_abs);
    magnitudes += (magnitudes.empty() ? "" : ", ") + c.name + " " + sci(r.largest_grad);
  }
  const double t = seconds_since(start);
  out.require(t < 30.0, "runtime " + fmt(t, 1) + " s >= 30 s");
  out.note(std::to_string(ops) + " ops + 5 losses x 200 coords, worst loss rel err " + sci(worst) +
           " (abs " + sci(worst_abs) + "), max |grad|: " + magnitudes + ", " + fmt(t, 1) + " s");
  return out;
}

Outcome fusion_weights() {
  Outcome out;
  ModelConfig c;
  c.dims = {8, 5};
  c.noise_dim = 4;
  c.fusion_hidden = 6;
  Rng rng(31);
  double worst = 0.0;
  bool open_interval = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const MkfnetModel m(c, {0}, static_cast<std::uint64_t>(trial));
    const double spread = rng.uniform(0.1, 20.0);
    const Tensor f = testing::random_tensor({1, 8}, rng, -spread, spread);
    const Tensor g = testing::random_tensor({1, 8}, rng, -spread, spread);
    const Tensor s = testing::random_tensor({1, 8}, rng, -spread, spread);
    const FusionWeights w = fuse(m.fusion(), f, g, s).weights.front();
    worst = std::max(worst, std::abs(w.family + w.genus + w.species - 1.0));
    for (double p : {w.family, w.genus, w.species}) open_interval = open_interval && p > 0.0 && p < 1.0;
  }
  out.require(worst <= 1e-9, "sum deviation " + sci(worst));
  out.require(open_interval, "weight outside (0,1)");

  MkfnetModel m(c, {0}, 1);
  for (Level level : kLevels) {
    for (double& v : m.fusion().branch(level).score.weight.data()) v = 0.0;
    m.fusion().branch(level).score.bias[0] = 0.7;
  }
  const Tensor f = testing::random_tensor({4, 8}, rng), g = testing::random_tensor({4, 8}, rng),
               s = testing::random_tensor({4, 8}, rng);
  const FusionResult r = fuse(m.fusion(), f, g, s);
  bool third = true;
  for (const auto& w : r.weights) {
    third = third && w.family == 1.0 / 3.0 && w.genus == 1.0 / 3.0 && w.species == 1.0 / 3.0;
  }
  out.require(third, "uniform scores did not give exactly 1/3");
  out.require(r.fused == fuse_baseline(f, g, s), "uniform fusion differs from the summing baseline");
  out.note("1000 inputs, max |sum-1| = " + sci(worst) + ", uniform case exact");
  return out;
}

Outcome genetic_operators() {
  Outcome out;
  Rng rng(41);
  std::size_t identities = 0, bad_mutation = 0, bad_crossover = 0, bad_count = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t dim = 1 + rng.index(24);
    std::vector<double> a(dim), b(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      a[j] = rng.uniform() < 0.3 ? 0.0 : rng.uniform(-3, 3);
      b[j] = rng.uniform(-3, 3);
    }
    const GeneticDraw d = draw_genetic(dim, rng);
    if (d.mutation_positions.size() != static_cast<std::size_t>(std::floor(dim * d.mutation_rate)) ||
        d.crossover_positions.size() != static_cast<std::size_t>(std::floor(dim * d.crossover_rate))) {
      ++bad_count;
    }
    Rng replay = rng;
    const auto child = mutate(a, d.mutation_positions, rng);
    std::vector<double> expect = a;
    for (std::size_t p : d.mutation_positions) {
      const double r = replay.uniform();
      expect[p] = a[p] != 0.0 ? a[p] * r : a[p] + r;
    }
    const std::set<std::size_t> drawn(d.mutation_positions.begin(), d.mutation_positions.end());
    for (std::size_t j = 0; j < dim; ++j) {
      if (child[j] != expect[j] || (!drawn.contains(j) && child[j] != a[j])) ++bad_mutation;
    }
    const auto mixed = crossover(a, b, d.crossover_positions);
    const std::set<std::size_t> swapped(d.crossover_positions.begin(), d.crossover_positions.end());
    for (std::size_t j = 0; j < dim; ++j) {
      if (mixed[j] != (swapped.contains(j) ? b[j] : a[j])) ++bad_crossover;
    }
    if (d.mutation_positions.empty()) {
      ++identities;
      if (child != a) ++bad_mutation;
    }
    if (d.crossover_positions.empty() && mixed != a) ++bad_crossover;
  }
  out.require(bad_count == 0, std::to_string(bad_count) + " draws with wrong position counts");
  out.require(bad_mutation == 0, std::to_string(bad_mutation) + " mutation violations");
  out.require(bad_crossover == 0, std::to_string(bad_crossover) + " crossover violations");
  out.require(identities > 0, "no zero-position draw exercised");
  out.note("10000 trials, " + std::to_string(identities) + " zero-position mutation draws");
  return out;
}

Outcome metric_oracles() {
  Outcome out;
  const double apy = harmonic_mean(94.0, 30.2);
  const double awa = harmonic_mean(92.9, 65.0);
  out.require(std::abs(apy - 45.7) <= 0.05, "aPY H = " + fmt(apy, 4) + " not within 0.05 of 45.7");
  out.require(std::abs(awa - 76.4) <= 0.05, "AwA1 H = " + fmt(awa, 4) + " not within 0.05 of 76.4");

  // Perfect one-hot oracle: two seen and two unseen classes.
  ScoreTable t;
  t.classes = {0, 1, 2, 3};
  t.seen_class = {true, true, false, false};
  auto one_hot = [](std::size_t k) {
    std::vector<double> v(4, 0.0);
    v[k] = 1.0;
    return v;
  };
  for (int i = 0; i < 6; ++i) t.seen_samples.push_back({i % 2, one_hot(static_cast<std::size_t>(i % 2))});
  for (int i = 0; i < 6; ++i) {
    t.unseen_samples.push_back({2 + i % 2, one_hot(static_cast<std::size_t>(2 + i % 2))});
  }
  const SeenUnseenCurve curve = seen_unseen_curve(t);
  const double area = ausuc(curve);
  out.require(std::abs(area - 1.0) <= 1e-9, "perfect-oracle AUSUC = " + fmt(area, 12));

  // Saturation on a trained-model score table.
  TrainConfig c;
  c.steps = 5;
  const TrainResult r = train(c, default_bundle());
  const SeenUnseenCurve real =
      seen_unseen_curve(score_table(synthesize_prototypes(r.model, [&] {
                                      std::map<int, std::vector<double>> sem;
                                      for (const auto& cls : default_bundle().classes) {
                                        sem[cls.species_id] = cls.semantic;
                                      }
                                      return sem;
                                    }(), 10, 1),
                                    default_bundle()));
  const bool saturated = curve.points.front().unseen == 0.0 && curve.points.back().seen == 0.0 &&
                         real.points.front().unseen == 0.0 && real.points.back().seen == 0.0;
  out.require(saturated, "gamma endpoints not saturated");
  out.note("H(aPY) = " + fmt(apy, 3) + ", H(AwA1) = " + fmt(awa, 3) + ", oracle AUSUC = " +
           fmt(area, 12) + ", endpoints U=0 at gamma " + fmt(real.points.front().gamma, 2) +
           " and S=0 at gamma " + fmt(real.points.back().gamma, 2));
  return out;
}

Outcome end_to_end() {
  Outcome out;
  const auto start = Clock::now();
  Trainer trainer(TrainConfig{}, BundleSource(default_bundle()));
  trainer.run();
  const double train_time = seconds_since(start);
  const Metrics m = evaluate(trainer.model(), default_bundle(), EvalOptions{});
  const double total = seconds_since(start);
  out.require(trainer.discriminator_updates() == 1500, "critic updates " +
                                                           std::to_string(trainer.discriminator_updates()));
  out.require(m.top1_unseen >= 0.40, "unseen top-1 " + fmt(m.top1_unseen) + " < 0.40");
  out.require(m.gzsl->h >= 0.30, "H " + fmt(m.gzsl->h) + " < 0.30");
  out.require(m.gzsl->ausuc >= 0.25, "AUSUC " + fmt(m.gzsl->ausuc) + " < 0.25");
  out.require(total <= 300.0, "runtime " + fmt(total, 1) + " s > 300 s");
  out.note("top1_unseen = " + fmt(m.top1_unseen) + ", S = " + fmt(m.gzsl->seen) + ", U = " +
           fmt(m.gzsl->unseen) + ", H = " + fmt(m.gzsl->h) + ", AUSUC = " + fmt(m.gzsl->ausuc) +
           ", train " + fmt(train_time, 1) + " s, total " + fmt(total, 1) + " s");
  return out;
}

Outcome ablation() {
  Outcome out;
  struct Variant {
    std::string name;
    std::function<void(TrainConfig&)> apply;
    double sum = 0.0;
  };
  std::vector<Variant> variants = {
      {"MKFNet-NFG", [](TrainConfig&) {}},
      {"MKFNet", [](TrainConfig& c) { c.offspring = 0; }},
      {"summing", [](TrainConfig& c) {
         c.offspring = 0;
         c.fusion = FusionMode::kSumming;
       }}};
  const int seeds = 5;
  std::string per_seed;
  for (int seed = 1; seed <= seeds; ++seed) {
    per_seed += (seed == 1 ? "" : " | ") + std::string("seed ") + std::to_string(seed) + ":";
    for (auto& v : variants) {
      TrainConfig c;
      c.seed = static_cast<std::uint64_t>(seed);
      v.apply(c);
      const TrainResult r = train(c, default_bundle());
      const double h = evaluate(r.model, default_bundle(), EvalOptions{}).gzsl->h;
      v.sum += h;
      per_seed += " " + fmt(h, 3);
    }
  }
  const double nfg = variants[0].sum / seeds, plain = variants[1].sum / seeds,
               summing = variants[2].sum / seeds;
  out.require(nfg >= plain, "H(MKFNet-NFG) < H(MKFNet)");
  out.require(plain >= summing - 0.02, "H(MKFNet) < H(summing) - 0.02");
  out.note("mean H: MKFNet-NFG = " + fmt(nfg, 6) + ", MKFNet = " + fmt(plain, 6) + ", summing = " +
           fmt(summing, 6) + " (" + per_seed + ")");
  return out;
}

Outcome schedule() {
  Outcome out;
  TrainConfig c;
  c.steps = 8;
  c.n_nfg = 3;
  Trainer t(c, BundleSource(default_bundle()));
  bool per_loop = true, closed = true;
  while (!t.finished()) {
    const auto before = t.discriminator_updates();
    const auto g_before = t.generator_updates();
    t.run_loop();
    per_loop = per_loop && t.discriminator_updates() - before == kCriticStepsPerLoop &&
               t.generator_updates() - g_before == 1;
    if (t.loop() <= c.n_nfg) closed = closed && t.pools().enhanced.empty() && t.pools().novel.empty();
  }
  const bool opened = t.pools().enhanced.size() + t.pools().novel.size() > 0;
  out.require(per_loop, "a loop did not run exactly 5 critic and 1 generator update");
  out.require(closed, "pools filled at or before loop N_NFG");
  out.require(opened, "pools never filled after N_NFG");
  out.note("8 loops: " + std::to_string(t.discriminator_updates()) + " critic updates, pools empty through loop 3, " +
           std::to_string(t.pools().enhanced.size()) + " enhanced / " +
           std::to_string(t.pools().novel.size()) + " novel at the end");
  return out;
}

Outcome determinism() {
  Outcome out;
  TrainConfig c;
  c.steps = 20;
  const auto a = fnv1a(train(c, default_bundle()).report.to_csv(false));
  const auto b = fnv1a(train(c, default_bundle()).report.to_csv(false));
  out.require(a == b, "report hashes differ");

  Trainer straight(c, BundleSource(default_bundle()));
  straight.run();
  TrainConfig half = c;
  half.steps = 10;
  Trainer first(half, BundleSource(default_bundle()));
  first.run();
  const auto path = std::filesystem::temp_directory_path() / "mkfusion_acceptance_ckpt.json";
  save_checkpoint(first.snapshot(), path);
  TrainerSnapshot snap = load_checkpoint(path);
  std::filesystem::remove(path);
  snap.config.steps = c.steps;
  Trainer resumed(std::move(snap), BundleSource(default_bundle()));
  resumed.run();

  const Metrics x = evaluate(straight.model(), default_bundle(), EvalOptions{});
  const Metrics y = evaluate(resumed.model(), default_bundle(), EvalOptions{});
  const double diff = std::max({std::abs(x.top1_unseen - y.top1_unseen),
                                std::abs(x.gzsl->seen - y.gzsl->seen),
                                std::abs(x.gzsl->unseen - y.gzsl->unseen),
                                std::abs(x.gzsl->h - y.gzsl->h),
                                std::abs(x.gzsl->ausuc - y.gzsl->ausuc)});
  out.require(diff <= 1e-9, "resumed metrics differ by " + sci(diff));
  out.require(resumed.report().to_csv(false) == straight.report().to_csv(false),
              "resumed report differs");
  std::ostringstream hex;
  hex << std::hex << a;
  out.note("report hash " + hex.str() + " twice; resume at 10/20 max metric diff " + sci(diff));
  return out;
}

// Forwards to a bundle and records every visual vector handed out.
class AuditedSource : public SampleSource {
 public:
  explicit AuditedSource(const DatasetBundle& b) : inner_(b), bundle_(b) {}
  Dims dims() const override { return inner_.dims(); }
  const std::vector<ClassRecord>& classes() const override { return inner_.classes(); }
  const std::vector<int>& seen_species() const override { return inner_.seen_species(); }
  std::size_t sample_count() const override { return inner_.sample_count(); }
  int sample_species(std::size_t i) const override { return inner_.sample_species(i); }
  std::span<const double> sample_visual(std::size_t i) const override {
    ++reads;
    if (!bundle_.is_seen(bundle_.samples.at(i).species_id)) ++unseen_reads;
    return inner_.sample_visual(i);
  }
  mutable std::size_t reads = 0;
  mutable std::size_t unseen_reads = 0;

 private:
  BundleSource inner_;
  const DatasetBundle& bundle_;
};

Outcome zsl_contract() {
  Outcome out;
  TrainConfig c;
  c.steps = 8;
  c.n_nfg = 2;
  const DatasetBundle& bundle = default_bundle();
  AuditedSource audit(bundle);
  Trainer t(c, audit);
  const std::size_t construction_reads = audit.reads;
  t.run();
  TrainerSnapshot snap = t.snapshot();
  snap.config.steps = 10;
  Trainer resumed(std::move(snap), audit);
  resumed.run();
  out.require(audit.unseen_reads == 0, std::to_string(audit.unseen_reads) + " unseen visual reads");
  out.require(t.pools().enhanced.size() + t.pools().novel.size() > 0, "NFG never produced offspring");

  // Unseen visuals replaced by NaN must leave training bit-identical.
  DatasetBundle poisoned = bundle;
  for (auto& s : poisoned.samples) {
    if (!poisoned.is_seen(s.species_id)) {
      std::fill(s.visual.begin(), s.visual.end(), std::numeric_limits<double>::quiet_NaN());
    }
  }
  const std::string clean_csv = train(c, bundle).report.to_csv(false);
  const std::string poisoned_csv = train(c, poisoned).report.to_csv(false);
  out.require(clean_csv == poisoned_csv, "training depends on unseen visual features");
  out.note(std::to_string(audit.reads) + " visual reads (" + std::to_string(construction_reads) +
           " at construction), 0 from unseen classes; NaN-poisoned unseen visuals leave the report identical");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"gradient correctness", gradients},
      {"fusion-weight properties", fusion_weights},
      {"genetic-operator properties", genetic_operators},
      {"metric oracles", metric_oracles},
      {"end-to-end desk-scale GZSL", end_to_end},
      {"ablation ordering", ablation},
      {"training schedule", schedule},
      {"determinism and persistence", determinism},
      {"zero-shot data contract", zsl_contract}};

  bool all = true;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all = all && o.pass;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << " (" << checks[i].first
              << "): " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
