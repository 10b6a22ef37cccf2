#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradcheck.hpp"
#include "mkfusion/eval.hpp"
#include "mkfusion/synthetic.hpp"
#include "mkfusion/trainer.hpp"

using namespace mkfusion;

namespace {

ClassPrototypes basis(std::size_t n) {
  ClassPrototypes p;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(n, 0.0);
    e[i] = 1.0;
    p.centers[static_cast<int>(i)] = e;
  }
  p.n_syn = 1;
  return p;
}

// Two seen classes {0, 1} and one unseen class {2}.
ScoreTable toy_table() {
  ScoreTable t;
  t.classes = {0, 1, 2};
  t.seen_class = {true, true, false};
  t.seen_samples = {{0, {0.9, 0.1, 0.5}}, {1, {0.2, 0.8, 0.7}}, {0, {0.6, 0.3, 0.65}}};
  t.unseen_samples = {{2, {0.7, 0.2, 0.6}}, {2, {0.1, 0.3, 0.9}}};
  return t;
}

// Independent scan: adjust, argmax with lowest-id ties, count.
std::pair<double, double> brute_accuracy(const ScoreTable& t, double gamma) {
  auto acc = [&](const std::vector<ScoredSample>& set) {
    int correct = 0;
    for (const auto& s : set) {
      int best = -1;
      double best_score = -1e300;
      for (std::size_t c = 0; c < t.classes.size(); ++c) {
        const double v = s.scores[c] - (t.seen_class[c] ? gamma : 0.0);
        if (v > best_score) {
          best_score = v;
          best = t.classes[c];
        }
      }
      correct += best == s.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
  };
  return {acc(t.seen_samples), acc(t.unseen_samples)};
}

}  // namespace

TEST_CASE("harmonic mean identities") {
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
  CHECK(harmonic_mean(0.4, 0.4) == doctest::Approx(0.4));
  CHECK(harmonic_mean(0.3, 0.9) == harmonic_mean(0.9, 0.3));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double s = rng.uniform(), u = rng.uniform();
    const double h = harmonic_mean(s, u);
    CHECK(h <= 2.0 * std::min(s, u) + 1e-15);
    CHECK(h <= std::max(s, u) + 1e-15);
  }
}

TEST_CASE("top-1 classification by cosine") {
  const ClassPrototypes p = basis(4);
  CHECK(classify_top1(p, std::vector<double>{0, 0, 1, 0}) == 2);
  CHECK(classify_top1(p, std::vector<double>{0, 0.5, 0.5, 0}) == 1);  // tie -> lowest id
  CHECK(classify_top1(p, std::vector<double>{0.1, 3.0, 0.2, 0}) ==
        classify_top1(p, std::vector<double>{1.0, 30.0, 2.0, 0}));
  CHECK_THROWS_AS(classify_top1(p, std::vector<double>{0, 0, 0, 0}), NumericError);
  CHECK_THROWS(classify_top1(ClassPrototypes{}, std::vector<double>{1}));
}

TEST_CASE("top-1 agrees with a brute-force scan") {
  Rng rng(2);
  ClassPrototypes p;
  for (int c = 0; c < 7; ++c) {
    std::vector<double> v(5);
    for (double& x : v) x = rng.uniform(-1, 1);
    p.centers[c * 3] = v;
  }
  for (int i = 0; i < 500; ++i) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(-1, 1);
    int best = -1;
    double best_score = -2.0;
    for (const auto& [id, c] : p.centers) {
      double dot = 0, nx = 0, nc = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        dot += x[j] * c[j];
        nx += x[j] * x[j];
        nc += c[j] * c[j];
      }
      const double s = dot / std::sqrt(nx * nc);
      if (s > best_score) {
        best_score = s;
        best = id;
      }
    }
    CHECK(classify_top1(p, x) == best);
  }
}

TEST_CASE("calibrated accuracy matches hand enumeration on a toy table") {
  const ScoreTable t = toy_table();
  for (double gamma : {-1.0, -0.3, 0.0, 0.05, 0.1, 0.2, 0.4, 1.0}) {
    CAPTURE(gamma);
    CHECK(calibrated_accuracy(t, gamma) == brute_accuracy(t, gamma));
  }
  // gamma = 0: seen samples 0, 1 right; sample 3 goes to unseen (0.65 > 0.6).
  const auto [s, u] = calibrated_accuracy(t, 0.0);
  CHECK(s == doctest::Approx(2.0 / 3.0));
  CHECK(u == doctest::Approx(0.5));
}

TEST_CASE("curve reaches both saturation regimes and trades off monotonically") {
  const SeenUnseenCurve c = seen_unseen_curve(toy_table());
  REQUIRE(c.points.size() >= kGammaGridSize);
  CHECK(c.points.front().unseen == 0.0);
  CHECK(c.points.back().seen == 0.0);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i].gamma > c.points[i - 1].gamma);
    CHECK(c.points[i].seen <= c.points[i - 1].seen);
    CHECK(c.points[i].unseen >= c.points[i - 1].unseen);
  }
  ScoreTable empty = toy_table();
  empty.unseen_samples.clear();
  CHECK_THROWS(seen_unseen_curve(empty));
}

TEST_CASE("curve extends beyond the grid when scores demand it") {
  ScoreTable t;
  t.classes = {0, 1};
  t.seen_class = {true, false};
  t.seen_samples = {{0, {10.0, 0.0}}};
  t.unseen_samples = {{1, {0.0, 9.0}}};
  const SeenUnseenCurve c = seen_unseen_curve(t);
  CHECK(c.points.back().seen == 0.0);
  CHECK(c.points.back().gamma > 10.0);
  CHECK(c.points.front().unseen == 0.0);
  CHECK(c.points.front().gamma < -9.0);
}

TEST_CASE("AUSUC examples") {
  const std::vector<std::pair<double, double>> three = {{0, 1}, {0.5, 0.5}, {1, 0}};
  CHECK(ausuc(three) == doctest::Approx(0.5).epsilon(1e-15));
  const std::vector<std::pair<double, double>> flat = {{0, 0}, {0.5, 0}, {1, 0}};
  CHECK(ausuc(flat) == 0.0);
  const std::vector<std::pair<double, double>> perfect = {{0, 1}, {1, 1}, {1, 0}};
  CHECK(ausuc(perfect) == 1.0);
  const std::vector<std::pair<double, double>> one = {{0.5, 0.5}};
  CHECK_THROWS(ausuc(one));
}

TEST_CASE("adding a dominated point never increases AUSUC") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 6; ++i) pts.emplace_back(rng.uniform(), rng.uniform());
    const double before = ausuc(pts);
    CHECK(before >= 0.0);
    CHECK(before <= 1.0);
    const auto [s, u] = pts[rng.index(pts.size())];
    pts.emplace_back(s * rng.uniform(), u * rng.uniform());
    CHECK(ausuc(pts) <= before + 1e-15);
  }
}

TEST_CASE("retrieval ranks by similarity with index tie-breaks") {
  const ClassPrototypes p = basis(3);
  const std::vector<std::vector<double>> pool = {
      {0, 1, 0}, {1, 0, 0}, {1, 1, 0}, {2, 0, 0}, {0, 0, 1}};
  const auto top = retrieve_topk(p, pool, 0, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].sample == 1);
  CHECK(top[1].sample == 3);
  CHECK(top[2].sample == 2);
  CHECK(retrieve_topk(p, pool, 0, 50).size() == 5);
  CHECK(retrieve_topk(p, std::vector<std::vector<double>>{{5, 5, 5}}, 2, 5).size() == 1);
  CHECK_THROWS(retrieve_topk(p, pool, 9, 3));
  CHECK_THROWS(retrieve_topk(p, pool, 0, 0));
}

TEST_CASE("retrieval agrees with a full sort") {
  Rng rng(4);
  ClassPrototypes p = basis(4);
  std::vector<std::vector<double>> pool;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> v(4);
    for (double& x : v) x = std::round(rng.uniform(-2, 2));  // coarse values force ties
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
    pool.push_back(v);
  }
  const auto top = retrieve_topk(p, pool, 1, 10);
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& v = pool[i];
    const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
    all.emplace_back(-v[1] / norm, i);
  }
  std::sort(all.begin(), all.end());
  for (std::size_t r = 0; r < 10; ++r) CHECK(top[r].sample == all[r].second);
}

TEST_CASE("prototypes: mean of generations, prefix-stable streams") {
  const DatasetBundle b = generate_synthetic(SyntheticSpec{}, 1);
  ModelConfig c;
  c.dims = b.dims;
  c.generator_hidden = 16;
  const MkfnetModel m(c, b.seen, 2);
  const std::map<int, std::vector<double>> sem = {{b.classes[0].species_id, b.classes[0].semantic}};
  const ClassPrototypes one = synthesize_prototypes(m, sem, 1, 9);
  Rng rng(derive_seed(9, static_cast<std::uint64_t>(b.classes[0].species_id)));
  const Tensor x = synthesize(m, Tensor({1, 16}, b.classes[0].semantic), sample_noise(1, 32, rng));
  CHECK(one.centers.begin()->second == x.values());

  const auto p30 = synthesize_prototypes(m, sem, 30, 9).centers.begin()->second;
  const auto p60 = synthesize_prototypes(m, sem, 60, 9).centers.begin()->second;
  // Second half of the 60-draw stream, generated on its own, completes the mean.
  Rng replay(derive_seed(9, static_cast<std::uint64_t>(b.classes[0].species_id)));
  const Tensor z = sample_noise(60, 32, replay);
  Tensor t = Tensor::zeros({60, 16});
  for (std::size_t r = 0; r < 60; ++r) {
    std::copy(b.classes[0].semantic.begin(), b.classes[0].semantic.end(), t.data().begin() + r * 16);
  }
  const Tensor gen = synthesize(m, t, z);
  for (std::size_t j = 0; j < 32; ++j) {
    double first = 0.0, all = 0.0;
    for (std::size_t r = 0; r < 60; ++r) {
      all += gen.at(r, j) / 60.0;
      if (r < 30) first += gen.at(r, j) / 30.0;
    }
    CHECK(p30[j] == doctest::Approx(first).epsilon(1e-12));
    CHECK(p60[j] == doctest::Approx(all).epsilon(1e-12));
  }
  CHECK_THROWS(synthesize_prototypes(m, sem, 0, 9));
}

TEST_CASE("evaluate: zsl reports unseen accuracy only, gzsl keeps H consistent") {
  const DatasetBundle b = generate_synthetic(SyntheticSpec{}, 1);
  TrainConfig tc;
  tc.steps = 3;
  tc.generator_hidden = 16;
  tc.discriminator_hidden1 = 16;
  tc.discriminator_hidden2 = 8;
  const TrainResult r = train(tc, b);
  EvalOptions zsl;
  zsl.mode = EvalMode::kZsl;
  zsl.n_syn = 5;
  const Metrics mz = evaluate(r.model, b, zsl);
  CHECK_FALSE(mz.gzsl.has_value());
  CHECK(metrics_text(mz).find("S=") == std::string::npos);
  CHECK(mz.per_class.size() == b.unseen.size());

  EvalOptions g = zsl;
  g.mode = EvalMode::kGzsl;
  const Metrics mg = evaluate(r.model, b, g);
  REQUIRE(mg.gzsl.has_value());
  CHECK(mg.gzsl->h == doctest::Approx(harmonic_mean(mg.gzsl->seen, mg.gzsl->unseen)));
  CHECK(mg.gzsl->best_h >= mg.gzsl->h);
  CHECK(mg.top1_unseen == mz.top1_unseen);
  CHECK(mg.per_class.size() == b.classes.size());
  const std::string text = metrics_text(mg);
  CHECK(text.find("AUSUC=") != std::string::npos);
  CHECK(curve_csv(mg.gzsl->curve).rfind("gamma,S,U\n", 0) == 0);
  CHECK(curve_svg(mg.gzsl->curve).find("<polyline") != std::string::npos);

  SyntheticSpec spec;
  spec.visual_dim = 8;
  CHECK_THROWS(evaluate(r.model, generate_synthetic(spec, 1), g));
}
