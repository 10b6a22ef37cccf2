#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mkfusion/model.hpp"
#include "mkfusion/synthetic.hpp"

using namespace mkfusion;
using mkfusion::testing::random_tensor;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.dims = {6, 4};
  c.noise_dim = 3;
  c.generator_hidden = 8;
  c.discriminator_hidden1 = 7;
  c.discriminator_hidden2 = 5;
  c.fusion_hidden = 4;
  return c;
}

std::array<Tensor, 3> level_inputs(Rng& rng, std::size_t rows, std::size_t cols) {
  return {random_tensor({rows, cols}, rng), random_tensor({rows, cols}, rng),
          random_tensor({rows, cols}, rng)};
}

}  // namespace

TEST_CASE("model parts have the configured shapes") {
  const MkfnetModel m(small_config(), {5, 2, 9}, 1);
  CHECK(m.generator(Level::kGenus).hidden.in() == 7);
  CHECK(m.generator(Level::kGenus).output.out() == 6);
  CHECK(m.discriminator().classes.out() == 3);
  CHECK(m.fusion().branch(Level::kFamily).score.out() == 1);
  CHECK(m.class_index(2) == 1);
  CHECK_THROWS_AS(m.class_index(4), std::out_of_range);
  MkfnetModel copy = m;
  CHECK(copy.named_parameters().size() == 3 * 4 + 8 + 3 * 4);
  CHECK(copy.critic_parameters().size() == 6);
}

TEST_CASE("initialization is deterministic and per-part streams are independent") {
  MkfnetModel a(small_config(), {0, 1}, 7), b(small_config(), {0, 1}, 7);
  ModelConfig other = small_config();
  other.fusion = FusionMode::kSumming;
  MkfnetModel c(other, {0, 1}, 7);
  auto pa = a.named_parameters(), pb = b.named_parameters(), pc = c.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(*pa[i].second == *pb[i].second);
    CHECK(*pa[i].second == *pc[i].second);
  }
}

TEST_CASE("generation rejects mismatched inputs") {
  const MkfnetModel m(small_config(), {0, 1}, 1);
  Rng rng(2);
  CHECK(generate(m.generator(Level::kSpecies), random_tensor({2, 4}, rng), random_tensor({2, 3}, rng))
            .shape() == Shape{2, 6});
  CHECK_THROWS_AS(generate(m.generator(Level::kSpecies), random_tensor({2, 5}, rng),
                           random_tensor({2, 3}, rng)),
                  ShapeError);
  CHECK_THROWS_AS(generate(m.generator(Level::kSpecies), random_tensor({2, 4}, rng),
                           random_tensor({2, 2}, rng)),
                  ShapeError);
}

TEST_CASE("fusion weights are a distribution per row") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const MkfnetModel m(small_config(), {0, 1}, static_cast<std::uint64_t>(trial));
    const auto x = level_inputs(rng, 4, 6);
    const FusionResult r = fuse(m.fusion(), x[2], x[1], x[0]);
    for (const auto& w : r.weights) {
      CHECK(w.family + w.genus + w.species == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(w.family > 0.0);
      CHECK(w.species < 1.0);
    }
    // Row 0 of the fused output is the weighted sum of the level rows.
    const auto& w = r.weights[0];
    for (std::size_t j = 0; j < 6; ++j) {
      const double expect = w.family * x[2].at(0, j) + w.genus * x[1].at(0, j) +
                            w.species * x[0].at(0, j);
      CHECK(r.fused.at(0, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("equal branch scores reproduce the summing baseline exactly") {
  MkfnetModel m(small_config(), {0, 1}, 4);
  for (Level level : kLevels) {
    FusionBranch& b = m.fusion().branch(level);
    for (double& v : b.score.weight.data()) v = 0.0;
    b.score.bias[0] = 0.3;
  }
  Rng rng(5);
  const auto x = level_inputs(rng, 5, 6);
  const FusionResult r = fuse(m.fusion(), x[2], x[1], x[0]);
  for (const auto& w : r.weights) {
    CHECK(w.family == 1.0 / 3.0);
    CHECK(w.genus == 1.0 / 3.0);
    CHECK(w.species == 1.0 / 3.0);
  }
  CHECK(r.fused == fuse_baseline(x[2], x[1], x[0]));
}

TEST_CASE("summing mode synthesizes the plain average") {
  ModelConfig c = small_config();
  c.fusion = FusionMode::kSumming;
  const MkfnetModel m(c, {0, 1}, 6);
  Rng rng(7);
  const Tensor t = random_tensor({3, 4}, rng);
  const Tensor z = random_tensor({3, 3}, rng);
  const Tensor expect = fuse_baseline(generate(m.generator(Level::kFamily), t, z),
                                      generate(m.generator(Level::kGenus), t, z),
                                      generate(m.generator(Level::kSpecies), t, z));
  CHECK(synthesize(m, t, z) == expect);
}

TEST_CASE("frozen binding keeps parameters out of the gradient") {
  MkfnetModel m(small_config(), {0, 1}, 8);
  Rng rng(9);
  Tape tape;
  const Var x = tape.constant(random_tensor({2, 6}, rng));
  const Critique c = discriminate(tape, m.discriminator(), x, Binding::kFrozen);
  tape.backward(mean(c.realness));
  for (Tensor* p : m.discriminator_parameters()) CHECK_FALSE(p->has_grad());
}

TEST_CASE("loss terms agree with independent recomputation") {
  MkfnetModel m(small_config(), {3, 8}, 10);
  Rng rng(11);
  const Tensor real = random_tensor({4, 6}, rng);
  const Tensor fake = random_tensor({4, 6}, rng);
  const std::vector<int> species = {3, 8, 8, 3};
  const Tensor targets = species_targets(m, species);
  CHECK(targets.at(1, 1) == 1.0);
  CHECK(targets.at(1, 0) == 0.0);

  Tape tape;
  const DiscriminatorLoss d =
      loss_discriminator(tape, m, tape.constant(real), tape.constant(fake), targets);
  const auto [real_score, real_logits] = discriminate(m.discriminator(), real);
  const auto [fake_score, fake_logits] = discriminate(m.discriminator(), fake);
  double wass = 0.0;
  for (std::size_t i = 0; i < 4; ++i) wass += (fake_score[i] - real_score[i]) / 4.0;
  CHECK(d.wasserstein.item() == doctest::Approx(wass).epsilon(1e-12));
  double ce = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double a = real_logits.at(i, 0), b = real_logits.at(i, 1);
    const double lse = std::max(a, b) + std::log(std::exp(a - std::max(a, b)) + std::exp(b - std::max(a, b)));
    ce += (lse - real_logits.at(i, static_cast<std::size_t>(m.class_index(species[i])))) / 4.0;
  }
  CHECK(d.classification.item() == doctest::Approx(ce).epsilon(1e-12));

  VisualCenters centers;
  centers.centers[3] = std::vector<double>(6, 1.0);
  centers.centers[8] = std::vector<double>(6, -1.0);
  const Var kr = loss_kr(tape.constant(fake), centers, species);
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double c = species[i] == 3 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < 6; ++j) expect += std::pow(fake.at(i, j) - c, 2) / 4.0;
  }
  CHECK(kr.item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS(loss_kr(tape.constant(fake), centers, std::vector<int>{3, 8, 5, 3}));
}

TEST_CASE("novel loss vanishes on a uniform posterior and reduces to realness at lambda 0") {
  MkfnetModel m(small_config(), {0, 1, 2}, 12);
  Rng rng(13);
  const Tensor fused = random_tensor({4, 6}, rng);
  const auto [score, logits] = discriminate(m.discriminator(), fused);
  double mean_score = 0.0;
  for (std::size_t i = 0; i < 4; ++i) mean_score += score[i] / 4.0;
  {
    Tape tape;
    CHECK(loss_novel(tape, m, tape.constant(fused), 0.0).item() ==
          doctest::Approx(mean_score).epsilon(1e-12));
  }
  for (double& v : m.discriminator().classes.weight.data()) v = 0.0;
  for (double& v : m.discriminator().classes.bias.data()) v = 0.0;
  Tape tape;
  CHECK(loss_novel(tape, m, tape.constant(fused), 5.0).item() ==
        doctest::Approx(mean_score).epsilon(1e-12));
  CHECK_THROWS(loss_novel(tape, m, tape.constant(fused), -1.0));
}

TEST_CASE("fusion mode names parse") {
  CHECK(parse_fusion_mode("adaptive") == FusionMode::kAdaptive);
  CHECK(parse_fusion_mode("summing") == FusionMode::kSumming);
  CHECK_THROWS(parse_fusion_mode("max"));
}
