#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mkfusion/model.hpp"
#include "mkfusion/taxonomy.hpp"

namespace mkfusion {

inline constexpr std::size_t kDefaultSyntheticPerClass = 60;
inline constexpr std::size_t kDefaultRetrievalK = 5;

struct ClassPrototypes {
  std::map<int, std::vector<double>> centers;  // class id -> mean fused generation
  std::size_t n_syn = 0;
};

// Class c draws its noise from derive_seed(seed, c), row by row, so a larger
// n_syn extends the same stream.
ClassPrototypes synthesize_prototypes(const MkfnetModel& model,
                                      const std::map<int, std::vector<double>>& semantics,
                                      std::size_t n_syn, std::uint64_t seed);

// Cosine similarity to every prototype, in class id order.
std::vector<std::pair<int, double>> similarity_scores(const ClassPrototypes& prototypes,
                                                      std::span<const double> x);

// Highest cosine; ties go to the lowest class id.
int classify_top1(const ClassPrototypes& prototypes, std::span<const double> x);

double harmonic_mean(double s, double u);

struct CurvePoint {
  double gamma = 0.0;
  double seen = 0.0;    // S(gamma)
  double unseen = 0.0;  // U(gamma)
};

struct SeenUnseenCurve {
  std::vector<CurvePoint> points;  // gamma strictly increasing
};

// Test samples scored against seen and unseen classes jointly.
struct ScoredSample {
  int label = 0;
  std::vector<double> scores;  // aligned with ScoreTable::classes
};

struct ScoreTable {
  std::vector<int> classes;
  std::vector<bool> seen_class;  // aligned with classes
  std::vector<ScoredSample> seen_samples;
  std::vector<ScoredSample> unseen_samples;
};

// Top-1 accuracies with gamma subtracted from every seen-class score.
std::pair<double, double> calibrated_accuracy(const ScoreTable& table, double gamma);

inline constexpr std::size_t kGammaGridSize = 201;
inline constexpr double kGammaGridBound = 2.0;

// Evenly spaced gammas over [-bound, bound], extended on either side until
// S reaches 0 at the top and U reaches 0 at the bottom.
SeenUnseenCurve seen_unseen_curve(const ScoreTable& table, std::size_t grid = kGammaGridSize,
                                  double bound = kGammaGridBound);

// Trapezoidal area under the upper frontier of the (S, U) points, closed with
// (0, max U) and (max S, 0). Needs at least two points.
double ausuc(std::span<const std::pair<double, double>> points);
double ausuc(const SeenUnseenCurve& curve);

struct Retrieval {
  std::size_t sample = 0;
  double similarity = 0.0;
};

// Descending similarity to the prototype of `class_id`; ties by sample index.
// k beyond the pool size yields the full ranking.
std::vector<Retrieval> retrieve_topk(const ClassPrototypes& prototypes,
                                     std::span<const std::vector<double>> pool, int class_id,
                                     std::size_t k);

enum class EvalMode { kZsl, kGzsl };

std::string_view eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(std::string_view name);

struct EvalOptions {
  EvalMode mode = EvalMode::kGzsl;
  std::size_t n_syn = kDefaultSyntheticPerClass;
  std::uint64_t seed = 1;
  std::size_t k = kDefaultRetrievalK;
};

struct ClassCount {
  int class_id = 0;
  bool seen = false;
  std::size_t correct = 0;
  std::size_t total = 0;
};

struct GzslMetrics {
  double seen = 0.0;    // gamma = 0
  double unseen = 0.0;
  double h = 0.0;
  double best_gamma = 0.0;
  double best_seen = 0.0;
  double best_unseen = 0.0;
  double best_h = 0.0;
  double ausuc = 0.0;
  double precision_at_k = 0.0;  // unseen classes against the unseen pool
  std::size_t k = 0;
  SeenUnseenCurve curve;
};

struct Metrics {
  EvalMode mode = EvalMode::kGzsl;
  double top1_unseen = 0.0;  // unseen label space only
  std::optional<GzslMetrics> gzsl;
  std::vector<ClassCount> per_class;  // over the label space of `mode`
};

// Prototypes are synthesized from semantics only. Accuracies are fractions
// of samples; seen accuracy is measured on the seen-split samples.
Metrics evaluate(const MkfnetModel& model, const DatasetBundle& bundle, const EvalOptions& options);

ScoreTable score_table(const ClassPrototypes& prototypes, const DatasetBundle& bundle);

std::string metrics_text(const Metrics& metrics);
std::string metrics_csv(const Metrics& metrics);
std::string curve_csv(const SeenUnseenCurve& curve);
std::string curve_svg(const SeenUnseenCurve& curve);
std::string per_class_csv(const Metrics& metrics);

}  // namespace mkfusion
