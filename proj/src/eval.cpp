#include "mkfusion/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mkfusion/nfg.hpp"

namespace mkfusion {
namespace {

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::size_t argmax_lowest(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

double accuracy(const ScoreTable& table, std::span<const ScoredSample> samples, double gamma) {
  if (samples.empty()) throw std::invalid_argument("evaluation set is empty");
  std::vector<double> adjusted(table.classes.size());
  std::size_t correct = 0;
  for (const auto& s : samples) {
    for (std::size_t c = 0; c < adjusted.size(); ++c) {
      adjusted[c] = table.seen_class[c] ? s.scores[c] - gamma : s.scores[c];
    }
    if (table.classes[argmax_lowest(adjusted)] == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace

ClassPrototypes synthesize_prototypes(const MkfnetModel& model,
                                      const std::map<int, std::vector<double>>& semantics,
                                      std::size_t n_syn, std::uint64_t seed) {
  if (n_syn < 1) throw std::invalid_argument("n_syn must be at least 1");
  ClassPrototypes out;
  out.n_syn = n_syn;
  for (const auto& [id, semantic] : semantics) {
    Tensor t = Tensor::zeros({n_syn, semantic.size()});
    for (std::size_t r = 0; r < n_syn; ++r) {
      std::copy(semantic.begin(), semantic.end(),
                t.data().begin() + static_cast<std::ptrdiff_t>(r * semantic.size()));
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(id))));
    const Tensor x = synthesize(model, t, sample_noise(n_syn, model.config().noise_dim, rng));
    std::vector<double> center(x.cols(), 0.0);
    for (std::size_t r = 0; r < n_syn; ++r) {
      const auto row = x.row(r);
      for (std::size_t j = 0; j < center.size(); ++j) center[j] += row[j];
    }
    for (double& v : center) v /= static_cast<double>(n_syn);
    out.centers.emplace(id, std::move(center));
  }
  return out;
}

std::vector<std::pair<int, double>> similarity_scores(const ClassPrototypes& prototypes,
                                                      std::span<const double> x) {
  std::vector<std::pair<int, double>> out;
  out.reserve(prototypes.centers.size());
  for (const auto& [id, center] : prototypes.centers) out.emplace_back(id, cosine(x, center));
  return out;
}

int classify_top1(const ClassPrototypes& prototypes, std::span<const double> x) {
  if (prototypes.centers.empty()) throw std::invalid_argument("no prototypes to classify against");
  const auto scores = similarity_scores(prototypes, x);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].second > scores[best].second) best = i;
  }
  return scores[best].first;
}

double harmonic_mean(double s, double u) {
  if (s + u == 0.0) return 0.0;
  return 2.0 * s * u / (s + u);
}

std::pair<double, double> calibrated_accuracy(const ScoreTable& table, double gamma) {
  return {accuracy(table, table.seen_samples, gamma), accuracy(table, table.unseen_samples, gamma)};
}

SeenUnseenCurve seen_unseen_curve(const ScoreTable& table, std::size_t grid, double bound) {
  if (grid < 2) throw std::invalid_argument("gamma grid needs at least two points");
  if (!(bound > 0.0)) throw std::invalid_argument("gamma bound must be positive");
  const double step = 2.0 * bound / static_cast<double>(grid - 1);
  std::vector<CurvePoint> points;
  auto point = [&](double gamma) {
    const auto [s, u] = calibrated_accuracy(table, gamma);
    return CurvePoint{gamma, s, u};
  };
  for (std::size_t i = 0; i < grid; ++i) {
    const double gamma = i + 1 == grid ? bound : -bound + step * static_cast<double>(i);
    points.push_back(point(gamma));
  }
  constexpr int kMaxExtensions = 64;
  std::vector<CurvePoint> below;
  double reach = step;
  for (int i = 0; i < kMaxExtensions && (below.empty() ? points.front() : below.back()).unseen > 0.0;
       ++i, reach *= 2.0) {
    below.push_back(point(-bound - reach));
  }
  reach = step;
  for (int i = 0; i < kMaxExtensions && points.back().seen > 0.0; ++i, reach *= 2.0) {
    points.push_back(point(bound + reach));
  }
  SeenUnseenCurve curve;
  curve.points.assign(below.rbegin(), below.rend());
  curve.points.insert(curve.points.end(), points.begin(), points.end());
  return curve;
}

double ausuc(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw std::invalid_argument("AUSUC needs at least two curve points");
  std::vector<std::pair<double, double>> p;
  for (auto [s, u] : points) {
    if (std::isnan(s) || std::isnan(u)) throw std::invalid_argument("AUSUC point is NaN");
    p.emplace_back(std::clamp(s, 0.0, 1.0), std::clamp(u, 0.0, 1.0));
  }
  // Upper frontier: walk by decreasing S, keep points that raise U.
  std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  std::vector<std::pair<double, double>> frontier;
  double best_u = -1.0;
  for (const auto& q : p) {
    if (q.second > best_u) {
      frontier.push_back(q);
      best_u = q.second;
    }
  }
  std::reverse(frontier.begin(), frontier.end());
  frontier.insert(frontier.begin(), {0.0, best_u});
  frontier.emplace_back(p.front().first, 0.0);
  double area = 0.0;
  for (std::size_t i = 1; i < frontier.size(); ++i) {
    const auto [s0, u0] = frontier[i - 1];
    const auto [s1, u1] = frontier[i];
    area += (s1 - s0) * (u0 + u1) / 2.0;
  }
  return area;
}

double ausuc(const SeenUnseenCurve& curve) {
  std::vector<std::pair<double, double>> p;
  for (const auto& q : curve.points) p.emplace_back(q.seen, q.unseen);
  return ausuc(p);
}

std::vector<Retrieval> retrieve_topk(const ClassPrototypes& prototypes,
                                     std::span<const std::vector<double>> pool, int class_id,
                                     std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (pool.empty()) throw std::invalid_argument("retrieval pool is empty");
  auto it = prototypes.centers.find(class_id);
  if (it == prototypes.centers.end()) {
    throw std::out_of_range("unknown class id " + std::to_string(class_id));
  }
  std::vector<Retrieval> ranked;
  ranked.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) ranked.push_back({i, cosine(pool[i], it->second)});
  const std::size_t n = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                    [](const Retrieval& a, const Retrieval& b) {
                      return a.similarity != b.similarity ? a.similarity > b.similarity
                                                          : a.sample < b.sample;
                    });
  ranked.resize(n);
  return ranked;
}

std::string_view eval_mode_name(EvalMode mode) { return mode == EvalMode::kZsl ? "zsl" : "gzsl"; }

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "zsl") return EvalMode::kZsl;
  if (name == "gzsl") return EvalMode::kGzsl;
  throw std::invalid_argument("unknown evaluation mode '" + std::string(name) +
                              "' (expected zsl or gzsl)");
}

ScoreTable score_table(const ClassPrototypes& prototypes, const DatasetBundle& bundle) {
  ScoreTable table;
  for (const auto& [id, center] : prototypes.centers) {
    if (!bundle.is_seen(id) && !bundle.is_unseen(id)) {
      throw std::invalid_argument("prototype for class " + std::to_string(id) +
                                  " outside the dataset splits");
    }
    table.classes.push_back(id);
    table.seen_class.push_back(bundle.is_seen(id));
  }
  for (const auto& s : bundle.samples) {
    if (!prototypes.centers.contains(s.species_id)) continue;
    ScoredSample scored{s.species_id, {}};
    for (const auto& [id, score] : similarity_scores(prototypes, s.visual)) {
      scored.scores.push_back(score);
    }
    (bundle.is_seen(s.species_id) ? table.seen_samples : table.unseen_samples)
        .push_back(std::move(scored));
  }
  return table;
}

Metrics evaluate(const MkfnetModel& model, const DatasetBundle& bundle,
                 const EvalOptions& options) {
  if (model.config().dims != bundle.dims) {
    throw std::invalid_argument("checkpoint dimensions (visual " +
                                std::to_string(model.config().dims.visual) + ", semantic " +
                                std::to_string(model.config().dims.semantic) +
                                ") do not match the dataset (visual " +
                                std::to_string(bundle.dims.visual) + ", semantic " +
                                std::to_string(bundle.dims.semantic) + ")");
  }
  std::map<int, std::vector<double>> semantics;
  for (const auto& c : bundle.classes) {
    const bool wanted = bundle.is_unseen(c.species_id) ||
                        (options.mode == EvalMode::kGzsl && bundle.is_seen(c.species_id));
    if (wanted) semantics.emplace(c.species_id, c.semantic);
  }
  const ClassPrototypes all = synthesize_prototypes(model, semantics, options.n_syn, options.seed);
  ClassPrototypes unseen_only{{}, all.n_syn};
  for (const auto& [id, center] : all.centers) {
    if (bundle.is_unseen(id)) unseen_only.centers.emplace(id, center);
  }

  Metrics m;
  m.mode = options.mode;
  std::map<int, ClassCount> zsl_counts;
  for (int id : bundle.unseen) zsl_counts[id] = ClassCount{id, false, 0, 0};
  std::vector<std::vector<double>> unseen_pool;
  std::vector<int> unseen_labels;
  for (const auto& s : bundle.samples) {
    if (!bundle.is_unseen(s.species_id)) continue;
    ClassCount& count = zsl_counts[s.species_id];
    ++count.total;
    if (classify_top1(unseen_only, s.visual) == s.species_id) ++count.correct;
    unseen_pool.push_back(s.visual);
    unseen_labels.push_back(s.species_id);
  }
  if (unseen_pool.empty()) throw std::invalid_argument("evaluation set is empty");
  std::size_t correct = 0;
  for (const auto& [id, c] : zsl_counts) correct += c.correct;
  m.top1_unseen = static_cast<double>(correct) / static_cast<double>(unseen_pool.size());

  if (options.mode == EvalMode::kZsl) {
    for (const auto& [id, c] : zsl_counts) m.per_class.push_back(c);
    return m;
  }

  const ScoreTable table = score_table(all, bundle);
  GzslMetrics g;
  std::tie(g.seen, g.unseen) = calibrated_accuracy(table, 0.0);
  g.h = harmonic_mean(g.seen, g.unseen);
  g.curve = seen_unseen_curve(table);
  g.best_h = -1.0;
  for (const auto& p : g.curve.points) {
    const double h = harmonic_mean(p.seen, p.unseen);
    if (h > g.best_h) {
      g.best_h = h;
      g.best_gamma = p.gamma;
      g.best_seen = p.seen;
      g.best_unseen = p.unseen;
    }
  }
  g.ausuc = ausuc(g.curve);

  g.k = options.k;
  double precision = 0.0;
  for (int id : bundle.unseen) {
    const auto top = retrieve_topk(all, unseen_pool, id, options.k);
    std::size_t hits = 0;
    for (const auto& r : top) hits += unseen_labels[r.sample] == id ? 1 : 0;
    precision += static_cast<double>(hits) / static_cast<double>(top.size());
  }
  g.precision_at_k = precision / static_cast<double>(bundle.unseen.size());

  std::map<int, ClassCount> joint;
  for (std::size_t c = 0; c < table.classes.size(); ++c) {
    joint[table.classes[c]] = ClassCount{table.classes[c], static_cast<bool>(table.seen_class[c]), 0, 0};
  }
  for (const auto* set : {&table.seen_samples, &table.unseen_samples}) {
    for (const auto& s : *set) {
      ClassCount& count = joint[s.label];
      ++count.total;
      if (table.classes[argmax_lowest(s.scores)] == s.label) ++count.correct;
    }
  }
  for (const auto& [id, c] : joint) m.per_class.push_back(c);
  m.gzsl = std::move(g);
  return m;
}

namespace {

std::vector<std::pair<std::string, std::string>> metric_fields(const Metrics& m) {
  std::vector<std::pair<std::string, std::string>> f;
  f.emplace_back("mode", std::string(eval_mode_name(m.mode)));
  f.emplace_back("top1_unseen", num(m.top1_unseen));
  if (m.gzsl) {
    const GzslMetrics& g = *m.gzsl;
    f.emplace_back("S", num(g.seen));
    f.emplace_back("U", num(g.unseen));
    f.emplace_back("H", num(g.h));
    f.emplace_back("gamma_best", num(g.best_gamma));
    f.emplace_back("S_best", num(g.best_seen));
    f.emplace_back("U_best", num(g.best_unseen));
    f.emplace_back("H_best", num(g.best_h));
    f.emplace_back("AUSUC", num(g.ausuc));
    f.emplace_back("precision_at_" + std::to_string(g.k), num(g.precision_at_k));
  }
  return f;
}

}  // namespace

std::string metrics_text(const Metrics& metrics) {
  std::string out;
  for (const auto& [k, v] : metric_fields(metrics)) out += k + "=" + v + "\n";
  return out;
}

std::string metrics_csv(const Metrics& metrics) {
  std::string header, row;
  for (const auto& [k, v] : metric_fields(metrics)) {
    header += (header.empty() ? "" : ",") + k;
    row += (row.empty() ? "" : ",") + v;
  }
  return header + "\n" + row + "\n";
}

std::string curve_csv(const SeenUnseenCurve& curve) {
  std::string out = "gamma,S,U\n";
  for (const auto& p : curve.points) {
    out += num(p.gamma) + "," + num(p.seen) + "," + num(p.unseen) + "\n";
  }
  return out;
}

std::string curve_svg(const SeenUnseenCurve& curve) {
  constexpr double kSize = 400.0;
  constexpr double kPad = 40.0;
  std::vector<std::pair<double, double>> p;
  for (const auto& q : curve.points) p.emplace_back(q.seen, q.unseen);
  std::sort(p.begin(), p.end());
  std::string points;
  for (const auto& [s, u] : p) {
    points += num(kPad + s * kSize) + "," + num(kPad + (1.0 - u) * kSize) + " ";
  }
  const std::string side = num(kSize + 2 * kPad);
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + side + "\" height=\"" + side +
         "\">\n"
         "<rect x=\"" + num(kPad) + "\" y=\"" + num(kPad) + "\" width=\"" + num(kSize) +
         "\" height=\"" + num(kSize) + "\" fill=\"none\" stroke=\"#999\"/>\n"
         "<text x=\"" + num(kPad + kSize / 2) + "\" y=\"" + num(2 * kPad + kSize - 10) +
         "\" text-anchor=\"middle\">seen accuracy</text>\n"
         "<text x=\"12\" y=\"" + num(kPad + kSize / 2) +
         "\" transform=\"rotate(-90 12," + num(kPad + kSize / 2) +
         ")\" text-anchor=\"middle\">unseen accuracy</text>\n"
         "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" + points +
         "\"/>\n</svg>\n";
}

std::string per_class_csv(const Metrics& metrics) {
  std::string out = "class_id,split,correct,total\n";
  for (const auto& c : metrics.per_class) {
    out += std::to_string(c.class_id) + "," + (c.seen ? "seen" : "unseen") + "," +
           std::to_string(c.correct) + "," + std::to_string(c.total) + "\n";
  }
  return out;
}

}  // namespace mkfusion
