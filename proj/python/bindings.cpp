#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mkfusion/bundle_io.hpp"
#include "mkfusion/checkpoint.hpp"
#include "mkfusion/eval.hpp"
#include "mkfusion/nfg.hpp"
#include "mkfusion/synthetic.hpp"
#include "mkfusion/trainer.hpp"

namespace py = pybind11;
using namespace mkfusion;

namespace {

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["mode"] = std::string(eval_mode_name(m.mode));
  d["top1_unseen"] = m.top1_unseen;
  if (m.gzsl) {
    const GzslMetrics& g = *m.gzsl;
    d["S"] = g.seen;
    d["U"] = g.unseen;
    d["H"] = g.h;
    d["gamma_best"] = g.best_gamma;
    d["S_best"] = g.best_seen;
    d["U_best"] = g.best_unseen;
    d["H_best"] = g.best_h;
    d["AUSUC"] = g.ausuc;
    d["precision_at_k"] = g.precision_at_k;
    d["k"] = g.k;
    py::list curve;
    for (const auto& p : g.curve.points) curve.append(py::make_tuple(p.gamma, p.seen, p.unseen));
    d["curve"] = curve;
  }
  return d;
}

// Keeps the dataset alive for as long as the trainer refers to it.
struct PyTrainer {
  std::shared_ptr<const DatasetBundle> bundle;
  std::unique_ptr<Trainer> trainer;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical generative zero-shot learning core";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<DatasetBundle, std::shared_ptr<DatasetBundle>>(m, "Dataset")
      .def_property_readonly("visual_dim", [](const DatasetBundle& b) { return b.dims.visual; })
      .def_property_readonly("semantic_dim", [](const DatasetBundle& b) { return b.dims.semantic; })
      .def_readonly("seen", &DatasetBundle::seen)
      .def_readonly("unseen", &DatasetBundle::unseen)
      .def_property_readonly("num_classes", [](const DatasetBundle& b) { return b.classes.size(); })
      .def_property_readonly("num_samples", [](const DatasetBundle& b) { return b.samples.size(); })
      .def("sample_species",
           [](const DatasetBundle& b) {
             std::vector<int> out;
             for (const auto& s : b.samples) out.push_back(s.species_id);
             return out;
           })
      .def("hierarchy",
           [](const DatasetBundle& b) {
             std::vector<std::tuple<int, int, int>> out;
             for (const auto& c : b.classes) out.emplace_back(c.species_id, c.genus_id, c.family_id);
             return out;
           },
           "(species, genus, family) per class")
      .def("to_json", &bundle_to_json)
      .def("save", [](const DatasetBundle& b, const std::filesystem::path& p) { save_bundle(b, p); })
      .def_static("load", [](const std::filesystem::path& p) {
        return std::make_shared<DatasetBundle>(load_bundle(p));
      });

  m.def(
      "generate_dataset",
      [](std::uint64_t seed, int families, int genera, int species, int samples,
         std::size_t visual_dim, std::size_t semantic_dim, double unseen_fraction) {
        SyntheticSpec spec;
        spec.families = families;
        spec.genera_per_family = genera;
        spec.species_per_genus = species;
        spec.samples_per_species = samples;
        spec.visual_dim = visual_dim;
        spec.semantic_dim = semantic_dim;
        spec.unseen_fraction = unseen_fraction;
        return std::make_shared<DatasetBundle>(generate_synthetic(spec, seed));
      },
      py::arg("seed") = 1, py::arg("families") = 3, py::arg("genera") = 3, py::arg("species") = 4,
      py::arg("samples") = 20, py::arg("visual_dim") = 32, py::arg("semantic_dim") = 16,
      py::arg("unseen_fraction") = 0.17);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("n_nfg", &TrainConfig::n_nfg)
      .def_readwrite("kappa1", &TrainConfig::kappa1)
      .def_readwrite("kappa2", &TrainConfig::kappa2)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("noise_dim", &TrainConfig::noise_dim)
      .def_readwrite("clip", &TrainConfig::clip)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("offspring", &TrainConfig::offspring)
      .def_readwrite("generator_hidden", &TrainConfig::generator_hidden)
      .def_readwrite("discriminator_hidden1", &TrainConfig::discriminator_hidden1)
      .def_readwrite("discriminator_hidden2", &TrainConfig::discriminator_hidden2)
      .def_readwrite("fusion_hidden", &TrainConfig::fusion_hidden)
      .def_property(
          "fusion", [](const TrainConfig& c) { return std::string(fusion_mode_name(c.fusion)); },
          [](TrainConfig& c, const std::string& s) { c.fusion = parse_fusion_mode(s); })
      .def("validate", [](const TrainConfig& c) { validate(c); })
      .def("to_json", &train_config_to_json)
      .def("__eq__", [](const TrainConfig& a, const TrainConfig& b) { return a == b; });

  py::class_<MkfnetModel>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p).model; })
      .def_property_readonly("seen_species", &MkfnetModel::seen_species)
      .def("fusion_weights",
           [](const MkfnetModel& model, const std::vector<double>& semantic, std::uint64_t seed) {
             Rng rng(seed);
             const Tensor t({1, semantic.size()}, semantic);
             const Tensor z = sample_noise(1, model.config().noise_dim, rng);
             const FusionResult r =
                 fuse(model.fusion(), generate(model.generator(Level::kFamily), t, z),
                      generate(model.generator(Level::kGenus), t, z),
                      generate(model.generator(Level::kSpecies), t, z));
             return std::make_tuple(r.weights[0].family, r.weights[0].genus, r.weights[0].species);
           },
           py::arg("semantic"), py::arg("seed") = 0, "(family, genus, species) weights");

  py::class_<PyTrainer>(m, "Trainer")
      .def(py::init([](const TrainConfig& config, std::shared_ptr<DatasetBundle> bundle) {
             PyTrainer t{bundle, nullptr};
             t.trainer = std::make_unique<Trainer>(config, BundleSource(*bundle));
             return t;
           }),
           py::arg("config"), py::arg("dataset"))
      .def_static("resume",
                  [](const std::filesystem::path& path, std::shared_ptr<DatasetBundle> bundle,
                     std::optional<int> steps) {
                    TrainerSnapshot s = load_checkpoint(path);
                    if (steps) s.config.steps = *steps;
                    PyTrainer t{bundle, nullptr};
                    t.trainer = std::make_unique<Trainer>(std::move(s), BundleSource(*bundle));
                    return t;
                  },
                  py::arg("path"), py::arg("dataset"), py::arg("steps") = py::none())
      .def("run_loop", [](PyTrainer& t) { t.trainer->run_loop(); })
      .def("run",
           [](PyTrainer& t) {
             py::gil_scoped_release release;
             t.trainer->run();
           })
      .def_property_readonly("loop", [](const PyTrainer& t) { return t.trainer->loop(); })
      .def_property_readonly("finished", [](const PyTrainer& t) { return t.trainer->finished(); })
      .def_property_readonly("discriminator_updates",
                             [](const PyTrainer& t) { return t.trainer->discriminator_updates(); })
      .def_property_readonly("generator_updates",
                             [](const PyTrainer& t) { return t.trainer->generator_updates(); })
      .def_property_readonly("enhanced_pool_size",
                             [](const PyTrainer& t) { return t.trainer->pools().enhanced.size(); })
      .def_property_readonly("novel_pool_size",
                             [](const PyTrainer& t) { return t.trainer->pools().novel.size(); })
      .def_property_readonly("model", [](const PyTrainer& t) { return t.trainer->model(); })
      .def("report_csv", [](const PyTrainer& t, bool timing) { return t.trainer->report().to_csv(timing); },
           py::arg("with_timing") = false)
      .def("save_checkpoint", [](const PyTrainer& t, const std::filesystem::path& p) {
        save_checkpoint(t.trainer->snapshot(), p);
      });

  m.def(
      "evaluate",
      [](const MkfnetModel& model, const DatasetBundle& bundle, const std::string& mode,
         std::size_t n_syn, std::uint64_t seed, std::size_t k) {
        return metrics_dict(evaluate(model, bundle, EvalOptions{parse_eval_mode(mode), n_syn, seed, k}));
      },
      py::arg("model"), py::arg("dataset"), py::arg("mode") = "gzsl",
      py::arg("n_syn") = kDefaultSyntheticPerClass, py::arg("seed") = 1,
      py::arg("k") = kDefaultRetrievalK);

  m.def(
      "retrieve",
      [](const MkfnetModel& model, const DatasetBundle& bundle, int class_id, std::size_t k,
         std::size_t n_syn, std::uint64_t seed) {
        std::map<int, std::vector<double>> semantics;
        for (const auto& c : bundle.classes) {
          if (c.species_id == class_id) semantics.emplace(c.species_id, c.semantic);
        }
        std::vector<std::vector<double>> pool;
        for (const auto& s : bundle.samples) pool.push_back(s.visual);
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& r : retrieve_topk(synthesize_prototypes(model, semantics, n_syn, seed),
                                           pool, class_id, k)) {
          out.emplace_back(r.sample, r.similarity);
        }
        return out;
      },
      py::arg("model"), py::arg("dataset"), py::arg("class_id"), py::arg("k") = kDefaultRetrievalK,
      py::arg("n_syn") = kDefaultSyntheticPerClass, py::arg("seed") = 1);

  m.def("harmonic_mean", &harmonic_mean, py::arg("seen"), py::arg("unseen"));
  m.def(
      "ausuc",
      [](const std::vector<std::pair<double, double>>& points) { return ausuc(points); },
      py::arg("points"), "Area under (seen, unseen) accuracy points");
  m.def(
      "mutate",
      [](const std::vector<double>& parent, const std::vector<std::size_t>& positions,
         std::uint64_t seed) {
        Rng rng(seed);
        return mutate(parent, positions, rng);
      },
      py::arg("parent"), py::arg("positions"), py::arg("seed") = 0);
  m.def(
      "crossover",
      [](const std::vector<double>& a, const std::vector<double>& b,
         const std::vector<std::size_t>& positions) { return crossover(a, b, positions); },
      py::arg("a"), py::arg("b"), py::arg("positions"));
}
