#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "probebench/error.hpp"
#include "probebench/leaderboard.hpp"
#include "probebench/metrics.hpp"
#include "probebench/runner.hpp"
#include "probebench/scoring.hpp"

namespace py = pybind11;
using namespace probebench;

namespace {

std::string leaderboard_json(const std::filesystem::path& output_dir, const std::string& phase, bool weighted,
                             bool ghost, double epsilon) {
  const auto db = ScoringDatabase::open(output_dir / kDatabaseFile);
  return to_json(rebuild_leaderboard(db, phase, {weighted, ghost, epsilon})).dump();
}

std::string trajectory_json(const std::filesystem::path& output_dir, const std::string& phase, bool weighted,
                            bool ghost, double epsilon) {
  const auto db = ScoringDatabase::open(output_dir / kDatabaseFile);
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& step : replay_rank_trajectory(db, phase, {weighted, ghost, epsilon})) {
    doc.push_back({{"step", step.step}, {"submitted", step.submitted}, {"ranks", step.ranks}});
  }
  return doc.dump();
}

py::dict evaluate(const std::filesystem::path& submission, const std::filesystem::path& annotations,
                  const std::filesystem::path& output_dir, const EvalConfig& config, const std::string& method,
                  const std::string& phase, std::size_t workers) {
  RunOptions run;
  run.workers = workers;
  EvaluationResult result;
  {
    py::gil_scoped_release release;
    result = evaluate_submission({submission, annotations, output_dir, config, method, phase}, run);
  }
  py::dict out;
  out["record"] = to_json(result.record).dump();
  out["experiment_dir"] = result.experiment_dir;
  out["leaderboard"] = result.leaderboard;
  return out;
}

}  // namespace

PYBIND11_MODULE(_probebench, m) {
  m.doc() = "Linear-probing benchmark core";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::enum_<ProbeKind>(m, "ProbeKind")
      .value("Linear", ProbeKind::Linear)
      .value("Mlp1", ProbeKind::Mlp1)
      .value("Mlp2", ProbeKind::Mlp2);

  py::class_<EvalConfig>(m, "EvalConfig")
      .def(py::init<>())
      .def_readwrite("embedding_dim", &EvalConfig::embedding_dim)
      .def_readwrite("batch_size", &EvalConfig::batch_size)
      .def_readwrite("epochs", &EvalConfig::epochs)
      .def_readwrite("learning_rate", &EvalConfig::learning_rate)
      .def_readwrite("k_folds", &EvalConfig::k_folds)
      .def_readwrite("standardize_embeddings", &EvalConfig::standardize_embeddings)
      .def_readwrite("normalize_labels", &EvalConfig::normalize_labels)
      .def_readwrite("task_filter", &EvalConfig::task_filter)
      .def_readwrite("seed", &EvalConfig::seed)
      .def_readwrite("epsilon", &EvalConfig::epsilon)
      .def_readwrite("split_ratio", &EvalConfig::split_ratio)
      .def_readwrite("probe_kind", &EvalConfig::probe_kind)
      .def_readwrite("mlp_hidden", &EvalConfig::mlp_hidden)
      .def_readwrite("ghost_task", &EvalConfig::ghost_task)
      .def_readwrite("weighted_ranking", &EvalConfig::weighted_ranking)
      .def("validate", [](const EvalConfig& c) { validate(c); })
      .def("to_yaml", [](const EvalConfig& c) { return render_config(c); })
      .def("__eq__", [](const EvalConfig& a, const EvalConfig& b) { return a == b; });

  m.def("load_config", [](const std::filesystem::path& path) { return load_config(path); }, py::arg("path"));
  m.def("parse_config", &parse_config_text, py::arg("text"));

  py::class_<TaskQuality>(m, "TaskQuality")
      .def_readonly("task", &TaskQuality::task)
      .def_readonly("mean_s", &TaskQuality::mean_s)
      .def_readonly("std_s", &TaskQuality::std_s)
      .def_readonly("q", &TaskQuality::q)
      .def_readonly("k_used", &TaskQuality::k_used)
      .def_readonly("unreliable", &TaskQuality::unreliable);

  m.def(
      "quality_score",
      [](const std::vector<double>& folds, double epsilon, const std::string& task) {
        return quality_score(folds, epsilon, task);
      },
      py::arg("fold_scores"), py::arg("epsilon") = kDefaultEpsilon, py::arg("task") = "");
  m.def("rank_values", &rank_values, py::arg("values"), py::arg("descending") = true);

  py::class_<TaskWeights>(m, "TaskWeights")
      .def_readonly("weights", &TaskWeights::weights)
      .def_readonly("stds", &TaskWeights::stds)
      .def_readonly("ghost_weight", &TaskWeights::ghost_weight)
      .def_readonly("uniform_fallback", &TaskWeights::uniform_fallback);
  m.def("task_weights", &task_weights, py::arg("q_matrix"), py::arg("ghost") = false,
        py::arg("epsilon") = kDefaultEpsilon);

  m.def(
      "final_ranking",
      [](const std::map<std::string, std::map<std::string, double>>& experiments, bool weighted, bool ghost,
         double epsilon) {
        const auto ranking = final_ranking(experiments, {weighted, ghost, epsilon});
        py::list entries;
        for (const auto& e : ranking.entries) {
          py::dict d;
          d["experiment"] = e.experiment;
          d["q_per_task"] = e.q_per_task;
          d["task_ranks"] = e.task_ranks;
          d["mean_q"] = e.mean_q;
          d["weighted_score"] = e.weighted_score;
          d["rank"] = e.final_rank;
          entries.append(d);
        }
        return py::make_tuple(ranking.weights, entries);
      },
      py::arg("experiments"), py::arg("weighted") = true, py::arg("ghost") = false,
      py::arg("epsilon") = kDefaultEpsilon);

  using Vec = std::vector<double>;
  m.def("r_squared", [](const Vec& y, const Vec& p) { return r_squared(y, p); }, py::arg("y_true"), py::arg("y_pred"));
  m.def("mse", [](const Vec& y, const Vec& p) { return mse(y, p); }, py::arg("y_true"), py::arg("y_pred"));
  m.def("mae", [](const Vec& y, const Vec& p) { return mae(y, p); }, py::arg("y_true"), py::arg("y_pred"));
  m.def("roc_auc", [](const Vec& y, const Vec& s) { return roc_auc(y, s); }, py::arg("y_true"), py::arg("scores"));
  m.def(
      "classification_metrics",
      [](const std::vector<double>& y_true, const std::vector<double>& prob) {
        const auto cm = confusion(y_true, prob);
        return std::map<std::string, double>{{"f1", f1(cm)},
                                             {"precision", precision(cm)},
                                             {"recall", recall(cm)},
                                             {"accuracy", accuracy(cm)}};
      },
      py::arg("y_true"), py::arg("probabilities"));

  m.def("_evaluate", &evaluate, py::arg("submission"), py::arg("annotations"), py::arg("output_dir"),
        py::arg("config"), py::arg("method"), py::arg("phase"), py::arg("workers") = 0);
  m.def("_leaderboard", &leaderboard_json, py::arg("output_dir"), py::arg("phase"), py::arg("weighted") = true,
        py::arg("ghost") = false, py::arg("epsilon") = kDefaultEpsilon);
  m.def("_trajectory", &trajectory_json, py::arg("output_dir"), py::arg("phase"), py::arg("weighted") = true,
        py::arg("ghost") = false, py::arg("epsilon") = kDefaultEpsilon);
  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "probebench");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        py::gil_scoped_release release;
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));
}
