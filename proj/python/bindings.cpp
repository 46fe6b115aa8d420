#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ngpbo/bayesopt.hpp"
#include "ngpbo/checkpoint.hpp"
#include "ngpbo/data.hpp"
#include "ngpbo/ngp.hpp"
#include "ngpbo/training.hpp"

namespace py = pybind11;
using namespace ngpbo;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Transfer Bayesian optimization with neural mean/covariance GP surrogates";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<Task>(m, "Task")
        .def(py::init([](std::string id, Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::VectorXd r) {
                 Task t{std::move(id), std::move(x), std::move(y), std::move(r)};
                 t.validate();
                 return t;
             }),
             py::arg("id"), py::arg("x"), py::arg("y"), py::arg("r"))
        .def_readonly("id", &Task::id)
        .def_readonly("x", &Task::x)
        .def_readonly("y", &Task::y)
        .def_readonly("r", &Task::r)
        .def("__repr__", [](const Task& t) {
            return "<Task '" + t.id + "' n=" + std::to_string(t.n()) + " m=" + std::to_string(t.m()) +
                   " s=" + std::to_string(t.s()) + ">";
        });

    py::class_<DatasetMeta>(m, "DatasetMeta")
        .def_readonly("m", &DatasetMeta::m)
        .def_readonly("s", &DatasetMeta::s)
        .def_readonly("seed", &DatasetMeta::seed)
        .def_readonly("generator", &DatasetMeta::generator);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("meta", &Dataset::meta)
        .def_readonly("tasks", &Dataset::tasks);

    m.def("generate_synthetic", &generate_synthetic, py::arg("n_tasks"), py::arg("seed"),
          py::arg("n_points") = 500);
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def(
        "split_tasks",
        [](const Dataset& ds, int source, int validation, int target, std::uint64_t seed) {
            const TaskSplit s = split_tasks(ds, SplitSpec{source, validation, target, seed});
            return py::make_tuple(s.source, s.validation, s.target);
        },
        py::arg("dataset"), py::arg("source"), py::arg("validation"), py::arg("target"),
        py::arg("seed") = 0);

    py::class_<NgpConfig>(m, "NgpConfig")
        .def_readonly("use_descriptor", &NgpConfig::use_descriptor)
        .def_readonly("use_mean_net", &NgpConfig::use_mean_net)
        .def_readonly("use_embed_net", &NgpConfig::use_embed_net)
        .def_property_readonly("variant", &NgpConfig::variant_name);

    m.def(
        "make_config",
        [](bool use_r, bool use_m, bool use_k, int feature_dim, int descriptor_dim, int hidden,
           const std::string& kernel) {
            return NgpConfig::make(use_r, use_m, use_k, feature_dim, descriptor_dim, hidden,
                                   kernel_kind_from_string(kernel));
        },
        py::arg("use_r"), py::arg("use_m"), py::arg("use_k"), py::arg("feature_dim"),
        py::arg("descriptor_dim"), py::arg("hidden") = 32, py::arg("kernel") = "rbf");

    py::class_<MlpParams, std::shared_ptr<MlpParams>>(m, "MlpParams")
        .def_property_readonly("input_dim", [](const MlpParams& p) { return p.arch.input_dim(); })
        .def("predict", [](const MlpParams& p, const Eigen::VectorXd& input) {
            return mlp_forward(p, input)(0);
        });

    py::class_<NgpModel, std::shared_ptr<NgpModel>>(m, "NgpModel")
        .def_readonly("config", &NgpModel::config)
        .def_property_readonly("variant", [](const NgpModel& mo) { return mo.config.variant_name(); })
        .def_property_readonly("noise_variance", &NgpModel::noise_variance)
        .def(
            "posterior",
            [](const NgpModel& mo, const Eigen::VectorXd& r, const Eigen::MatrixXd& x_obs,
               const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& x_query, bool include_noise) {
                const Posterior p = posterior(mo, r, x_obs, y_obs, x_query, include_noise);
                return py::make_tuple(p.mean, p.variance);
            },
            py::arg("r"), py::arg("x_obs"), py::arg("y_obs"), py::arg("x_query"),
            py::arg("include_observation_noise") = false)
        .def("log_marginal_likelihood",
             [](const NgpModel& mo, const Task& t) { return log_marginal_likelihood(mo, t); })
        .def("mean", [](const NgpModel& mo, const Eigen::MatrixXd& x, const Eigen::VectorXd& r) {
            return mean_vector(mo, x, r);
        });

    py::class_<EpochRecord>(m, "EpochRecord")
        .def_readonly("train_lml_per_obs", &EpochRecord::train_lml_per_obs)
        .def_readonly("val_lml_per_obs", &EpochRecord::val_lml_per_obs)
        .def_readonly("seconds", &EpochRecord::seconds);

    py::class_<TrainHistory>(m, "TrainHistory")
        .def_readonly("epochs", &TrainHistory::epochs)
        .def_readonly("best_epoch", &TrainHistory::best_epoch);

    m.def(
        "train",
        [](const NgpConfig& config, const std::vector<Task>& source, const std::vector<Task>& val,
           int batch_size, double learning_rate, int max_epochs, int patience, std::uint64_t seed,
           bool center_y) {
            TrainConfig tc{batch_size, learning_rate, max_epochs, patience, seed, center_y};
            auto [model, history] = train(config, source, val, tc);
            return py::make_tuple(std::make_shared<NgpModel>(std::move(model)), history);
        },
        py::arg("config"), py::arg("source_tasks"), py::arg("val_tasks"), py::arg("batch_size") = 32,
        py::arg("learning_rate") = 1e-2, py::arg("max_epochs") = 500, py::arg("patience") = 20,
        py::arg("seed") = 0, py::arg("center_y") = false);

    m.def("validation_score", &validation_score, py::arg("model"), py::arg("tasks"));

    m.def(
        "save_model",
        [](const NgpModel& model, const std::string& path) { save_model(model, path); },
        py::arg("model"), py::arg("path"));
    m.def(
        "load_model",
        [](const std::string& path) { return std::make_shared<NgpModel>(load_model(path)); },
        py::arg("path"));

    m.def("expected_improvement", &expected_improvement, py::arg("mu"), py::arg("sigma"),
          py::arg("y_best"));
    m.def(
        "gp_baseline_posterior",
        [](const Eigen::MatrixXd& x_obs, const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& x_query,
           std::uint64_t seed) {
            const Posterior p = gp_baseline_posterior(x_obs, y_obs, x_query, seed);
            return py::make_tuple(p.mean, p.variance);
        },
        py::arg("x_obs"), py::arg("y_obs"), py::arg("x_query"), py::arg("seed") = 0);

    py::class_<CandidatePool>(m, "CandidatePool")
        .def(py::init([](Eigen::MatrixXd x, Eigen::VectorXd y_true, Eigen::VectorXd r) {
                 CandidatePool p{std::move(x), std::move(y_true), std::move(r)};
                 p.validate();
                 return p;
             }),
             py::arg("x"), py::arg("y_true"), py::arg("r"))
        .def_static("from_task", &CandidatePool::from_task, py::arg("task"))
        .def_readonly("x", &CandidatePool::x)
        .def_readonly("y_true", &CandidatePool::y_true)
        .def_readonly("r", &CandidatePool::r)
        .def_property_readonly("size", &CandidatePool::size);

    py::class_<Strategy>(m, "Strategy").def_readonly("name", &Strategy::name);
    m.def("strategy_ngp", [](std::shared_ptr<NgpModel> mo) { return Strategy::ngp(std::move(mo)); },
          py::arg("model"));
    m.def("strategy_gp", &Strategy::gp);
    m.def("strategy_tgp", [](std::shared_ptr<NgpModel> mo) { return Strategy::tgp(std::move(mo)); },
          py::arg("model"));
    m.def("strategy_nn", [](std::shared_ptr<MlpParams> net) { return Strategy::nn(std::move(net)); },
          py::arg("net"));
    m.def("strategy_nn_r", [](std::shared_ptr<MlpParams> net) { return Strategy::nn_r(std::move(net)); },
          py::arg("net"));
    m.def("strategy_random", &Strategy::random_search);

    m.def(
        "nn_baseline_fit",
        [](const std::vector<Task>& source, const std::vector<Task>& val, bool use_descriptor,
           std::uint64_t seed) {
            return std::make_shared<MlpParams>(nn_baseline_fit(source, val, use_descriptor, seed));
        },
        py::arg("source_tasks"), py::arg("val_tasks"), py::arg("use_descriptor") = false,
        py::arg("seed") = 0);

    py::class_<BoTrace>(m, "BoTrace")
        .def_readonly("queried_indices", &BoTrace::queried_indices)
        .def_readonly("observed_values", &BoTrace::observed_values)
        .def_readonly("best_so_far", &BoTrace::best_so_far)
        .def_property_readonly("evals_to_max", [](const BoTrace& t) -> py::object {
            if (t.evals_to_max) return py::int_(*t.evals_to_max);
            return py::none();
        });

    m.def("run_bo", &run_bo, py::arg("strategy"), py::arg("pool"), py::arg("budget"), py::arg("seed") = 0);
}
