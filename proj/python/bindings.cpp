#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "adasde/dataset.hpp"
#include "adasde/distill.hpp"
#include "adasde/harness.hpp"
#include "adasde/metrics.hpp"
#include "adasde/schedule.hpp"
#include "adasde/score_model.hpp"
#include "adasde/solvers.hpp"

namespace py = pybind11;
using namespace adasde;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointCloud cloud_from_array(const DoubleArray& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2 || buf.shape[1] != 2)
        throw py::value_error("expected an (n, 2) float array");
    PointCloud cloud;
    cloud.points.resize(static_cast<std::size_t>(buf.shape[0]));
    const double* data = static_cast<const double*>(buf.ptr);
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
        cloud.points[i] = {data[2 * i], data[2 * i + 1]};
    return cloud;
}

py::array_t<double> cloud_to_array(const PointCloud& cloud) {
    py::array_t<double> out({static_cast<py::ssize_t>(cloud.size()), py::ssize_t(2)});
    double* data = out.mutable_data();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        data[2 * i] = cloud.points[i].x;
        data[2 * i + 1] = cloud.points[i].y;
    }
    return out;
}

std::vector<StepParams> theta_from_array(const DoubleArray& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2 || buf.shape[1] != 4)
        throw py::value_error("theta must be an (n_steps, 4) array of [gamma, xi, lambda, mu]");
    std::vector<StepParams> theta(static_cast<std::size_t>(buf.shape[0]));
    const double* data = static_cast<const double*>(buf.ptr);
    for (std::size_t i = 0; i < theta.size(); ++i)
        theta[i] = {data[4 * i], data[4 * i + 1], data[4 * i + 2], data[4 * i + 3]};
    return theta;
}

py::array_t<double> theta_to_array(const std::vector<StepParams>& theta) {
    py::array_t<double> out({static_cast<py::ssize_t>(theta.size()), py::ssize_t(4)});
    double* data = out.mutable_data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        data[4 * i] = theta[i].gamma;
        data[4 * i + 1] = theta[i].xi;
        data[4 * i + 2] = theta[i].lambda_scale;
        data[4 * i + 3] = theta[i].mu;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Few-step diffusion sampling with learnable per-step stochastic coefficients";

    py::class_<TimeSchedule>(m, "TimeSchedule")
        .def_property_readonly("levels", [](const TimeSchedule& s) { return s.levels; })
        .def_property_readonly("n_steps", &TimeSchedule::n_steps)
        .def_property_readonly("scheme", [](const TimeSchedule& s) { return scheme_name(s.scheme); })
        .def("__repr__", [](const TimeSchedule& s) {
            return "TimeSchedule(" + scheme_name(s.scheme) + ", n_steps=" +
                   std::to_string(s.n_steps()) + ")";
        });

    m.def("build_uniform_schedule", &build_uniform_schedule, py::arg("n_steps"),
          py::arg("sigma_max") = 80.0, py::arg("sigma_min") = 0.002, py::arg("rho") = 1.0,
          py::arg("eps_s") = 1e-3);
    m.def("build_polynomial_schedule", &build_polynomial_schedule, py::arg("n_steps"),
          py::arg("sigma_max") = 80.0, py::arg("sigma_min") = 0.002, py::arg("rho") = 7.0);
    m.def("build_logsnr_schedule", &build_logsnr_schedule, py::arg("n_steps"),
          py::arg("sigma_max") = 80.0, py::arg("sigma_min") = 0.002);

    m.def(
        "make_double_circle",
        [](int n, double r_outer, double r_inner, double noise_sigma, std::uint64_t seed) {
            return cloud_to_array(make_double_circle(n, r_outer, r_inner, noise_sigma, seed));
        },
        py::arg("n_points"), py::arg("r_outer") = 0.8, py::arg("r_inner") = 0.6,
        py::arg("noise_sigma") = 0.1, py::arg("seed") = 0);

    py::class_<ScoreField>(m, "ScoreField")
        .def(
            "score",
            [](const ScoreField& f, const DoubleArray& xs, double t) {
                const PointCloud cloud = cloud_from_array(xs);
                PointCloud out = cloud;
                f.score_batch(cloud.points, t, out.points);
                return cloud_to_array(out);
            },
            py::arg("xs"), py::arg("t"))
        .def(
            "drift",
            [](const ScoreField& f, const DoubleArray& xs, double t) {
                const PointCloud cloud = cloud_from_array(xs);
                PointCloud out = cloud;
                f.drift_batch(cloud.points, t, out.points);
                return cloud_to_array(out);
            },
            py::arg("xs"), py::arg("t"));

    py::class_<MixtureScoreOracle, ScoreField>(m, "MixtureScoreOracle")
        .def(py::init([](const DoubleArray& centers, double base_sigma) {
                 return MixtureScoreOracle(cloud_from_array(centers), base_sigma);
             }),
             py::arg("centers"), py::arg("base_sigma"))
        .def("log_density",
             [](const MixtureScoreOracle& o, double x, double y, double t) {
                 return o.log_density({x, y}, t);
             })
        .def("subsampled", &MixtureScoreOracle::subsampled, py::arg("max_centers"), py::arg("seed"))
        .def(
            "sample_data",
            [](const MixtureScoreOracle& o, int n, std::uint64_t seed) {
                return cloud_to_array(o.sample_data(n, seed));
            },
            py::arg("n_points"), py::arg("seed"));

    py::class_<MlpScoreField, ScoreField>(m, "Denoiser")
        .def_property_readonly("sigma_data", &MlpScoreField::sigma_data)
        .def("save", [](const MlpScoreField& f, const std::filesystem::path& path) {
            save_checkpoint(path, f.params(), f.sigma_data());
        });

    m.def(
        "train_denoiser",
        [](const DoubleArray& data, int hidden_width, int n_layers, double learning_rate,
           int batch_size, int n_iters, double sigma_data, std::uint64_t seed) {
            TrainConfig cfg;
            cfg.hidden_width = hidden_width;
            cfg.n_layers = n_layers;
            cfg.learning_rate = learning_rate;
            cfg.batch_size = batch_size;
            cfg.n_iters = n_iters;
            cfg.sigma_data = sigma_data;
            cfg.seed = seed;
            const PointCloud cloud = cloud_from_array(data);
            return MlpScoreField(train(cfg, cloud), cfg.sigma_data);
        },
        py::arg("data"), py::arg("hidden_width") = 128, py::arg("n_layers") = 3,
        py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 512, py::arg("n_iters") = 20000,
        py::arg("sigma_data") = 0.5, py::arg("seed") = 0);

    m.def("load_denoiser",
          [](const std::filesystem::path& path) { return load_checkpoint(path); });

    m.def(
        "sample",
        [](const ScoreField& field, const TimeSchedule& schedule, const std::string& method,
           py::object theta, bool afs, std::uint64_t seed, int n_points, bool record) {
            SamplerConfig cfg;
            cfg.schedule = schedule;
            cfg.method = method_from_name(method);
            cfg.afs = afs;
            cfg.seed = seed;
            if (!theta.is_none()) cfg.theta = theta_from_array(theta.cast<DoubleArray>());
            const Trajectory traj = adasde::sample(cfg, field, n_points, record);
            py::list states;
            for (const PointCloud& s : traj.states) states.append(cloud_to_array(s));
            py::dict out;
            out["times"] = traj.times;
            out["states"] = states;
            out["nfe"] = traj.nfe;
            return out;
        },
        py::arg("field"), py::arg("schedule"), py::arg("method") = "adasde",
        py::arg("theta") = py::none(), py::arg("afs") = false, py::arg("seed") = 0,
        py::arg("n_points") = 2048, py::arg("record") = false);

    m.def(
        "optimize_theta",
        [](const ScoreField& field, const TimeSchedule& student, int m_intermediate,
           const std::string& teacher, const std::string& student_method, double learning_rate,
           int n_rounds, int batch, std::uint64_t seed) {
            DistillConfig cfg;
            cfg.student = student;
            cfg.m_intermediate = m_intermediate;
            cfg.teacher_method = method_from_name(teacher);
            cfg.student_method = method_from_name(student_method);
            cfg.learning_rate = learning_rate;
            cfg.n_rounds = n_rounds;
            cfg.batch_trajectories = batch;
            cfg.seed = seed;
            const DistillResult result = optimize_theta(field, cfg);
            py::dict out;
            out["theta"] = theta_to_array(result.theta.steps);
            py::list history;
            for (const auto& r : result.history)
                history.append(py::make_tuple(r.round, r.step, r.loss_before, r.loss_after));
            out["history"] = history;
            out["warnings"] = result.warnings;
            return out;
        },
        py::arg("field"), py::arg("student"), py::arg("m") = 3, py::arg("teacher") = "dpm2",
        py::arg("student_method") = "adasde", py::arg("learning_rate") = 0.2,
        py::arg("n_rounds") = 5, py::arg("batch") = 2000, py::arg("seed") = 0);

    m.def(
        "endpoint_mse",
        [](const ScoreField& field, const TimeSchedule& student, int m_intermediate,
           const std::string& teacher, const std::string& student_method, py::object theta,
           int n_eval, std::uint64_t seed) {
            DistillConfig cfg;
            cfg.student = student;
            cfg.m_intermediate = m_intermediate;
            cfg.teacher_method = method_from_name(teacher);
            cfg.student_method = method_from_name(student_method);
            std::vector<StepParams> th(static_cast<std::size_t>(student.n_steps()));
            if (!theta.is_none()) th = theta_from_array(theta.cast<DoubleArray>());
            return endpoint_mse(field, cfg, th, n_eval, seed);
        },
        py::arg("field"), py::arg("student"), py::arg("m") = 3, py::arg("teacher") = "dpm2",
        py::arg("student_method") = "adasde", py::arg("theta") = py::none(),
        py::arg("n_eval") = 1024, py::arg("seed") = 0);

    m.def(
        "w1_1d",
        [](std::vector<double> a, std::vector<double> b) {
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            return w1_1d(a, b);
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "sliced_w1",
        [](const DoubleArray& a, const DoubleArray& b, int n_proj, std::uint64_t seed) {
            return sliced_w1(cloud_from_array(a), cloud_from_array(b), n_proj, seed);
        },
        py::arg("a"), py::arg("b"), py::arg("n_proj") = 128, py::arg("seed") = 0);
    m.def(
        "exact_w1_small",
        [](const DoubleArray& a, const DoubleArray& b) {
            return exact_w1_small(cloud_from_array(a), cloud_from_array(b));
        },
        py::arg("a"), py::arg("b"));
    m.def("gaussian_tail_q", &gaussian_tail_q, py::arg("r"));
    m.def(
        "contraction_lambda",
        [](double diameter_bound, double t, double delta_t, double gamma) {
            return contraction_lambda({diameter_bound, t, delta_t, gamma});
        },
        py::arg("diameter_bound"), py::arg("t"), py::arg("delta_t"), py::arg("gamma"));

    m.def(
        "error_decomposition",
        [](const ScoreField& field, const MixtureScoreOracle& oracle, const DoubleArray& data,
           const std::vector<int>& steps, const std::vector<double>& gammas,
           const std::string& scheme, double sigma_max, double sigma_min, double rho, double t_mid,
           double partial_fraction, int n_eval, std::uint64_t seed) {
            DecompositionConfig cfg;
            cfg.plan.scheme = scheme_from_name(scheme);
            cfg.plan.sigma_max = sigma_max;
            cfg.plan.sigma_min = sigma_min;
            cfg.plan.rho = rho;
            cfg.steps = steps;
            cfg.gammas = gammas;
            cfg.t_mid = t_mid;
            cfg.partial_fraction = partial_fraction;
            cfg.n_eval = n_eval;
            cfg.seed = seed;
            const ErrorReport report =
                error_decomposition(field, oracle, cloud_from_array(data), cfg);
            py::list rows;
            for (const ErrorRow& r : report.rows) {
                py::dict row;
                row["method"] = r.method;
                row["gamma"] = r.gamma;
                row["n_steps"] = r.n_steps;
                row["gradient_error"] = r.gradient_error;
                row["discretization_error"] = r.discretization_error;
                row["total_error"] = r.total_error;
                row["seed"] = r.seed;
                rows.append(row);
            }
            return rows;
        },
        py::arg("field"), py::arg("oracle"), py::arg("data"), py::arg("steps"), py::arg("gammas"),
        py::arg("scheme") = "polynomial", py::arg("sigma_max") = 80.0, py::arg("sigma_min") = 0.002,
        py::arg("rho") = 7.0, py::arg("t_mid") = 0.8, py::arg("partial_fraction") = 1.0 / 3.0,
        py::arg("n_eval") = 2048, py::arg("seed") = 0);
}
