#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "e2efs/baselines.hpp"
#include "e2efs/data.hpp"
#include "e2efs/mask.hpp"
#include "e2efs/metrics.hpp"
#include "e2efs/trainer.hpp"

#ifdef E2EFS_WITH_CLI
#include "cli.hpp"
#endif

namespace py = pybind11;
using namespace e2efs;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<long, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw std::invalid_argument("X must be 2-dimensional");
    const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
    return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Labels to_labels(const IntArray& y) {
    if (y.ndim() != 1) throw std::invalid_argument("y must be 1-dimensional");
    Labels out(y.data(), y.data() + y.shape(0));
    return out;
}

Dataset to_dataset(const Array& X, const IntArray& y) {
    Dataset d;
    d.X = to_matrix(X);
    d.y = to_labels(y);
    if (d.y.size() != d.samples()) throw std::invalid_argument("X and y disagree on the number of samples");
    int top = -1;
    for (int v : d.y) top = std::max(top, v);
    d.class_count = static_cast<std::size_t>(top + 1);
    d.validate();
    return d;
}

py::array_t<double> scores(const FeatureRanking& r) { return py::array_t<double>(r.scores.size(), r.scores.data()); }

py::dict run_select(const Array& X, const IntArray& y, std::size_t M, const std::string& method, std::uint64_t seed,
                bool normalize, const std::string& model, std::size_t fs_epochs, std::size_t fit_epochs) {
    Dataset d = to_dataset(X, y);
    if (normalize) d.X = erf_normalize(d.X, compute_norm_stats(d.X));
    const auto variant = parse_variant(method);
    auto mask = MaskState::all_ones(d.features(), M, variant);
    auto cfg = TrainConfig::recipe(variant);
    cfg.seed = seed;
    if (fs_epochs) {
        cfg.fs_extra_epochs = fs_epochs;
        mask.T = static_cast<double>(fs_epochs);
    }
    if (fit_epochs) cfg.fit_epochs = fit_epochs;
    ModelConfig mc;
    mc.kind = parse_model_kind(model);
    mc.seed = seed;
    auto net = make_model(mc, d.features(), d.class_count, d.samples());
    FSResult r;
    {
        py::gil_scoped_release release;
        r = train(d, *net, mask, cfg);
    }
    py::dict out;
    out["selected"] = r.selected_indices;
    out["gamma"] = py::array_t<double>(r.gamma.size(), r.gamma.data());
    out["converged"] = r.converged;
    out["nnz"] = r.final_nnz;
    out["loss"] = r.final_l12 + r.final_lM;
    return out;
}

} // namespace

PYBIND11_MODULE(_e2efs, m) {
    m.doc() = "Feature selection with a differentiable binary mask, plus filter baselines";
    m.attr("__version__") = E2EFS_VERSION;

    m.def(
        "make_synthetic",
        [](std::size_t n, std::size_t informative, std::size_t noise, double flip, std::uint64_t seed) {
            const auto s = make_synthetic({n, informative, noise, flip, seed});
            py::dict out;
            out["X"] = to_array(s.data.X);
            out["y"] = py::array_t<int>(s.data.y.size(), s.data.y.data());
            out["informative"] = s.informative;
            return out;
        },
        py::arg("n_samples") = 2000, py::arg("n_informative") = 10, py::arg("n_noise") = 90,
        py::arg("flip_prob") = 0.0, py::arg("seed") = 0);

    m.def(
        "erf_normalize", [](const Array& X) {
            const Matrix x = to_matrix(X);
            return to_array(erf_normalize(x, compute_norm_stats(x)));
        },
        py::arg("X"), "Per-feature erf((x - mean) / (2 std)) with statistics from X itself.");

    m.def("l12_loss", [](const Vector& g) { return l12_loss(g); }, py::arg("gamma"));
    m.def("lM_loss", [](const Vector& g, double M, double mu) { return lM_loss(g, M, mu); }, py::arg("gamma"),
          py::arg("M"), py::arg("mu") = 1.0);
    m.def("reg_gradient", [](const Vector& g, double M, double mu) { return reg_gradient(g, M, mu); },
          py::arg("gamma"), py::arg("M"), py::arg("mu") = 1.0);
    m.def("alpha_schedule", &alpha_schedule, py::arg("t"), py::arg("T"));
    m.def(
        "effective_M",
        [](std::size_t nnz, std::size_t M, double rho, const std::string& variant) {
            return effective_M(nnz, M, rho, parse_variant(variant));
        },
        py::arg("nnz"), py::arg("M"), py::arg("rho") = 0.75, py::arg("variant") = "e2efs");
    m.def("balanced_accuracy",
          [](const IntArray& pred, const IntArray& truth) { return balanced_accuracy(to_labels(pred), to_labels(truth)); },
          py::arg("predictions"), py::arg("labels"));

    m.def("fisher_scores", [](const Array& X, const IntArray& y) { return scores(fisher_rank(to_dataset(X, y))); },
          py::arg("X"), py::arg("y"));
    m.def(
        "mim_scores",
        [](const Array& X, const IntArray& y, std::size_t bins) { return scores(mim_rank(to_dataset(X, y), bins)); },
        py::arg("X"), py::arg("y"), py::arg("bins") = 10);
    m.def(
        "relieff_scores",
        [](const Array& X, const IntArray& y, std::size_t k) {
            return scores(relieff_rank(to_dataset(X, y), {k, 0, 0}));
        },
        py::arg("X"), py::arg("y"), py::arg("k_neighbors") = 10);

    m.def("select", &run_select, py::arg("X"), py::arg("y"), py::arg("M"), py::arg("method") = "e2efs",
          py::arg("seed") = 0, py::arg("normalize") = true, py::arg("model") = "naive", py::arg("fs_epochs") = 0,
          py::arg("fit_epochs") = 0,
          "Trains through the mask and returns the selection. fs_epochs > 0 also sets T to the same value.");

#ifdef E2EFS_WITH_CLI
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
#endif
}
