#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dimml/checkpoint.hpp"
#include "dimml/config.hpp"
#include "dimml/dimsep.hpp"
#include "dimml/errors.hpp"
#include "dimml/experiment.hpp"
#include "dimml/inference.hpp"
#include "dimml/losses.hpp"
#include "dimml/synthdata.hpp"
#include "dimml/tape.hpp"
#include "dimml/tensor.hpp"

namespace py = pybind11;
using namespace dimml;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& a) {
    py::buffer_info info = a.request();
    if (info.ndim < 1 || info.ndim > 2) throw validation_error("arrays must be 1-D or 2-D");
    std::vector<int> shape(info.shape.begin(), info.shape.end());
    const double* p = static_cast<const double*>(info.ptr);
    return Tensor::from(std::move(shape), std::vector<double>(p, p + info.size));
}

Tensor to_matrix(const DoubleArray& a, const char* name) {
    Tensor t = to_tensor(a);
    if (t.rank() != 2) throw validation_error(std::string(name) + " must be a 2-D array");
    return t;
}

Tensor to_rowvec(const DoubleArray& a, const char* name) {
    Tensor t = to_tensor(a);
    if (t.rank() != 1) throw validation_error(std::string(name) + " must be a 1-D array");
    return t;
}

py::array_t<double> to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), static_cast<double*>(out.request().ptr));
    return out;
}

// Dicts and lists travel through the stdlib json module, so the C++ side
// only ever sees nlohmann values.
nlohmann::json pyobj_to_json(const py::object& obj) {
    std::string text;
    if (py::isinstance<py::str>(obj)) {
        text = obj.cast<std::string>();
    } else {
        text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    }
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("invalid json: ") + e.what());
    }
}

py::object json_to_pyobj(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(py::str(j.dump()));
}

py::dict split_to_py(const Dataset& ds) {
    py::list inputs;
    for (const Tensor& x : ds.inputs) inputs.append(to_array(x));
    py::dict d;
    d["inputs"] = inputs;
    d["labels"] = py::cast(ds.labels);
    return d;
}

DimScores scores_from_array(const DoubleArray& scores) {
    DimScores s;
    s.r = to_rowvec(scores, "scores");
    double acc = 0.0;
    for (double v : s.r.data()) acc += v;
    if (s.r.numel() > 0) s.mean = acc / static_cast<double>(s.r.numel());
    return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Competition-free multimodal training: core operations";
    m.attr("__version__") = "0.1.0";

    py::register_exception<validation_error>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<numeric_error>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<io_error>(m, "StorageError", PyExc_OSError);

    // --- numerics ---

    m.def(
        "softmax", [](const DoubleArray& logits) { return to_array(softmax(to_tensor(logits))); },
        py::arg("logits"), "Numerically stable softmax; row-wise for 2-D input.");

    m.def(
        "log_softmax",
        [](const DoubleArray& logits) { return to_array(log_softmax(to_tensor(logits))); },
        py::arg("logits"), "Log-softmax with the same shape rules as softmax().");

    m.def(
        "cross_entropy",
        [](const DoubleArray& logits, const std::vector<int>& labels) {
            Tape tape;
            Var loss =
                cross_entropy(tape, Tape::constant(to_matrix(logits, "logits")), labels);
            return loss.value.value();
        },
        py::arg("logits"), py::arg("labels"),
        "Mean over the batch of -log softmax(logits)[label].");

    // --- inference ---

    m.def(
        "certainty",
        [](const DoubleArray& logits) { return to_array(certainty(to_matrix(logits, "logits"))); },
        py::arg("logits"), "Per-sample winning softmax probability; lies in [1/K, 1].");

    m.def(
        "weighted_logits",
        [](const std::vector<DoubleArray>& logits, double t_lw) {
            std::vector<Tensor> ts;
            ts.reserve(logits.size());
            for (const DoubleArray& a : logits) ts.push_back(to_matrix(a, "logits"));
            auto [combined, weights] = weighted_logits(ts, t_lw);
            py::list w;
            for (const Tensor& t : weights) w.append(to_array(t));
            return py::make_tuple(to_array(combined), w);
        },
        py::arg("logits"), py::arg("t_lw") = 1.0,
        "Certainty-weighted logit combination. Returns (combined [B x K], per-source\n"
        "weight arrays [B]); per sample the source weights sum to 1.");

    // --- dimension separation ---

    m.def(
        "class_centroids",
        [](const DoubleArray& features, const std::vector<int>& labels, int num_classes) {
            return to_array(
                class_centroids(to_matrix(features, "features"), labels, num_classes).centroids);
        },
        py::arg("features"), py::arg("labels"), py::arg("num_classes"),
        "Per-class feature means as a [K x d] array.");

    m.def(
        "dimension_scores",
        [](const DoubleArray& features, const std::vector<int>& labels, int num_classes) {
            Tensor f = to_matrix(features, "features");
            CentroidTable table = class_centroids(f, labels, num_classes);
            DimScores s = dimension_scores(f, labels, table);
            return py::make_tuple(to_array(s.r), s.mean);
        },
        py::arg("features"), py::arg("labels"), py::arg("num_classes"),
        "Per-dimension 1-D nearest-centroid accuracies; returns (scores [d], mean).");

    m.def(
        "separate_dimensions",
        [](const DoubleArray& scores) {
            ModalityPartition p = separate_dimensions(scores_from_array(scores));
            return py::make_tuple(p.effective, p.ineffective);
        },
        py::arg("scores"),
        "Splits dimensions into (effective, ineffective) by comparing each score\n"
        "against the mean; ties land in the ineffective set.");

    m.def(
        "cross_sets",
        [](const std::vector<int>& effective1, const std::vector<int>& effective2,
           int feature_dim) {
            DimensionPartition p =
                partition_from_effective({effective1, effective2}, feature_dim);
            CrossSets c = cross_sets(p.modalities[0], p.modalities[1]);
            return py::make_tuple(c.ne1_e2, c.e1_ne2);
        },
        py::arg("effective1"), py::arg("effective2"), py::arg("feature_dim"),
        "Ordered-pair transfer dimension sets (ne1 & e2, e1 & ne2).");

    // --- transfer losses (forward values) ---

    m.def(
        "duc_loss",
        [](const DoubleArray& h1, const DoubleArray& h2, const std::vector<int>& ne1_e2,
           const std::vector<int>& e1_ne2, double temperature, int direction) {
            Tape tape;
            CrossSets cross{ne1_e2, e1_ne2};
            TransferResult r =
                duc_loss(tape, Tape::constant(to_matrix(h1, "h1")),
                         Tape::constant(to_matrix(h2, "h2")), cross, temperature, direction);
            return py::make_tuple(r.loss.value.value(), r.empty_cross);
        },
        py::arg("h1"), py::arg("h2"), py::arg("ne1_e2"), py::arg("e1_ne2"),
        py::arg("temperature") = 1.0, py::arg("direction") = 1,
        "Unidirectional contrastive transfer value for one direction. Returns\n"
        "(loss, empty_cross); the loss is exactly 0 when the cross set is empty.");

    m.def(
        "contrastive_loss_full",
        [](const DoubleArray& h1, const DoubleArray& h2, double temperature) {
            Tape tape;
            Var loss = contrastive_loss_full(tape, Tape::constant(to_matrix(h1, "h1")),
                                             Tape::constant(to_matrix(h2, "h2")), temperature);
            return loss.value.value();
        },
        py::arg("h1"), py::arg("h2"), py::arg("temperature") = 1.0,
        "Symmetric InfoNCE over all feature dimensions (forward value).");

    // --- data ---

    m.def(
        "complementary_recipe",
        [] { return json_to_pyobj(recipe_to_json(complementary_recipe())); },
        "Default two-modality recipe with complementary class coverage, as a dict.");

    m.def(
        "reliability_skewed_recipe",
        [] { return json_to_pyobj(recipe_to_json(reliability_skewed_recipe())); },
        "Complementary recipe with modality 1 corrupted on a fraction of samples.");

    m.def(
        "generate",
        [](const py::object& recipe) {
            SyntheticRecipe r = recipe.is_none() ? complementary_recipe()
                                                 : recipe_from_json(pyobj_to_json(recipe));
            auto [train, test] = generate(r);
            py::dict out;
            out["train"] = split_to_py(train);
            out["test"] = split_to_py(test);
            return out;
        },
        py::arg("recipe") = py::none(),
        "Deterministic paired dataset from a full recipe dict (see the recipe\n"
        "helpers). Returns {'train': {'inputs': [...], 'labels': [...]}, 'test': ...}.");

    // --- experiments ---

    m.def(
        "default_config", [] { return json_to_pyobj(config_to_json(default_config())); },
        "The full experiment configuration defaults, as a flat dotted-key dict.");

    m.def("config_help", [] { return config_help(); },
          "Describes every configuration key and its default.");

    m.def(
        "run_experiment",
        [](const py::object& config) {
            ExperimentConfig cfg = config_from_json(pyobj_to_json(config));
            py::gil_scoped_release release;
            return run_experiment(cfg);
        },
        py::arg("config"),
        "Runs a full experiment from a config dict (dotted keys, same schema as the\n"
        "CLI) and returns the results directory.");

    m.def(
        "evaluate_checkpoint",
        [](const std::string& checkpoint, const std::string& dataset, const std::string& split,
           double t_lw) {
            Checkpoint ck = load_checkpoint(checkpoint);
            StoredDataset sd = load_dataset(dataset);
            const Dataset* ds = nullptr;
            if (split == "train") {
                ds = &sd.train;
            } else if (split == "test") {
                ds = &sd.test;
            } else {
                throw validation_error("split must be \"train\" or \"test\"");
            }
            return evaluate_all(ck.model, *ds, t_lw);
        },
        py::arg("checkpoint"), py::arg("dataset"), py::arg("split") = "test",
        py::arg("t_lw") = 1.0,
        "All standard test metrics of a saved checkpoint against a stored dataset.");
}
