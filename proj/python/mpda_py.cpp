#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mpda/augment.hpp"
#include "mpda/checkpoint.hpp"
#include "mpda/experiment.hpp"
#include "mpda/ops.hpp"

namespace py = pybind11;
using namespace mpda;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a)
{
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t)
{
    Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

Image to_image(const Array& a)
{
    if (a.ndim() != 2)
        throw DimensionError("expected a 2-d image array");
    Image im(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), im.pixels.begin());
    return im;
}

Array from_image(const Image& im)
{
    Array out({static_cast<py::ssize_t>(im.height), static_cast<py::ssize_t>(im.width)});
    std::copy(im.pixels.begin(), im.pixels.end(), out.mutable_data());
    return out;
}

LayerParams params(const Array& w, const Array& b)
{
    return {"py", to_tensor(w), to_tensor(b), {}, {}};
}

KeyValues to_kv(const py::dict& d)
{
    KeyValues kv;
    for (const auto& [k, v] : d)
        kv.set(py::str(k), py::str(v));
    return kv;
}

// [N,1,80,80] or a stack of 80x80 images
Tensor images_tensor(const Array& x)
{
    if (x.ndim() == 3)
        return Tensor({static_cast<std::size_t>(x.shape(0)), 1, static_cast<std::size_t>(x.shape(1)),
                       static_cast<std::size_t>(x.shape(2))},
                      std::vector<float>(x.data(), x.data() + x.size()));
    return to_tensor(x);
}

struct Model {
    TrainingState state;

    py::dict predict(const Array& x)
    {
        const Tensor f = state.models.encoder.forward(images_tensor(x), Mode::eval);
        py::dict out;
        out["embedding"] = to_array(f);
        out["p1"] = to_array(state.models.task1.forward(f, Mode::eval));
        out["p2"] = to_array(state.models.task2.forward(f, Mode::eval));
        out["domain"] = to_array(state.models.domain.forward(f, Mode::eval));
        return out;
    }
};

py::dict metrics_dict(const MetricsRecord& r)
{
    py::dict d;
    d["epoch"] = r.epoch;
    d["phase"] = phase_name(r.phase);
    d["L_enc"] = r.l_enc;
    d["L_t1"] = r.l_t1;
    d["L_t2"] = r.l_t2;
    d["L_d"] = r.l_d;
    d["L_dis"] = r.l_dis;
    d["src_val_acc"] = r.src_val_acc;
    d["tgt_val_acc"] = r.tgt_val_acc;
    d["tgt_test_acc"] = r.tgt_test_acc;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Melt-pool domain adaptation core";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);

    m.attr("IMAGE_SIDE") = kImageSide;
    m.attr("EMBEDDING_DIM") = kEmbeddingDim;

    // layer ops, float32 in and out
    m.def("conv2d", [](const Array& x, const Array& w, const Array& b) { return to_array(conv2d(to_tensor(x), params(w, b))); },
          py::arg("x"), py::arg("weights"), py::arg("bias"), "3x3 convolution, stride 1, zero padding 1.");
    m.def("maxpool2d", [](const Array& x) { return to_array(maxpool2d(to_tensor(x))); }, py::arg("x"));
    m.def("linear", [](const Array& x, const Array& w, const Array& b) { return to_array(linear(to_tensor(x), params(w, b))); },
          py::arg("x"), py::arg("weights"), py::arg("bias"));
    m.def(
        "batchnorm",
        [](const Array& x, const Array& gamma, const Array& beta) {
            const std::size_t c = static_cast<std::size_t>(gamma.size());
            LayerParams p{"py", to_tensor(gamma), to_tensor(beta), Tensor({c}, 0.0f), Tensor({c}, 1.0f)};
            return to_array(batchnorm(to_tensor(x), p, Mode::train));
        },
        py::arg("x"), py::arg("gamma"), py::arg("beta"), "Train-mode batch normalization over N (and H, W).");
    m.def("relu", [](const Array& x) { return to_array(relu(to_tensor(x))); });
    m.def("sigmoid", [](const Array& x) { return to_array(sigmoid(to_tensor(x))); });

    // losses on [N,1] probabilities
    m.def("bce", [](const Array& p, const Array& y) { return bce(to_tensor(p), to_tensor(y)).value; });
    m.def("domain_loss", [](const Array& s, const Array& t) { return domain_loss(to_tensor(s), to_tensor(t)).value; },
          py::arg("d_source"), py::arg("d_target"));
    m.def(
        "encoder_loss",
        [](double t1, double t2, std::optional<double> d, double lambda) {
            std::optional<LossValue> ld;
            if (d)
                ld = LossValue{*d, LossKind::domain};
            return encoder_loss({t1, LossKind::task1}, {t2, LossKind::task2}, ld, lambda).value;
        },
        py::arg("l_t1"), py::arg("l_t2"), py::arg("l_d") = py::none(), py::arg("lam") = 1.0);
    m.def(
        "discrepancy_loss",
        [](const Array& p1, const Array& p2, const std::string& metric) {
            return discrepancy_loss(to_tensor(p1), to_tensor(p2), parse_discrepancy_metric(metric)).value;
        },
        py::arg("p1"), py::arg("p2"), py::arg("metric") = "symmetric-bce");

    // augmentation
    m.def("zoom_range", &zoom_range, py::arg("source_pixel_size"), py::arg("target_pixel_size"),
          py::arg("zoom_factor"));
    m.def("augment_zoom", [](const Array& im, double r) { return from_image(augment_zoom(to_image(im), r)); });
    m.def("augment_blur", [](const Array& im, double s) { return from_image(augment_blur(to_image(im), s)); });
    m.def("augment_dihedral", [](const Array& im, int e) { return from_image(augment_dihedral(to_image(im), e)); });

    // synthetic data
    m.def(
        "render_melt_pool",
        [](bool abnormal, std::uint64_t seed, const py::dict& overrides) {
            KeyValues kv;
            for (const auto& [k, v] : overrides)
                kv.set("source." + std::string(py::str(k)), py::str(v));
            const SyntheticBenchmarkSpec spec = SyntheticBenchmarkSpec::from_config(kv);
            return from_image(
                render_melt_pool(spec.source, abnormal ? MeltPoolClass::abnormal : MeltPoolClass::normal, seed));
        },
        py::arg("abnormal"), py::arg("seed"), py::arg("overrides") = py::dict(),
        "One 80x80 melt-pool image; overrides are synthetic domain keys such as diameter_mean.");
    m.def(
        "generate_benchmark",
        [](const std::string& spec_file, const std::string& out_dir, bool reference_counts) {
            const SyntheticBenchmarkSpec spec = SyntheticBenchmarkSpec::from_config(KeyValues::load(spec_file));
            write_benchmark(generate_domain_pair(spec.source, spec.target, reference_counts), out_dir);
        },
        py::arg("spec_file"), py::arg("out_dir"), py::arg("reference_counts") = false);

    // models
    py::class_<Model>(m, "Model")
        .def_static(
            "fresh", [](std::uint64_t seed) { return Model{TrainingState::fresh(seed)}; }, py::arg("seed"))
        .def_static(
            "load",
            [](const std::string& path) {
                LoadedCheckpoint ck = load_checkpoint(path);
                return Model{{std::move(ck.models), ck.head, ck.meta.phase, ck.meta.epoch}};
            },
            py::arg("path"))
        .def_property_readonly("last_phase", [](const Model& m) { return m.state.last_phase; })
        .def_property_readonly("epoch", [](const Model& m) { return m.state.epoch; })
        .def("parameter_counts",
             [](const Model& m) {
                 py::dict d;
                 const char* names[] = {"encoder", "task1", "task2", "domain"};
                 const auto nets = m.state.models.all();
                 for (std::size_t i = 0; i < nets.size(); ++i)
                     d[names[i]] = nets[i]->spec().trainable_count();
                 return d;
             })
        .def("predict", &Model::predict, py::arg("images"),
             "Eval-mode forward of [N,80,80] or [N,1,80,80] images: embedding, p1, p2, domain.");

    m.def(
        "run_pipeline",
        [](const std::string& data_dir, const py::dict& config) {
            const RunConfig cfg = RunConfig::from_config(to_kv(config));
            PipelineResult r;
            {
                py::gil_scoped_release release;
                r = run_pipeline(load_experiment_data(data_dir), cfg);
            }
            py::dict out;
            out["after_pretrain"] = r.after_pretrain.average;
            out["after_adapt"] = r.after_adapt.average;
            out["after_decision"] = r.after_decision.average;
            py::list metrics;
            for (const auto& rec : r.metrics)
                metrics.append(metrics_dict(rec));
            out["metrics"] = metrics;
            out["model"] = Model{std::move(r.state)};
            return out;
        },
        py::arg("data_dir"), py::arg("config") = py::dict(),
        "Pretrain, domain-align and decision-align on a benchmark directory; config keys as in run files.");
}
