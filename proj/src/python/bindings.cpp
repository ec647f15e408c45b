// Python bindings: losses on numpy arrays, the retrieval evaluator, learning
// rate schedules and the run pipeline driven by a TOML config.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

#include "unireid/errors.h"
#include "unireid/eval/retrieval.h"
#include "unireid/objectives/losses.h"
#include "unireid/pipeline.h"
#include "unireid/train/schedule.h"

namespace py = pybind11;
using namespace unireid;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Overrides = std::map<std::string, std::string>;

torch::Tensor to_tensor(const Array& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

torch::Tensor to_labels(const std::vector<int64_t>& v) { return torch::tensor(v, torch::kInt64); }

torch::Tensor scalar(double v) { return torch::tensor(v, torch::kFloat64); }

py::dict result_dict(const RetrievalResult& r) {
  py::dict d;
  d["task"] = r.task;
  d["rank1"] = r.rank1;
  d["rank5"] = r.rank5;
  d["rank10"] = r.rank10;
  d["mAP"] = r.mAP;
  d["cmc"] = r.cmc;
  d["ap"] = r.ap;
  d["n_queries"] = r.n_queries;
  d["n_gallery"] = r.n_gallery;
  d["skipped"] = r.skipped;
  return d;
}

RunConfig load(const std::string& path, const Overrides& overrides) {
  return RunConfig::from_toml_file(path, overrides);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "unified image/text person re-identification core";

  static py::exception<Error> error(m, "UnireidError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(error_kind_name(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def("sdm_loss",
        [](const Array& img, const Array& txt, const std::vector<int64_t>& labels, double t) {
          return sdm_loss(to_tensor(img), to_tensor(txt), to_labels(labels), scalar(t)).item<double>();
        },
        py::arg("img"), py::arg("txt"), py::arg("labels"), py::arg("temperature") = 0.07);
  m.def("identity_loss",
        [](const Array& logits, const std::vector<int64_t>& labels) {
          return identity_loss(to_tensor(logits), to_labels(labels)).item<double>();
        },
        py::arg("logits"), py::arg("labels"));
  m.def("triplet_loss",
        [](const Array& f, const std::vector<int64_t>& labels, double margin) {
          return triplet_loss(to_tensor(f), to_labels(labels), margin).item<double>();
        },
        py::arg("features"), py::arg("labels"), py::arg("margin") = 0.3);
  m.def("prompt_contrastive",
        [](const Array& img, const Array& refs, double t) {
          auto r = prompt_contrastive(to_tensor(img), to_tensor(refs), scalar(t));
          return py::make_tuple(r.t2i.item<double>(), r.i2t.item<double>());
        },
        py::arg("img"), py::arg("refs"), py::arg("temperature") = 0.07);
  m.def("cic_loss",
        [](const Array& cls, const Array& bank, const std::vector<int64_t>& labels, double t) {
          const auto b = to_tensor(bank);
          return cic_loss(to_tensor(cls), b, to_labels(labels), scalar(t), b.size(0))
              .item<double>();
        },
        py::arg("cls_i2i"), py::arg("bank"), py::arg("labels"), py::arg("temperature") = 0.07);

  m.def("average_precision", &average_precision, py::arg("relevance"));
  m.def("evaluate_retrieval",
        [](const Array& sim, std::vector<int64_t> q, std::vector<int64_t> g,
           std::vector<int64_t> qc, std::vector<int64_t> gc, bool camera_filter) {
          RetrievalProblem p;
          p.similarity = to_tensor(sim);
          p.query_ids = std::move(q);
          p.gallery_ids = std::move(g);
          p.query_cameras = std::move(qc);
          p.gallery_cameras = std::move(gc);
          p.camera_filter = camera_filter;
          p.task = "python";
          return result_dict(evaluate_retrieval(p));
        },
        py::arg("similarity"), py::arg("query_ids"), py::arg("gallery_ids"),
        py::arg("query_cameras") = std::vector<int64_t>{},
        py::arg("gallery_cameras") = std::vector<int64_t>{}, py::arg("camera_filter") = false);

  m.def("exponential_lr",
        [](double epoch, double base, double decay) {
          return lr_at(epoch, LrSchedule::exponential(base, decay));
        },
        py::arg("epoch"), py::arg("base"), py::arg("decay"));
  m.def("warmup_cosine_lr",
        [](double epoch, double start, double peak, double floor, int64_t warmup, int64_t total) {
          return lr_at(epoch, LrSchedule::warmup_cosine(start, peak, floor, warmup, total));
        },
        py::arg("epoch"), py::arg("warmup_start"), py::arg("peak"), py::arg("floor"),
        py::arg("warmup_epochs"), py::arg("total_epochs"));

  m.def("load_config_json",
        [](const std::string& path, const Overrides& o) { return load(path, o).to_json().dump(); },
        py::arg("path"), py::arg("overrides") = Overrides{});
  m.def("generate",
        [](const std::string& path, const Overrides& o) {
          auto out = generate_data(load(path, o));
          return py::make_tuple(out.t2i_manifest.string(), out.i2i_manifest.string());
        },
        py::arg("path"), py::arg("overrides") = Overrides{});
  m.def("train",
        [](const std::string& path, const Overrides& o, const std::string& stage, bool resume) {
          py::gil_scoped_release release;
          auto out = train_run(load(path, o), parse_stage(stage), {}, resume);
          return std::make_pair(out.stage1.string(), out.stage2.string());
        },
        py::arg("path"), py::arg("overrides") = Overrides{}, py::arg("stage") = "all",
        py::arg("resume") = false);
  m.def("evaluate",
        [](const std::string& path, const Overrides& o, const std::string& task) {
          const auto cfg = load(path, o);
          py::list out;
          for (const auto& r : evaluate_run(cfg, {}, task.empty() ? cfg.eval.task : task)) {
            out.append(result_dict(r));
          }
          return out;
        },
        py::arg("path"), py::arg("overrides") = Overrides{}, py::arg("task") = "");
}
