#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "visprompt/cli.hpp"
#include "visprompt/error.hpp"
#include "visprompt/eval.hpp"
#include "visprompt/run_config.hpp"
#include "visprompt/train.hpp"
#include "visprompt/vit.hpp"

namespace py = pybind11;
using namespace visprompt;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an H x W x 3 array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + img.data.size(), img.data.begin());
  return img;
}

Array to_array(const Image& img) {
  Array a({img.height, img.width, Image::kChannels});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

RunConfig config_from(const std::string& json_text) {
  RunConfig cfg = run_config_from_json(nlohmann::json::parse(json_text));
  cfg.validate();
  return cfg;
}

py::tuple pair_tuple(const QAPair& p) { return py::make_tuple(to_array(p.question), to_array(p.answer)); }

class Model {
 public:
  explicit Model(const std::string& path) : ckpt_(load_checkpoint(path)) {}

  Array infer(const Array& prompt_q, const Array& prompt_a, const Array& query) const {
    const Order order = variant_spec(ckpt_.config.variant).order;
    return to_array(visprompt::infer(ckpt_.params, to_image(prompt_q), to_image(prompt_a), to_image(query), order));
  }
  std::string config_json() const { return to_json(ckpt_.config).dump(); }
  std::int64_t step() const { return ckpt_.step; }

 private:
  Checkpoint ckpt_;
};

}  // namespace

PYBIND11_MODULE(_visprompt, m) {
  m.doc() = "Native core of the visprompt package";

  py::register_exception<Error>(m, "Error");

  m.def("operator_names", &cli::operator_names);
  m.def(
      "apply_operator",
      [](const std::string& name, const Array& img, const std::string& params, std::uint64_t seed) {
        return to_array(cli::apply_named_operator(name, to_image(img), params, seed));
      },
      py::arg("name"), py::arg("image"), py::arg("params_json") = "", py::arg("seed") = 0);

  m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); });
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); });
  m.def("mae", [](const Array& a, const Array& b) { return mae(to_image(a), to_image(b)); });

  m.def(
      "grad_check",
      [](std::uint64_t seed) {
        const GradCheckResult r = grad_check({}, seed);
        return py::make_tuple(r.max_rel_error, r.samples);
      },
      py::arg("seed") = 0);

  m.def("default_config_json", [] { return to_json(RunConfig::two_task_default()).dump(); });
  m.def(
      "train",
      [](const std::string& config_json, std::optional<std::int64_t> stop_after) {
        const RunConfig cfg = config_from(config_json);
        TrainOptions opts;
        opts.stop_after = stop_after;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(cfg, opts);
        }
        py::list log;
        for (const auto& s : r.log) log.append(py::make_tuple(s.step, s.lr, s.loss));
        return py::make_tuple(log, r.final_checkpoint.string());
      },
      py::arg("config_json"), py::arg("stop_after") = py::none());

  m.def("make_prompt", [](const std::string& config_json, const std::string& task, std::uint64_t id) {
    return pair_tuple(make_prompt(config_from(config_json), task_from_name(task), id));
  });
  m.def("make_test_pairs", [](const std::string& config_json, const std::string& task, int n) {
    py::list out;
    for (const auto& p : make_test_pairs(config_from(config_json), task_from_name(task), n)) out.append(pair_tuple(p));
    return out;
  });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("infer", &Model::infer, py::arg("prompt_question"), py::arg("prompt_answer"), py::arg("query"))
      .def_property_readonly("config_json", &Model::config_json)
      .def_property_readonly("step", &Model::step);
}
