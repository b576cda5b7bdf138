// Thin numpy-facing bindings over the C++ core. Clips and fragments cross the
// boundary as uint8 arrays shaped (T, H, W, C).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "fragq/checkpoint.hpp"
#include "fragq/errors.hpp"
#include "fragq/flops.hpp"
#include "fragq/metrics.hpp"
#include "fragq/sampling.hpp"
#include "fragq/synth.hpp"

namespace py = pybind11;
using namespace fragq;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

VideoClip clip_from(const U8Array& a, const std::string& id) {
  if (a.ndim() != 4) throw py::value_error("clip must be shaped (T, H, W, C)");
  VideoClip clip(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
                 static_cast<int>(a.shape(3)), id);
  std::memcpy(clip.pixels.data(), a.data(), clip.pixels.size());
  clip.validate();
  return clip;
}

U8Array to_array(const std::vector<std::uint8_t>& data, int t, int h, int w, int c) {
  U8Array out({t, h, w, c});
  std::memcpy(out.mutable_data(), data.data(), data.size());
  return out;
}

std::vector<double> doubles(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "fragment-based video quality assessment";

  py::register_exception<Error>(m, "FragqError", PyExc_RuntimeError);

  m.def("synthesize_clip", [](std::uint64_t seed, int index, int frames, int height, int width) {
    DistortionProfile p;
    p.frames = frames;
    p.height = height;
    p.width = width;
    const LabeledClip lc = synthesize_clip(seed, index, p);
    return py::make_tuple(to_array(lc.clip.pixels, lc.clip.frames, lc.clip.height, lc.clip.width, lc.clip.channels),
                          lc.label.mos);
  }, py::arg("seed"), py::arg("index"), py::arg("frames") = 8, py::arg("height") = 192, py::arg("width") = 192);

  m.def("sample", [](const U8Array& clip, int grids, int patch, int frames, const std::string& variant,
                     std::uint64_t seed) {
    const VideoClip c = select_frames(clip_from(clip, "py"), frames);
    const FragmentBatch b = sample(c, GridSpec{grids, patch, frames}, parse_variant(variant), seed);
    return to_array(b.data, b.frames, b.side, b.side, b.channels);
  }, py::arg("clip"), py::arg("grids") = 7, py::arg("patch") = 32, py::arg("frames") = 32,
     py::arg("variant") = "gms", py::arg("seed") = 0);

  m.def("plcc", [](py::array_t<double> a, py::array_t<double> b) { return plcc(doubles(a), doubles(b)); });
  m.def("srcc", [](py::array_t<double> a, py::array_t<double> b) { return srcc(doubles(a), doubles(b)); });
  m.def("krcc", [](py::array_t<double> a, py::array_t<double> b) { return krcc(doubles(a), doubles(b)); });

  m.def("flops_g", [](const std::string& preset, int frames, int height, int width) {
    return flops_count(preset_by_name(preset), frames, height, width).giga();
  }, py::arg("preset") = "standard", py::arg("frames") = 32, py::arg("height") = 224, py::arg("width") = 224);

  m.def("parameter_count", [](const std::string& preset) { return parameter_count(preset_by_name(preset)); });

  py::class_<Fanet>(m, "Model")
      .def(py::init([](const std::string& preset, std::uint64_t seed) { return Fanet(preset_by_name(preset), seed); }),
           py::arg("preset") = "tiny", py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return load_checkpoint(path).model; })
      .def("save", [](const Fanet& f, const std::string& path) { save_checkpoint(path, f); })
      .def_property_readonly("parameter_count", &Fanet::parameter_count)
      .def("score", [](const Fanet& f, const U8Array& fragments) {
        if (fragments.ndim() != 4 || fragments.shape(1) != fragments.shape(2))
          throw py::value_error("fragments must be shaped (T, S, S, C)");
        FragmentBatch b;
        b.frames = static_cast<int>(fragments.shape(0));
        b.side = static_cast<int>(fragments.shape(1));
        b.channels = static_cast<int>(fragments.shape(3));
        b.data.assign(fragments.data(), fragments.data() + fragments.size());
        return f.forward(b).score;
      });
}
