#include <cstring>
#include <string>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "motionxfer/compositing.hpp"
#include "motionxfer/dataset.hpp"
#include "motionxfer/error.hpp"
#include "motionxfer/heatmap.hpp"
#include "motionxfer/metrics.hpp"
#include "motionxfer/png_io.hpp"
#include "motionxfer/pose.hpp"
#include "motionxfer/pose_io.hpp"
#include "motionxfer/render.hpp"
#include "motionxfer/warp.hpp"

namespace py = pybind11;
using namespace mxf;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw Error("expected an H x W or H x W x C float array");
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), c);
  std::memcpy(img.data().data(), a.data(), img.size() * sizeof(float));
  return img;
}

FloatArray from_image(const Image& img) {
  FloatArray a({img.height(), img.width(), img.channels()});
  std::memcpy(a.mutable_data(), img.data().data(), img.size() * sizeof(float));
  return a;
}

Mask to_mask(const py::array& any) {
  const ByteArray a = ByteArray::ensure(any.attr("astype")("uint8"));
  if (a.ndim() != 2) throw Error("expected an H x W mask");
  Mask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  const auto* src = a.data();
  for (std::size_t i = 0; i < m.data().size(); ++i) m.data()[i] = src[i] ? 1 : 0;
  return m;
}

ByteArray from_mask(const Mask& m) {
  ByteArray a({m.height(), m.width()});
  std::memcpy(a.mutable_data(), m.data().data(), m.data().size());
  return a;
}

py::array_t<double> keypoint_array(const Pose2D& p) {
  py::array_t<double> a({kNumKeypoints, 2});
  auto r = a.mutable_unchecked<2>();
  for (int k = 0; k < kNumKeypoints; ++k) {
    r(k, 0) = p.keypoints[k].x;
    r(k, 1) = p.keypoints[k].y;
  }
  return a;
}

Pose2D make_pose(const py::array_t<double, py::array::c_style | py::array::forcecast>& kp,
                 const std::optional<std::vector<bool>>& visible) {
  if (kp.ndim() != 2 || kp.shape(0) != kNumKeypoints || kp.shape(1) != 2) {
    throw Error("keypoints must be a 15 x 2 array");
  }
  Pose2D p;
  auto r = kp.unchecked<2>();
  for (int k = 0; k < kNumKeypoints; ++k) {
    p.keypoints[k] = {r(k, 0), r(k, 1)};
    p.visible[k] = visible ? (*visible)[k] : true;
  }
  if (visible && visible->size() != static_cast<std::size_t>(kNumKeypoints)) throw Error("visible needs 15 flags");
  return p;
}

py::dict metrics_dict(const FrameMetrics& m) {
  py::dict d;
  d["mse"] = m.mse;
  d["psnr"] = m.psnr;
  d["ssim"] = m.ssim;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pose geometry, rasterisation, warping, compositing and metrics";
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  m.attr("NUM_KEYPOINTS") = kNumKeypoints;
  m.attr("NUM_PARTS") = kNumParts;

  py::class_<Pose2D>(m, "Pose")
      .def(py::init(&make_pose), py::arg("keypoints"), py::arg("visible") = py::none())
      .def_property_readonly("keypoints", &keypoint_array)
      .def_property_readonly("visible", [](const Pose2D& p) { return std::vector<bool>(p.visible.begin(), p.visible.end()); })
      .def_property(
          "landmarks",
          [](const Pose2D& p) {
            py::dict d;
            for (int l = 0; l < kNumLandmarkSets; ++l) {
              std::vector<std::pair<double, double>> pts;
              for (const auto& q : p.landmarks[l]) pts.emplace_back(q.x, q.y);
              d[py::str(std::string(landmark_name(static_cast<Landmark>(l))))] = pts;
            }
            return d;
          },
          [](Pose2D& p, const py::dict& d) {
            for (int l = 0; l < kNumLandmarkSets; ++l) {
              const auto key = std::string(landmark_name(static_cast<Landmark>(l)));
              p.landmarks[l].clear();
              if (!d.contains(key)) continue;
              for (const auto& q : d[py::str(key)].cast<std::vector<std::pair<double, double>>>())
                p.landmarks[l].push_back({q.first, q.second});
            }
          })
      .def("complete_derived", [](Pose2D& p) { complete_derived_keypoints(p); })
      .def("__eq__", [](const Pose2D& a, const Pose2D& b) { return a == b; });

  m.def("keypoint_names", [] {
    std::vector<std::string> v;
    for (int k = 0; k < kNumKeypoints; ++k) v.emplace_back(keypoint_name(static_cast<Keypoint>(k)));
    return v;
  });
  m.def("part_names", [] {
    std::vector<std::string> v;
    for (int p = 0; p < kNumParts; ++p) v.emplace_back(part_name(static_cast<Part>(p)));
    return v;
  });

  m.def("read_poses", [](const std::string& path) { return read_poses_strict(path); });
  m.def("write_poses", [](const std::string& path, const std::vector<Pose2D>& poses) { write_pose_file(path, poses); });
  m.def("pose_distance", &pose_distance);

  m.def(
      "part_transforms",
      [](const Pose2D& input, const Pose2D& reference) {
        const auto set = estimate_part_transforms(input, reference);
        py::array_t<double> a({kNumParts, 2, 3});
        auto r = a.mutable_unchecked<3>();
        for (int i = 0; i < kNumParts; ++i)
          for (int j = 0; j < 6; ++j) r(i, j / 3, j % 3) = set.transforms[i].m[j];
        return py::make_tuple(a, std::vector<bool>(set.missing.begin(), set.missing.end()));
      },
      py::arg("input"), py::arg("reference"), "Per-part 2 x 3 similarity matrices and missing flags.");

  m.def(
      "pose_volume",
      [](const Pose2D& p, int height, int width) { return from_image(build_pose_volume(p, height, width).grid); },
      py::arg("pose"), py::arg("height"), py::arg("width"));
  m.def(
      "stacked_pose_volume",
      [](const std::vector<Pose2D>& history, int height, int width, int k) {
        std::vector<PoseVolume> vols;
        for (const auto& p : history) vols.push_back(build_pose_volume(p, height, width));
        return from_image(stack_temporal(vols, k).grid);
      },
      py::arg("history"), py::arg("height"), py::arg("width"), py::arg("k") = 3);

  m.def(
      "warp",
      [](const FloatArray& image, const py::array_t<double>& matrix, float fill) {
        if (matrix.size() != 6) throw Error("matrix must hold 6 values");
        AffineMatrix a;
        for (int j = 0; j < 6; ++j) a.m[j] = matrix.data()[j];
        const Image img = to_image(image);
        return from_image(bilinear_sample(img, affine_grid(a, img.height(), img.width()), fill));
      },
      py::arg("image"), py::arg("matrix"), py::arg("fill") = kFillValue, "Warp so that output(A p) = input(p).");
  m.def(
      "bilinear_sample",
      [](const FloatArray& image, const py::array_t<double, py::array::c_style | py::array::forcecast>& grid,
         float fill) {
        if (grid.ndim() != 3 || grid.shape(2) != 2) throw Error("grid must be H x W x 2 (x, y)");
        SamplingGrid g(static_cast<int>(grid.shape(0)), static_cast<int>(grid.shape(1)));
        std::memcpy(g.coords.data(), grid.data(), g.coords.size() * sizeof(double));
        return from_image(bilinear_sample(to_image(image), g, fill));
      },
      py::arg("image"), py::arg("grid"), py::arg("fill") = kFillValue);

  m.def(
      "extract_foreground_mask",
      [](const FloatArray& image, float threshold) {
        ChromaKeyConfig ck;
        ck.threshold = threshold;
        ck.validate();
        return from_mask(extract_foreground_mask(to_image(image), ck));
      },
      py::arg("image"), py::arg("threshold") = 0.5f);
  m.def(
      "composite",
      [](const FloatArray& fg, const py::array& mask, const FloatArray& bg) {
        return from_image(composite(to_image(fg), to_mask(mask), to_image(bg)));
      },
      py::arg("foreground"), py::arg("mask"), py::arg("background"));
  m.def(
      "recomposite",
      [](const FloatArray& fg, const py::array& mask, const FloatArray& bg, bool blur, double sigma, int band) {
        BlendConfig cfg;
        cfg.blur = blur;
        cfg.sigma = sigma;
        cfg.band = band;
        return from_image(recomposite(to_image(fg), to_mask(mask), to_image(bg), cfg));
      },
      py::arg("foreground"), py::arg("mask"), py::arg("background"), py::arg("blur") = true, py::arg("sigma") = 1.0,
      py::arg("band") = 2);

  m.def(
      "frame_metrics",
      [](const FloatArray& x, const FloatArray& y, const std::optional<py::array>& mask) {
        if (mask) {
          const Mask mk = to_mask(*mask);
          return metrics_dict(frame_metrics(to_image(x), to_image(y), &mk));
        }
        return metrics_dict(frame_metrics(to_image(x), to_image(y)));
      },
      py::arg("generated"), py::arg("truth"), py::arg("mask") = py::none(),
      "MSE, PSNR and SSIM on 0..255 images.");

  m.def(
      "render_video",
      [](const std::string& config_json, std::uint64_t seed) {
        const auto cfg = scene_config_from_json(nlohmann::json::parse(config_json));
        py::list frames;
        for (const auto& f : generate_video(cfg, seed)) {
          py::dict d;
          d["image"] = from_image(f.image);
          d["pose"] = f.pose;
          d["fg_mask"] = from_mask(f.fg_mask);
          py::list parts;
          for (const auto& pm : f.part_masks) parts.append(from_mask(pm));
          d["part_masks"] = parts;
          frames.append(d);
        }
        return frames;
      },
      py::arg("config_json"), py::arg("seed"));

  m.def("read_png", [](const std::string& path) { return from_image(read_png(path)); });
  m.def("write_png", [](const std::string& path, const FloatArray& img) { write_png(path, to_image(img)); });
}
