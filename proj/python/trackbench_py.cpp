#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "trackbench/detections.hpp"
#include "trackbench/geometry.hpp"
#include "trackbench/harness.hpp"
#include "trackbench/keypoints_io.hpp"
#include "trackbench/metrics.hpp"
#include "trackbench/pipeline.hpp"
#include "trackbench/track.hpp"

namespace py = pybind11;
namespace tb = trackbench;
using nlohmann::json;

namespace {

using XY = std::pair<double, double>;
using PairXY = std::pair<XY, XY>;
using Matrix = std::array<std::array<double, 3>, 3>;

py::object to_python(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<long long>());
    case json::value_t::number_unsigned: return py::int_(j.get<unsigned long long>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_python(v));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_python(v);
      return out;
    }
    default: return py::none();
  }
}

json from_python(const py::handle& h) {
  return json::parse(py::module_::import("json").attr("dumps")(h).cast<std::string>());
}

std::vector<tb::KeypointPair> to_pairs(const std::vector<PairXY>& pairs) {
  std::vector<tb::KeypointPair> out;
  out.reserve(pairs.size());
  for (const auto& [c, t] : pairs) {
    out.push_back({tb::CameraPoint(c.first, c.second), tb::TwinPoint(t.first, t.second), std::nullopt});
  }
  return out;
}

std::vector<tb::TwinPoint> to_points(const std::vector<XY>& xs) {
  std::vector<tb::TwinPoint> out;
  out.reserve(xs.size());
  for (const auto& [x, y] : xs) out.emplace_back(x, y);
  return out;
}

Matrix to_array(const tb::Homography& h) {
  Matrix m{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m[r][c] = h.matrix()(r, c);
  return m;
}

tb::Homography from_array(const Matrix& m) {
  Eigen::Matrix3d e;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) e(r, c) = m[r][c];
  return tb::Homography::from_matrix(e);
}

py::dict diagnostics(const tb::CalibrationDiagnostics& d) {
  return to_python(tb::diagnostics_to_json(d));
}

py::dict distance_result(const tb::PathDistanceResult& r) {
  py::dict out;
  out["distance"] = r.distance;
  out["metric"] = std::string(tb::to_string(r.metric));
  out["clamped"] = r.clamped;
  return out;
}

py::dict path_dict(const tb::ReferencePath& p) {
  py::dict out = to_python(tb::reference_path_to_json(p));
  out["arc_length"] = p.arc_length;
  return out;
}

}  // namespace

PYBIND11_MODULE(_trackbench, m) {
  m.doc() = "Trajectory benchmarking core: calibration, track extraction, metrics, pipeline";
  m.attr("__version__") = tb::kVersion;

  static py::exception<tb::Error> error(m, "TrackbenchError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const tb::Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(py::str(e.what()));
      exc.attr("kind") = std::string(tb::to_string(e.kind()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def(
      "estimate_homography",
      [](const std::vector<PairXY>& pairs) { return to_array(tb::estimate_homography(to_pairs(pairs))); },
      py::arg("pairs"), "Camera->twin homography from [((cx, cy), (tx, ty)), ...]; Frobenius-normalized.");
  m.def(
      "apply_homography",
      [](const Matrix& h, const XY& p) {
        const auto q = tb::apply_homography(from_array(h), tb::CameraPoint(p.first, p.second));
        return XY{q.x(), q.y()};
      },
      py::arg("h"), py::arg("point"));
  m.def(
      "reprojection_diagnostics",
      [](const Matrix& h, const std::vector<PairXY>& pairs) {
        const auto kp = to_pairs(pairs);
        return diagnostics(tb::reprojection_diagnostics(from_array(h), kp));
      },
      py::arg("h"), py::arg("pairs"));
  m.def(
      "leave_one_out_diagnostics",
      [](const std::vector<PairXY>& pairs) { return diagnostics(tb::leave_one_out_diagnostics(to_pairs(pairs))); },
      py::arg("pairs"));
  m.def(
      "keypoint_error_curve",
      [](const py::object& keypoints, std::size_t min_count) {
        const auto set = tb::keypoints_from_json(from_python(keypoints));
        py::list out;
        for (const auto& e : tb::keypoint_error_curve(set, min_count)) {
          py::dict row = diagnostics(e.diagnostics);
          row["count"] = e.keypoint_count;
          out.append(row);
        }
        return out;
      },
      py::arg("keypoints"), py::arg("min_count") = 4,
      "Error-vs-count curve for a keypoints document (same layout as keypoints.json).");

  m.def(
      "dtw_distance",
      [](const std::vector<XY>& x, const std::vector<XY>& y, std::optional<double> clamp) {
        return distance_result(tb::dtw_distance(to_points(x), to_points(y), clamp));
      },
      py::arg("x"), py::arg("y"), py::arg("clamp_delta") = py::none());
  m.def(
      "frechet_distance",
      [](const std::vector<XY>& x, const std::vector<XY>& y, std::optional<double> clamp) {
        return distance_result(tb::frechet_distance(to_points(x), to_points(y), clamp));
      },
      py::arg("x"), py::arg("y"), py::arg("clamp_delta") = py::none());
  m.def("similarity_score", py::overload_cast<double, double>(&tb::similarity_score), py::arg("distance"),
        py::arg("baseline"));

  m.def(
      "thin",
      [](const std::vector<std::vector<int>>& rows) {
        const int h = static_cast<int>(rows.size());
        const int w = h ? static_cast<int>(rows[0].size()) : 0;
        tb::BinaryMask mask(w, h);
        for (int y = 0; y < h; ++y) {
          if (static_cast<int>(rows[y].size()) != w) {
            throw tb::Error(tb::ErrorKind::InvalidArgument, "mask rows must have equal length");
          }
          for (int x = 0; x < w; ++x) mask.set(x, y, rows[y][x] != 0);
        }
        const auto out = tb::thin(mask);
        std::vector<std::vector<int>> result(h, std::vector<int>(w));
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) result[y][x] = out.get(x, y) ? 1 : 0;
        return result;
      },
      py::arg("mask"), "Skeletonize a 0/1 mask given as a list of rows.");
  m.def(
      "extract_reference_path",
      [](const std::filesystem::path& image, int threshold, bool track_is_bright, std::size_t count) {
        tb::TrackOptions opts{threshold, track_is_bright, count};
        return path_dict(tb::extract_reference_path(tb::load_image(image), opts));
      },
      py::arg("image"), py::arg("threshold") = 128, py::arg("track_is_bright") = true,
      py::arg("resample_count") = 512);
  m.def(
      "suggest_baseline",
      [](const std::filesystem::path& path) { return tb::suggest_baseline(tb::load_reference_path(path)); },
      py::arg("path"));

  m.def(
      "parse_detections",
      [](const std::string& text) {
        py::list out;
        for (const auto& r : tb::parse_detections(std::string_view(text))) {
          py::dict d;
          d["frame_index"] = r.frame_index;
          d["centroid"] = XY{r.centroid.x(), r.centroid.y()};
          d["confidence"] = r.confidence;
          if (r.bbox) {
            d["bbox"] = std::array<double, 4>{r.bbox->x_min, r.bbox->y_min, r.bbox->x_max, r.bbox->y_max};
          }
          out.append(d);
        }
        return out;
      },
      py::arg("text"), "Parse a JSONL detection stream into records.");

  m.def(
      "run_benchmark",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> output_dir) {
        const auto cfg = tb::load_config(config);
        const auto run = tb::run_benchmark(cfg);
        if (output_dir) tb::write_outputs(run, *output_dir);
        return to_python(run.report);
      },
      py::arg("config"), py::arg("output_dir") = py::none(),
      "Run the benchmark for a config file; returns the report dict and writes outputs when output_dir is set.");
  m.def(
      "simulate",
      [](const py::object& scenario, const std::filesystem::path& output_dir) {
        const auto s = tb::sim::scenario_from_json(from_python(scenario));
        const auto fx = tb::sim::simulate_trial(s);
        tb::sim::write_fixture(fx, s, output_dir);
        py::dict out;
        out["path_similarity_percent"] = fx.truth.score.similarity_percent;
        out["distance_px"] = fx.truth.score.distance.distance;
        out["completion_seconds"] = fx.truth.score.completion_seconds;
        return out;
      },
      py::arg("scenario"), py::arg("output_dir"), "Write a synthetic fixture directory and return its truth score.");
}
