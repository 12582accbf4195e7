#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "trackbench/harness.hpp"
#include "trackbench/image.hpp"
#include "trackbench/metrics.hpp"
#include "trackbench/pipeline.hpp"
#include "trackbench/service.hpp"
#include "trackbench/track.hpp"

namespace fs = std::filesystem;
namespace tb = trackbench;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kGate = 3, kData = 4 };

int exit_code_for(tb::ErrorKind kind) {
  if (kind == tb::ErrorKind::CalibrationGate) return kGate;
  if (tb::is_config_error(kind)) return kConfig;
  return kData;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw tb::Error(tb::ErrorKind::FileNotFound, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw tb::Error(tb::ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
}

int process_track(const fs::path& image, const fs::path& out, int threshold, bool dark,
                  std::size_t count) {
  tb::TrackOptions opts;
  opts.threshold = threshold;
  opts.track_is_bright = !dark;
  opts.resample_count = count;
  const auto path = tb::extract_reference_path(tb::load_image(image), opts);
  tb::save_reference_path(path, out);
  std::cout << "wrote " << out.string() << " (" << path.points.size() << " points, "
            << (path.closed ? "closed" : "open") << ", length " << path.arc_length << " px)\n";
  return kOk;
}

int benchmark(const fs::path& config_path, const std::optional<fs::path>& out_override) {
  const auto config = tb::load_config(config_path);
  const auto run = tb::run_benchmark(config);
  const fs::path out = out_override ? *out_override : config.resolve(config.output_dir);
  tb::write_outputs(run, out);
  const auto& score = run.report.at("score");
  std::cout << "similarity " << score.at("path_similarity_percent").get<double>() << " %";
  if (!score.at("completion_seconds").is_null()) {
    std::cout << ", completion " << score.at("completion_seconds").get<double>() << " s";
  }
  std::cout << ", " << score.at("failure_events").size() << " failure event(s)\n"
            << "wrote " << (out / "report.json").string() << " and " << (out / "overlay.svg").string()
            << "\n";
  return kOk;
}

int simulate(const fs::path& config_path, const std::optional<fs::path>& out_override) {
  const auto doc = read_json(config_path);
  const auto scenario = tb::sim::scenario_from_json(doc);
  fs::path out = out_override ? *out_override : fs::path(doc.value("output_dir", std::string("sim_out")));
  if (!out_override && out.is_relative()) out = config_path.parent_path() / out;
  const auto fixture = tb::sim::simulate_trial(scenario);
  tb::sim::write_fixture(fixture, scenario, out);
  std::cout << "wrote fixture to " << out.string() << " (truth similarity "
            << fixture.truth.score.similarity_percent << " %)\n";
  return kOk;
}

int calibrate(const std::string& host, int port, const std::optional<fs::path>& camera,
              const std::optional<fs::path>& twin) {
  tb::service::CalibrationService service;
  if (camera && twin) {
    const auto r = service.start_session(*camera, *twin);
    if (r.status != 200) {
      std::cerr << "error: " << r.body.value("message", std::string("cannot start session")) << "\n";
      return kConfig;
    }
  }
  std::cout << "calibration service listening on http://" << host << ":" << port << "\n" << std::flush;
  tb::service::serve(service, host, port);
  return kOk;
}

int suggest_baseline(const fs::path& path_file) {
  const auto path = tb::load_reference_path(path_file);
  std::cout << tb::suggest_baseline(path) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-camera driving trial benchmark"};
  app.set_version_flag("--version", tb::kVersion);
  app.require_subcommand(1);

  fs::path image, track_out = "ref_path.json";
  int threshold = 128;
  bool dark = false;
  std::size_t count = 512;
  auto* pt = app.add_subcommand("process-track", "Extract the reference path from a track image");
  pt->add_option("image", image, "Track image (PNG or PGM)")->required();
  pt->add_option("-o,--output", track_out, "Output path JSON")->capture_default_str();
  pt->add_option("--threshold", threshold, "Binarization threshold")->capture_default_str()->check(
      CLI::Range(0, 255));
  pt->add_flag("--dark", dark, "Track is darker than the background");
  pt->add_option("--count", count, "Resampled point count")->capture_default_str()->check(CLI::PositiveNumber);

  fs::path config;
  std::optional<fs::path> out_dir;
  auto* bm = app.add_subcommand("benchmark", "Run the full benchmark for one trial");
  bm->add_option("-c,--config", config, "Benchmark config JSON")->required();
  bm->add_option("-o,--output-dir", out_dir, "Override the config's output_dir");

  fs::path sim_config;
  std::optional<fs::path> sim_out;
  auto* sm = app.add_subcommand("simulate", "Generate a synthetic trial fixture");
  sm->add_option("-c,--config", sim_config, "Scenario JSON")->required();
  sm->add_option("-o,--output-dir", sim_out, "Fixture directory");

  bool serve = false;
  std::string host = "127.0.0.1";
  int port = 8765;
  std::optional<fs::path> camera, twin;
  auto* cal = app.add_subcommand("calibrate", "Interactive keypoint calibration service");
  cal->add_flag("--serve", serve, "Start the HTTP service")->required();
  cal->add_option("--host", host)->capture_default_str();
  cal->add_option("--port", port)->capture_default_str()->check(CLI::Range(0, 65535));
  cal->add_option("--camera", camera, "Camera frame to open at startup");
  cal->add_option("--twin", twin, "Twin image to open at startup");

  fs::path baseline_path;
  auto* sb = app.add_subcommand("suggest-baseline", "Print 10% of the reference path length");
  sb->add_option("path", baseline_path, "Reference path JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*pt) return process_track(image, track_out, threshold, dark, count);
    if (*bm) return benchmark(config, out_dir);
    if (*sm) return simulate(sim_config, sim_out);
    if (*cal) return calibrate(host, port, camera, twin);
    if (*sb) return suggest_baseline(baseline_path);
  } catch (const tb::Error& e) {
    std::cerr << "error (" << tb::to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kConfig;
}
