#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "tryon3d/error.hpp"

namespace tryon3d {

/// Every tunable of the batch pipeline.
struct PipelineConfig {
  int tps_grid = 5;            // control grid per axis for dense-field fitting
  int tps_points = 24;         // contour samples per mask (plus the center pair)
  double tps_lambda = 1e-4;    // kernel-diagonal regularization
  double lambda_depth = 1.0;   // Log-L1 depth term weight
  double lambda_grad = 0.5;    // depth-gradient term weight
  int inpaint_radius = 5;      // px
  double pose_sigma = 3.0;     // px
  double coarse_mask_radius = 8.0;  // px
  bool synth_depth = false;
  double synth_base = 0.5;
  double synth_amplitude = 0.08;
  int width = 320;
  int height = 512;
  std::string output_dir = "out";
  int threads = 1;

  void validate() const {
    auto check = [](bool ok, const char* what) {
      if (!ok) throw InputError(std::string("config: ") + what);
    };
    check(tps_grid >= 2 && tps_grid <= 64, "tps_grid must be in [2, 64]");
    check(tps_points >= 3 && tps_points <= 4096, "tps_points must be in [3, 4096]");
    check(tps_lambda >= 0 && tps_lambda <= 1e6, "tps_lambda must be in [0, 1e6]");
    check(lambda_depth >= 0 && lambda_depth <= 1e6, "lambda_depth must be in [0, 1e6]");
    check(lambda_grad >= 0 && lambda_grad <= 1e6, "lambda_grad must be in [0, 1e6]");
    check(inpaint_radius >= 1 && inpaint_radius <= 64, "inpaint_radius must be in [1, 64]");
    check(pose_sigma > 0 && pose_sigma <= 256, "pose_sigma must be in (0, 256]");
    check(coarse_mask_radius >= 0 && coarse_mask_radius <= 256, "coarse_mask_radius must be in [0, 256]");
    check(synth_amplitude > 0 && synth_amplitude <= 10, "synth_amplitude must be in (0, 10]");
    check(synth_base >= -100 && synth_base <= 100, "synth_base must be in [-100, 100]");
    check(width >= 11 && width <= 16384 && height >= 11 && height <= 16384, "width/height must be in [11, 16384]");
    check(threads >= 1 && threads <= 256, "threads must be in [1, 256]");
  }
};

/// Reads a flat JSON object; unknown keys and wrong types are errors.
inline PipelineConfig parse_config(const std::string& text, const std::string& origin = "config") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw InputError(origin + ": expected a flat key-value object");
  PipelineConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    auto as_int = [&](int& dst) {
      if (!value.is_number_integer()) throw InputError(origin + ": '" + key + "' must be an integer");
      dst = value.get<int>();
    };
    auto as_double = [&](double& dst) {
      if (!value.is_number()) throw InputError(origin + ": '" + key + "' must be a number");
      dst = value.get<double>();
    };
    if (key == "tps_grid") as_int(cfg.tps_grid);
    else if (key == "tps_points") as_int(cfg.tps_points);
    else if (key == "tps_lambda") as_double(cfg.tps_lambda);
    else if (key == "lambda_depth") as_double(cfg.lambda_depth);
    else if (key == "lambda_grad") as_double(cfg.lambda_grad);
    else if (key == "inpaint_radius") as_int(cfg.inpaint_radius);
    else if (key == "pose_sigma") as_double(cfg.pose_sigma);
    else if (key == "coarse_mask_radius") as_double(cfg.coarse_mask_radius);
    else if (key == "synth_base") as_double(cfg.synth_base);
    else if (key == "synth_amplitude") as_double(cfg.synth_amplitude);
    else if (key == "width") as_int(cfg.width);
    else if (key == "height") as_int(cfg.height);
    else if (key == "threads") as_int(cfg.threads);
    else if (key == "synth_depth") {
      if (!value.is_boolean()) throw InputError(origin + ": 'synth_depth' must be a boolean");
      cfg.synth_depth = value.get<bool>();
    } else if (key == "output_dir") {
      if (!value.is_string()) throw InputError(origin + ": 'output_dir' must be a string");
      cfg.output_dir = value.get<std::string>();
    } else {
      throw InputError(origin + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_config(text, path.string());
}

}  // namespace tryon3d
