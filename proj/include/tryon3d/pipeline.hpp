#pragma once

// End-to-end orchestration over one sample, dataset validation and the
// metrics report used by the command-line tool.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tryon3d/config.hpp"
#include "tryon3d/depth.hpp"
#include "tryon3d/fixture.hpp"
#include "tryon3d/fusion.hpp"
#include "tryon3d/io.hpp"
#include "tryon3d/metrics.hpp"
#include "tryon3d/ply.hpp"
#include "tryon3d/prealign.hpp"
#include "tryon3d/recon.hpp"
#include "tryon3d/tps.hpp"

namespace tryon3d {

namespace fs = std::filesystem;

/// Dataset directory names, one file per sample basename in each.
struct DatasetLayout {
  static constexpr const char* kCloth = "cloth";
  static constexpr const char* kImage = "image";
  static constexpr const char* kParse = "parse";
  static constexpr const char* kPose = "pose";
  static constexpr const char* kDepthFront = "depth-front";
  static constexpr const char* kDepthBack = "depth-back";
  // Optional ground truth used only for reporting.
  static constexpr const char* kGtCloth = "gt-cloth";
  static constexpr const char* kGtMask = "gt-mask";
};

struct SampleRecord {
  std::string name = "sample";
  fs::path cloth;
  fs::path image;
  fs::path parse;
  fs::path pose;
  std::optional<fs::path> depth_front;
  std::optional<fs::path> depth_back;
  std::optional<fs::path> gt_cloth;
  std::optional<fs::path> gt_mask;
};

inline SampleRecord sample_from_dataset(const fs::path& root, const std::string& name) {
  SampleRecord r;
  r.name = name;
  r.cloth = root / DatasetLayout::kCloth / (name + ".png");
  r.image = root / DatasetLayout::kImage / (name + ".png");
  r.parse = root / DatasetLayout::kParse / (name + ".png");
  r.pose = root / DatasetLayout::kPose / (name + ".txt");
  auto optional_file = [&](const char* dir, const char* ext) -> std::optional<fs::path> {
    const auto p = root / dir / (name + ext);
    if (fs::exists(p)) return p;
    return std::nullopt;
  };
  r.depth_front = optional_file(DatasetLayout::kDepthFront, ".pfm");
  r.depth_back = optional_file(DatasetLayout::kDepthBack, ".pfm");
  r.gt_cloth = optional_file(DatasetLayout::kGtCloth, ".png");
  r.gt_mask = optional_file(DatasetLayout::kGtMask, ".png");
  return r;
}

/// Writes the synthetic sample in dataset layout (including ground truth).
inline SampleRecord write_synthetic_dataset(const fs::path& root, const std::string& name = "synthetic_0000",
                                            int width = 320, int height = 512) {
  const SyntheticSample s = make_synthetic_sample(width, height);
  for (const char* dir : {DatasetLayout::kCloth, DatasetLayout::kImage, DatasetLayout::kParse, DatasetLayout::kPose,
                          DatasetLayout::kDepthFront, DatasetLayout::kDepthBack, DatasetLayout::kGtCloth,
                          DatasetLayout::kGtMask})
    fs::create_directories(root / dir);
  save_image(s.cloth, root / DatasetLayout::kCloth / (name + ".png"));
  save_image(s.image, root / DatasetLayout::kImage / (name + ".png"));
  save_labels(s.parse, root / DatasetLayout::kParse / (name + ".png"));
  save_keypoints(s.pose, root / DatasetLayout::kPose / (name + ".txt"));
  save_depth(s.depth_front, root / DatasetLayout::kDepthFront / (name + ".pfm"));
  save_depth(s.depth_back, root / DatasetLayout::kDepthBack / (name + ".pfm"));
  save_image(s.gt_cloth, root / DatasetLayout::kGtCloth / (name + ".png"));
  save_mask(s.gt_mask, root / DatasetLayout::kGtMask / (name + ".png"));
  return sample_from_dataset(root, name);
}

struct PipelineResult {
  std::map<std::string, fs::path> artifacts;
  std::vector<std::string> report;
};

namespace detail {

// Runs one stage, re-raising failures tagged with stage and sample while
// keeping the error category.
template <typename Fn>
auto stage(const char* name, const std::string& sample, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("stage '") + name + "' [" + sample + "]: " + e.what());
  } catch (const InputError& e) {
    throw InputError(std::string("stage '") + name + "' [" + sample + "]: " + e.what());
  } catch (const std::exception& e) {
    throw InputError(std::string("stage '") + name + "' [" + sample + "]: " + e.what());
  }
}

inline bool mesh_is_closed(const Mesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      auto a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  return std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second == 2; });
}

}  // namespace detail

/// prealign -> contour correspondences -> TPS -> warp -> fusion mask ->
/// coarse try-on -> fuse -> back texture -> stitched mesh -> PLY. Every
/// intermediate goes to cfg.output_dir; the report lists metrics against
/// whatever ground truth the sample provides.
inline PipelineResult run_pipeline(const SampleRecord& sample, const PipelineConfig& cfg) {
  cfg.validate();
  const ScopedThreads threads(cfg.threads);
  const std::string& id = sample.name;
  const fs::path out = cfg.output_dir;
  PipelineResult result;
  auto& rep = result.report;

  struct Inputs {
    RgbImage cloth, image;
    LabelMap parse;
    Keypoints pose{};
    std::optional<DepthMap> df, db;
    std::optional<RgbImage> gt_cloth;
    std::optional<MaskImage> gt_mask;
  };
  const Inputs in = detail::stage("load", id, [&] {
    Inputs r;
    r.cloth = load_image(sample.cloth);
    r.image = load_image(sample.image);
    r.parse = load_labels(sample.parse);
    require_same_dims(r.image, r.parse, "person image vs segmentation");
    require_same_dims(r.image, r.cloth, "person image vs cloth image");
    r.pose = load_keypoints(sample.pose, r.image.width(), r.image.height());
    if (sample.depth_front && sample.depth_back) {
      r.df = load_depth(*sample.depth_front);
      r.db = load_depth(*sample.depth_back);
      require_same_dims(r.image, *r.df, "person image vs front depth");
      require_same_dims(r.image, *r.db, "person image vs back depth");
    } else if (!cfg.synth_depth) {
      throw InputError("no depth maps supplied and synthetic depth disabled");
    }
    if (sample.gt_cloth) {
      r.gt_cloth = load_image(*sample.gt_cloth);
      require_same_dims(r.image, *r.gt_cloth, "person image vs ground-truth cloth");
    }
    if (sample.gt_mask) {
      r.gt_mask = load_mask(*sample.gt_mask);
      require_same_dims(r.image, *r.gt_mask, "person image vs ground-truth mask");
    }
    return r;
  });
  const int w = in.image.width(), h = in.image.height();
  fs::create_directories(out);
  auto artifact = [&](const std::string& key, const std::string& file) {
    result.artifacts[key] = out / file;
    return out / file;
  };
  rep.push_back("sample=" + id);
  rep.push_back("width=" + std::to_string(w));
  rep.push_back("height=" + std::to_string(h));

  // Pre-alignment onto the arm-torso region.
  const MaskImage cloth_mask = cloth_mask_from_image(in.cloth);
  const MaskImage arm_torso = arm_torso_region(in.parse);
  struct Aligned {
    AffineParams params;
    RgbImage image;
    MaskImage mask;
  };
  const Aligned aligned = detail::stage("prealign", id, [&] {
    const AffineParams p = compute_prealign(cloth_mask, arm_torso);
    return Aligned{p, apply_affine(in.cloth, p, w, h), apply_affine(cloth_mask, p, w, h)};
  });
  save_image(aligned.image, artifact("cloth_aff", "cloth_aff.png"));
  rep.push_back(metric_line("prealign_scale", aligned.params.scale));
  rep.push_back(metric_line("prealign_tx", aligned.params.translate_x));
  rep.push_back(metric_line("prealign_ty", aligned.params.translate_y));
  rep.push_back(metric_line("iou_raw", iou(cloth_mask, arm_torso)));
  rep.push_back(metric_line("iou_prealign", iou(aligned.mask, arm_torso)));

  // TPS from person garment region (output space) to the aligned cloth.
  const MaskImage garment_target = label_mask(in.parse, {Label::kUpperClothes});
  struct Warped {
    TpsParams params;
    RgbImage image;
    MaskImage mask;
  };
  const Warped warped = detail::stage("warp", id, [&] {
    const Correspondences corr = contour_correspondences(garment_target, aligned.mask, cfg.tps_points);
    const TpsParams p = fit_tps(corr, cfg.tps_lambda);
    return Warped{p, tps_warp_image(aligned.image, p, w, h), tps_warp_image(aligned.mask, p, w, h)};
  });
  save_image(warped.image, artifact("cloth_warp", "cloth_warp.png"));
  rep.push_back("tps_control_points=" + std::to_string(warped.params.control_points.size()));
  rep.push_back(metric_line("iou_warp", iou(warped.mask, garment_target)));
  if (in.gt_cloth) rep.push_back(metric_line("warping_loss", warping_loss(warped.image, *in.gt_cloth)));
  if (in.gt_mask) rep.push_back(metric_line("iou_warp_gt", iou(warped.mask, *in.gt_mask)));

  // Texture fusion.
  const GrayImage fusion_mask = detail::stage("fusion_mask", id, [&] { return derive_fusion_mask(in.parse, warped.mask); });
  save_gray(fusion_mask, artifact("fusion_mask", "fusion_mask.png"));
  const RgbImage coarse = detail::stage("coarse_tryon", id, [&] {
    const RgbImage base = restore_background(extract_preserved(in.image, in.parse), in.image, in.parse);
    return coarse_tryon(base, in.parse, cfg.inpaint_radius);
  });
  save_image(coarse, artifact("coarse_tryon", "coarse_tryon.png"));
  const RgbImage tryon = detail::stage("fuse", id, [&] { return fuse(warped.image, coarse, fusion_mask); });
  save_image(tryon, artifact("tryon", "tryon.png"));
  rep.push_back(metric_line("ssim", ssim(tryon, in.image)));
  {
    const MaskImage mask_ref = in.gt_mask ? *in.gt_mask : garment_target;
    const TfmLosses l = tfm_losses(tryon, in.image, fusion_mask, mask_ref);
    rep.push_back(metric_line("l_tryon", l.tryon));
    rep.push_back(metric_line("l_mask", l.mask));
    rep.push_back(metric_line("l_tfm", l.combined));
  }

  // Reconstruction.
  const RgbImage back_tex =
      detail::stage("back_texture", id, [&] { return make_back_texture(tryon, in.parse, cfg.inpaint_radius); });
  save_image(back_tex, artifact("back_texture", "back_texture.png"));
  const MaskImage person = person_mask(in.parse);
  const DoubleDepth depth = detail::stage("depth", id, [&] {
    if (cfg.synth_depth) return synth_depth(person, cfg.synth_base, cfg.synth_amplitude);
    return DoubleDepth{*in.df, *in.db};
  });
  save_depth(depth.front, artifact("depth_front", "depth_front.pfm"));
  save_depth(depth.back, artifact("depth_back", "depth_back.pfm"));
  if (cfg.synth_depth && in.df && in.db) {
    const DrmWeights weights{cfg.lambda_depth, cfg.lambda_grad};
    for (const auto& m : depth_metric_lines(depth_metrics(depth.front, *in.df, person), "synth_front_"))
      rep.push_back(m);
    for (const auto& m : depth_metric_lines(depth_metrics(depth.back, *in.db, person), "synth_back_")) rep.push_back(m);
    rep.push_back(metric_line("synth_front_drm", drm_loss(depth.front, *in.df, person, weights).value));
    rep.push_back(metric_line("synth_back_drm", drm_loss(depth.back, *in.db, person, weights).value));
    rep.push_back(metric_line("synth_mpm_depth", mpm_depth_loss(depth.front, depth.back, *in.df, *in.db, person)));
  }
  const Mesh mesh = detail::stage("reconstruct", id, [&] { return stitch_mesh(depth.front, depth.back, person, tryon, back_tex); });
  detail::stage("export", id, [&] {
    export_ply(mesh, artifact("mesh", "mesh.ply"));
    return 0;
  });
  rep.push_back("mesh_vertices=" + std::to_string(mesh.vertices.size()));
  rep.push_back("mesh_triangles=" + std::to_string(mesh.triangles.size()));
  rep.push_back(std::string("mesh_closed=") + (detail::mesh_is_closed(mesh) ? "1" : "0"));
  {
    const MaskImage used = cleanup_mask(person);
    rep.push_back("cleanup_dropped_pixels=" + std::to_string(count(person) - count(used)));
    const DepthMap rf = render_depth(mesh, w, h, Side::kFront);
    const DepthMap rb = render_depth(mesh, w, h, Side::kBack);
    for (const auto& m : depth_metric_lines(depth_metrics(rf, depth.front, used), "render_front_")) rep.push_back(m);
    for (const auto& m : depth_metric_lines(depth_metrics(rb, depth.back, used), "render_back_")) rep.push_back(m);
  }

  {
    const fs::path report_path = artifact("report", "report.txt");
    std::ofstream f(report_path);
    if (!f) throw InputError("cannot write " + report_path.string());
    for (const auto& line : rep) f << line << "\n";
  }
  return result;
}

struct DatasetReport {
  std::size_t valid = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // basename, reason

  std::string summary() const {
    return std::to_string(valid) + " valid, " + std::to_string(failures.size()) + " invalid";
  }
  std::vector<std::string> lines() const {
    std::vector<std::string> out{summary()};
    for (const auto& [name, why] : failures) out.push_back("invalid " + name + ": " + why);
    return out;
  }
};

/// Checks the dataset layout: the six per-sample directories must share
/// basenames, rasters must agree in size and depth files must be valid PFM.
inline DatasetReport validate_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw InputError("dataset root does not exist: " + root.string());
  struct Dir {
    const char* name;
    const char* ext;
  };
  const Dir dirs[] = {{DatasetLayout::kCloth, ".png"},     {DatasetLayout::kImage, ".png"},
                      {DatasetLayout::kParse, ".png"},     {DatasetLayout::kPose, ".txt"},
                      {DatasetLayout::kDepthFront, ".pfm"}, {DatasetLayout::kDepthBack, ".pfm"}};
  std::set<std::string> names;
  for (const auto& d : dirs) {
    const auto dir = root / d.name;
    if (!fs::is_directory(dir)) continue;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == d.ext) names.insert(entry.path().stem().string());
  }
  DatasetReport report;
  for (const auto& name : names) {
    std::string problem;
    for (const auto& d : dirs)
      if (!fs::exists(root / d.name / (name + d.ext))) problem += std::string(problem.empty() ? "" : "; ") + "missing " + d.name + "/" + name + d.ext;
    if (problem.empty()) {
      try {
        const auto rec = sample_from_dataset(root, name);
        const RgbImage image = load_image(rec.image);
        const RgbImage cloth = load_image(rec.cloth);
        const LabelMap parse = load_labels(rec.parse);
        require_same_dims(image, cloth, "image vs cloth");
        require_same_dims(image, parse, "image vs parse");
        load_keypoints(rec.pose, image.width(), image.height());
        const DepthMap df = load_depth(*rec.depth_front);
        const DepthMap db = load_depth(*rec.depth_back);
        require_same_dims(image, df, "image vs depth-front");
        require_same_dims(image, db, "image vs depth-back");
      } catch (const std::exception& e) {
        problem = e.what();
      }
    }
    if (problem.empty())
      ++report.valid;
    else
      report.failures.emplace_back(name, problem);
  }
  return report;
}

/// Inputs for the metrics report; every pair is optional.
struct MetricsInputs {
  std::optional<RgbImage> pred_image, gt_image;
  std::optional<MaskImage> pred_mask, gt_mask;
  std::optional<DepthMap> pred_depth, gt_depth;
  std::optional<MaskImage> depth_mask;  // defaults to nonzero ground-truth depth
  bool relative = false;
};

inline std::vector<std::string> metrics_report(const MetricsInputs& in) {
  std::vector<std::string> lines;
  if (in.pred_image.has_value() != in.gt_image.has_value() || in.pred_mask.has_value() != in.gt_mask.has_value() ||
      in.pred_depth.has_value() != in.gt_depth.has_value())
    throw InputError("metrics: every prediction needs its ground truth counterpart");
  if (in.pred_image) {
    require_same_dims(*in.pred_image, *in.gt_image, "metrics image");
    lines.push_back(metric_line("ssim", ssim(*in.pred_image, *in.gt_image)));
  }
  if (in.pred_mask) {
    require_same_dims(*in.pred_mask, *in.gt_mask, "metrics mask");
    lines.push_back(metric_line("iou", iou(*in.pred_mask, *in.gt_mask)));
  }
  if (in.pred_depth) {
    require_same_dims(*in.pred_depth, *in.gt_depth, "metrics depth");
    MaskImage mask(in.gt_depth->width(), in.gt_depth->height());
    if (in.depth_mask) {
      require_same_dims(*in.gt_depth, *in.depth_mask, "metrics depth mask");
      mask = *in.depth_mask;
    } else {
      for (std::size_t i = 0; i < mask.values().size(); ++i) mask.values()[i] = in.gt_depth->values()[i] != 0.0;
    }
    for (const auto& l : depth_metric_lines(depth_metrics(*in.pred_depth, *in.gt_depth, mask, in.relative)))
      lines.push_back(l);
  }
  if (lines.empty()) throw InputError("metrics: nothing to compare");
  return lines;
}

}  // namespace tryon3d
