// Command-line front end: one subcommand per pipeline stage plus the full
// pipeline, dataset validation, metrics and the synthetic fixture.
//
// Exit codes: 0 success, 2 input or validation error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tryon3d/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tryon3d;

namespace {

struct GlobalFlags {
  std::string config;
  std::string out;
  int threads = 0;
  bool synth_depth = false;
  int tps_points = 0;
  int inpaint_radius = 0;
};

PipelineConfig resolve_config(const GlobalFlags& g) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.synth_depth) cfg.synth_depth = true;
  if (g.tps_points > 0) cfg.tps_points = g.tps_points;
  if (g.inpaint_radius > 0) cfg.inpaint_radius = g.inpaint_radius;
  cfg.validate();
  set_num_threads(cfg.threads);
  return cfg;
}

void print_lines(const std::vector<std::string>& lines) {
  for (const auto& l : lines) std::cout << l << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tryon3d: garment alignment, texture fusion and double-depth mesh reconstruction"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "flat JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 256));
  app.add_flag("--synth-depth", g.synth_depth, "synthesize depth from the person mask");
  app.add_option("--tps-points", g.tps_points, "contour samples per mask")->check(CLI::Range(3, 4096));
  app.add_option("--inpaint-radius", g.inpaint_radius, "inpainting radius in px")->check(CLI::Range(1, 64));
  app.fallthrough();

  // prealign
  auto* pre = app.add_subcommand("prealign", "center and rescale the cloth onto the arm-torso region");
  std::string pre_cloth, pre_parse;
  pre->add_option("--cloth", pre_cloth)->required()->check(CLI::ExistingFile);
  pre->add_option("--parse", pre_parse)->required()->check(CLI::ExistingFile);

  // warp
  auto* warp = app.add_subcommand("warp", "TPS-warp a pre-aligned cloth onto the upper-clothes region");
  std::string warp_cloth, warp_parse, warp_corr;
  warp->add_option("--cloth", warp_cloth, "pre-aligned cloth image")->required()->check(CLI::ExistingFile);
  warp->add_option("--parse", warp_parse)->required()->check(CLI::ExistingFile);
  warp->add_option("--correspondences", warp_corr, "\"sx sy tx ty\" lines (output px -> cloth px)")
      ->check(CLI::ExistingFile);

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "composite the warped cloth over the coarse try-on");
  std::string fuse_cloth, fuse_image, fuse_parse;
  fuse_cmd->add_option("--cloth", fuse_cloth, "warped cloth image")->required()->check(CLI::ExistingFile);
  fuse_cmd->add_option("--image", fuse_image)->required()->check(CLI::ExistingFile);
  fuse_cmd->add_option("--parse", fuse_parse)->required()->check(CLI::ExistingFile);

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "build a closed colored mesh from double depth");
  std::string rec_tex, rec_parse, rec_df, rec_db;
  rec->add_option("--texture", rec_tex, "try-on image")->required()->check(CLI::ExistingFile);
  rec->add_option("--parse", rec_parse)->required()->check(CLI::ExistingFile);
  rec->add_option("--depth-front", rec_df)->check(CLI::ExistingFile);
  rec->add_option("--depth-back", rec_db)->check(CLI::ExistingFile);

  // metrics
  auto* met = app.add_subcommand("metrics", "compare predictions against ground truth");
  std::string m_pi, m_gi, m_pm, m_gm, m_pd, m_gd, m_mask;
  bool m_relative = false;
  met->add_option("--pred-image", m_pi)->check(CLI::ExistingFile);
  met->add_option("--gt-image", m_gi)->check(CLI::ExistingFile);
  met->add_option("--pred-mask", m_pm)->check(CLI::ExistingFile);
  met->add_option("--gt-mask", m_gm)->check(CLI::ExistingFile);
  met->add_option("--pred-depth", m_pd)->check(CLI::ExistingFile);
  met->add_option("--gt-depth", m_gd)->check(CLI::ExistingFile);
  met->add_option("--depth-mask", m_mask, "mask for depth metrics (default: nonzero gt depth)")
      ->check(CLI::ExistingFile);
  met->add_flag("--relative", m_relative, "divide depth errors by the ground truth");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "run every stage on one sample");
  SampleRecord rec_sample;
  std::string p_dataset, p_name, p_df, p_db, p_gc, p_gm;
  pipe->add_option("--dataset", p_dataset, "dataset root (with --name)")->check(CLI::ExistingDirectory);
  pipe->add_option("--name", p_name, "sample basename inside --dataset");
  pipe->add_option("--cloth", rec_sample.cloth);
  pipe->add_option("--image", rec_sample.image);
  pipe->add_option("--parse", rec_sample.parse);
  pipe->add_option("--pose", rec_sample.pose);
  pipe->add_option("--depth-front", p_df);
  pipe->add_option("--depth-back", p_db);
  pipe->add_option("--gt-cloth", p_gc);
  pipe->add_option("--gt-mask", p_gm);

  // validate-dataset
  auto* val = app.add_subcommand("validate-dataset", "check a dataset directory");
  std::string v_root;
  val->add_option("root", v_root)->required();

  // synth-sample
  auto* syn = app.add_subcommand("synth-sample", "write the bundled synthetic sample in dataset layout");
  std::string s_name = "synthetic_0000";
  int s_w = 320, s_h = 512;
  syn->add_option("--name", s_name);
  syn->add_option("--width", s_w)->check(CLI::Range(32, 4096));
  syn->add_option("--height", s_h)->check(CLI::Range(32, 4096));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const PipelineConfig cfg = resolve_config(g);
    const fs::path out = cfg.output_dir;

    if (*pre) {
      const RgbImage cloth = load_image(pre_cloth);
      const LabelMap parse = load_labels(pre_parse);
      const MaskImage cloth_mask = cloth_mask_from_image(cloth);
      const MaskImage target = arm_torso_region(parse);
      const AffineParams p = compute_prealign(cloth_mask, target);
      fs::create_directories(out);
      save_image(apply_affine(cloth, p, parse.width(), parse.height()), out / "cloth_aff.png");
      print_lines({metric_line("scale", p.scale), metric_line("translate_x", p.translate_x),
                   metric_line("translate_y", p.translate_y), metric_line("iou_raw", iou(cloth_mask, target)),
                   metric_line("iou_prealign", iou(apply_affine(cloth_mask, p, parse.width(), parse.height()), target))});
    } else if (*warp) {
      const RgbImage cloth = load_image(warp_cloth);
      const LabelMap parse = load_labels(warp_parse);
      const MaskImage target = label_mask(parse, {Label::kUpperClothes});
      const MaskImage cloth_mask = cloth_mask_from_image(cloth);
      const Correspondences corr = warp_corr.empty()
                                       ? contour_correspondences(target, cloth_mask, cfg.tps_points)
                                       : load_correspondences(warp_corr);
      const TpsParams p = fit_tps(corr, cfg.tps_lambda);
      fs::create_directories(out);
      save_image(tps_warp_image(cloth, p, parse.width(), parse.height()), out / "cloth_warp.png");
      save_correspondences(corr, out / "correspondences.txt");
      print_lines({"control_points=" + std::to_string(corr.source_points.size()),
                   metric_line("iou_warp", iou(tps_warp_image(cloth_mask, p, parse.width(), parse.height()), target))});
    } else if (*fuse_cmd) {
      const RgbImage cloth = load_image(fuse_cloth);
      const RgbImage image = load_image(fuse_image);
      const LabelMap parse = load_labels(fuse_parse);
      require_same_dims(image, parse, "image vs parse");
      require_same_dims(image, cloth, "image vs cloth");
      const GrayImage m = derive_fusion_mask(parse, cloth_mask_from_image(cloth));
      const RgbImage coarse = coarse_tryon(restore_background(extract_preserved(image, parse), image, parse), parse, cfg.inpaint_radius);
      const RgbImage tryon = fuse(cloth, coarse, m);
      fs::create_directories(out);
      save_gray(m, out / "fusion_mask.png");
      save_image(coarse, out / "coarse_tryon.png");
      save_image(tryon, out / "tryon.png");
      print_lines({metric_line("ssim", ssim(tryon, image))});
    } else if (*rec) {
      const RgbImage tex = load_image(rec_tex);
      const LabelMap parse = load_labels(rec_parse);
      require_same_dims(tex, parse, "texture vs parse");
      const MaskImage person = person_mask(parse);
      DoubleDepth depth;
      if (!rec_df.empty() && !rec_db.empty()) {
        depth = {load_depth(rec_df), load_depth(rec_db)};
      } else if (cfg.synth_depth) {
        depth = synth_depth(person, cfg.synth_base, cfg.synth_amplitude);
      } else {
        throw InputError("reconstruct: pass --depth-front and --depth-back, or --synth-depth");
      }
      const RgbImage back = make_back_texture(tex, parse, cfg.inpaint_radius);
      const Mesh mesh = stitch_mesh(depth.front, depth.back, person, tex, back);
      fs::create_directories(out);
      save_image(back, out / "back_texture.png");
      export_ply(mesh, out / "mesh.ply");
      print_lines({"mesh_vertices=" + std::to_string(mesh.vertices.size()),
                   "mesh_triangles=" + std::to_string(mesh.triangles.size())});
    } else if (*met) {
      MetricsInputs in;
      if (!m_pi.empty()) in.pred_image = load_image(m_pi);
      if (!m_gi.empty()) in.gt_image = load_image(m_gi);
      if (!m_pm.empty()) in.pred_mask = load_mask(m_pm);
      if (!m_gm.empty()) in.gt_mask = load_mask(m_gm);
      if (!m_pd.empty()) in.pred_depth = load_depth(m_pd);
      if (!m_gd.empty()) in.gt_depth = load_depth(m_gd);
      if (!m_mask.empty()) in.depth_mask = load_mask(m_mask);
      in.relative = m_relative;
      print_lines(metrics_report(in));
    } else if (*pipe) {
      SampleRecord sample = rec_sample;
      if (!p_dataset.empty()) {
        if (p_name.empty()) throw InputError("pipeline: --dataset needs --name");
        sample = sample_from_dataset(p_dataset, p_name);
      } else {
        if (sample.cloth.empty() || sample.image.empty() || sample.parse.empty() || sample.pose.empty())
          throw InputError("pipeline: --cloth, --image, --parse and --pose are required without --dataset");
        sample.name = sample.image.stem().string();
        if (!p_df.empty()) sample.depth_front = p_df;
        if (!p_db.empty()) sample.depth_back = p_db;
        if (!p_gc.empty()) sample.gt_cloth = p_gc;
        if (!p_gm.empty()) sample.gt_mask = p_gm;
      }
      print_lines(run_pipeline(sample, cfg).report);
    } else if (*val) {
      print_lines(validate_dataset(v_root).lines());
    } else if (*syn) {
      const SampleRecord r = write_synthetic_dataset(out, s_name, s_w, s_h);
      std::cout << "wrote " << r.name << " under " << out.string() << "\n";
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
