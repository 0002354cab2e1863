#pragma once

// Clothing-agnostic person representation, fusion mask, classical coarse
// try-on, compositing and the non-perceptual fusion losses.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tryon3d/image.hpp"
#include "tryon3d/inpaint.hpp"
#include "tryon3d/morphology.hpp"

namespace tryon3d {

inline constexpr int kJointCount = 25;

inline const std::array<const char*, kJointCount>& joint_names() {
  static const std::array<const char*, kJointCount> names = {
      "Nose",   "Neck",   "RShoulder", "RElbow",   "RWrist",    "LShoulder", "LElbow",
      "LWrist", "MidHip", "RHip",      "RKnee",    "RAnkle",    "LHip",      "LKnee",
      "LAnkle", "REye",   "LEye",      "REar",     "LEar",      "LBigToe",   "LSmallToe",
      "LHeel",  "RBigToe", "RSmallToe", "RHeel"};
  return names;
}

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
  bool present = false;
};

using Keypoints = std::array<Keypoint, kJointCount>;

/// Parses 25 rows "name x y confidence" or "name absent", one per joint in
/// any order. Present joints are clamped into a width x height image.
inline Keypoints parse_keypoints(std::istream& in, int width, int height, const std::string& origin = "keypoints") {
  Keypoints kp{};
  std::array<bool, kJointCount> seen{};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string name;
    if (!(ss >> name) || name[0] == '#') continue;
    const auto where = origin + ":" + std::to_string(lineno);
    int joint = -1;
    for (int j = 0; j < kJointCount; ++j)
      if (name == joint_names()[j]) joint = j;
    if (joint < 0) throw InputError(where + ": unknown joint '" + name + "'");
    if (seen[joint]) throw InputError(where + ": duplicate joint '" + name + "'");
    seen[joint] = true;
    std::string first;
    if (!(ss >> first)) throw InputError(where + ": missing coordinates");
    if (first == "absent") continue;
    Keypoint& k = kp[joint];
    try {
      k.x = std::stod(first);
    } catch (const std::exception&) {
      throw InputError(where + ": bad x coordinate");
    }
    if (!(ss >> k.y >> k.confidence)) throw InputError(where + ": expected 'name x y confidence'");
    if (!std::isfinite(k.x) || !std::isfinite(k.y) || !(k.confidence >= 0.0 && k.confidence <= 1.0))
      throw InputError(where + ": coordinates must be finite and confidence in [0,1]");
    k.x = std::clamp(k.x, 0.0, static_cast<double>(width - 1));
    k.y = std::clamp(k.y, 0.0, static_cast<double>(height - 1));
    k.present = true;
  }
  for (int j = 0; j < kJointCount; ++j)
    if (!seen[j]) throw InputError(origin + ": missing joint '" + joint_names()[j] + "'");
  return kp;
}

inline Keypoints load_keypoints(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse_keypoints(in, width, height, path.string());
}

inline void save_keypoints(const Keypoints& kp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  char line[128];
  for (int j = 0; j < kJointCount; ++j) {
    if (kp[j].present)
      std::snprintf(line, sizeof(line), "%s %.17g %.17g %.17g\n", joint_names()[j], kp[j].x, kp[j].y,
                    kp[j].confidence);
    else
      std::snprintf(line, sizeof(line), "%s absent\n", joint_names()[j]);
    out << line;
  }
}

/// One Gaussian heat map exp(-d^2 / (2 sigma^2)) per joint; absent joints
/// give all-zero channels.
inline std::vector<GrayImage> rasterize_pose(const Keypoints& kp, int width, int height, double sigma) {
  if (!(sigma > 0)) throw InputError("rasterize_pose: sigma must be > 0");
  std::vector<GrayImage> maps;
  maps.reserve(kJointCount);
  for (const auto& k : kp) {
    GrayImage g(width, height);
    if (k.present)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double dx = x - k.x, dy = y - k.y;
          g.at(x, y) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    maps.push_back(std::move(g));
  }
  return maps;
}

/// Identity regions kept when the garment is removed.
inline bool is_preserved_label(std::uint8_t l) {
  return l == static_cast<std::uint8_t>(Label::kHair) || l == static_cast<std::uint8_t>(Label::kFace) ||
         l == static_cast<std::uint8_t>(Label::kLowerBody) || l == static_cast<std::uint8_t>(Label::kShoes);
}

/// Garment, arms and exposed torso: the part the new garment takes over.
inline MaskImage garment_region(const LabelMap& s) {
  return label_mask(s, {Label::kUpperClothes, Label::kLeftArm, Label::kRightArm, Label::kTorsoSkin});
}

inline RgbImage extract_preserved(const RgbImage& image, const LabelMap& s) {
  require_same_dims(image, s, "extract_preserved");
  RgbImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      if (is_preserved_label(s.at(x, y))) out.set_pixel(x, y, image.pixel(x, y));
  return out;
}

/// Preserved part with the background pixels of image put back, the base
/// the pipeline hands to coarse_tryon.
inline RgbImage restore_background(const RgbImage& preserved, const RgbImage& image, const LabelMap& s) {
  require_same_dims(preserved, image, "restore_background");
  require_same_dims(preserved, s, "restore_background");
  RgbImage out = preserved;
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x)
      if (s.at(x, y) == static_cast<std::uint8_t>(Label::kBackground)) out.set_pixel(x, y, image.pixel(x, y));
  return out;
}

/// Dilated union of all non-background labels.
inline MaskImage coarse_person_mask(const LabelMap& s, double radius = 8.0) { return dilate(person_mask(s), radius); }

/// 25 pose heat maps + preserved person part + coarse person mask.
struct AgnosticRep {
  std::vector<GrayImage> pose;
  RgbImage preserved;
  MaskImage coarse_mask;

  int channel_count() const { return static_cast<int>(pose.size()) + 3 + 1; }
};

inline AgnosticRep assemble_agnostic(const Keypoints& kp, const RgbImage& image, const LabelMap& s,
                                     double sigma = 3.0, double mask_radius = 8.0) {
  require_same_dims(image, s, "assemble_agnostic");
  return {rasterize_pose(kp, image.width(), image.height(), sigma), extract_preserved(image, s),
          coarse_person_mask(s, mask_radius)};
}

/// 1 where the garment is predicted (upper clothes) and the warped cloth
/// actually covers the pixel; arms always stay 0.
inline GrayImage derive_fusion_mask(const LabelMap& s, const MaskImage& cloth_mask) {
  require_same_dims(s, cloth_mask, "derive_fusion_mask");
  GrayImage m(s.width(), s.height());
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x)
      m.at(x, y) = (s.at(x, y) == static_cast<std::uint8_t>(Label::kUpperClothes) && cloth_mask.at(x, y)) ? 1.0 : 0.0;
  return m;
}

/// Garment-free base image: the garment region of the preserved part is
/// filled by fast-marching inpainting.
inline RgbImage coarse_tryon(const RgbImage& preserved, const LabelMap& s, int radius) {
  require_same_dims(preserved, s, "coarse_tryon");
  if (radius < 1) throw InputError("coarse_tryon: radius must be >= 1");
  return telea_inpaint(preserved, garment_region(s), radius);
}

/// I_t = C_w * M + I_c * (1 - M), per pixel and channel.
inline RgbImage fuse(const RgbImage& cloth, const RgbImage& coarse, const GrayImage& mask) {
  require_same_dims(cloth, coarse, "fuse");
  require_same_dims(cloth, mask, "fuse");
  RgbImage out(cloth.width(), cloth.height());
  for (int y = 0; y < cloth.height(); ++y)
    for (int x = 0; x < cloth.width(); ++x) {
      const double m = mask.at(x, y);
      if (!(m >= 0.0 && m <= 1.0)) throw InputError("fuse: mask value outside [0,1]");
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = cloth.at(x, y, c) * m + coarse.at(x, y, c) * (1.0 - m);
    }
  return out;
}

struct TfmLosses {
  double tryon = 0.0;
  double mask = 0.0;
  double combined = 0.0;  // tryon + mask
};

inline TfmLosses tfm_losses(const RgbImage& tryon, const RgbImage& person, const GrayImage& mask_pred,
                            const MaskImage& mask_gt) {
  require_same_dims(tryon, person, "tfm_losses");
  require_same_dims(tryon, mask_pred, "tfm_losses");
  require_same_dims(tryon, mask_gt, "tfm_losses");
  TfmLosses r;
  double sum = 0;
  for (std::size_t i = 0; i < tryon.values().size(); ++i) sum += std::abs(tryon.values()[i] - person.values()[i]);
  r.tryon = tryon.values().empty() ? 0.0 : sum / tryon.values().size();
  sum = 0;
  for (std::size_t i = 0; i < mask_pred.values().size(); ++i)
    sum += std::abs(mask_pred.values()[i] - (mask_gt.values()[i] ? 1.0 : 0.0));
  r.mask = mask_pred.values().empty() ? 0.0 : sum / mask_pred.values().size();
  r.combined = r.tryon + r.mask;
  return r;
}

/// Feature extractor for the perceptual term: image -> flat feature vector.
using FeatureExtractor = std::function<std::vector<double>(const RgbImage&)>;

inline std::vector<double> identity_features(const RgbImage& img) {
  return {img.values().begin(), img.values().end()};
}

/// Mean L1 distance between features of the two images. With the default
/// identity features this equals the plain mean-L1 try-on term.
inline double perceptual_term(const RgbImage& tryon, const RgbImage& person,
                              const FeatureExtractor& features = identity_features) {
  require_same_dims(tryon, person, "perceptual_term");
  const auto a = features(tryon);
  const auto b = features(person);
  if (a.size() != b.size()) throw InputError("perceptual_term: feature size mismatch");
  if (a.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / a.size();
}

/// Per-pixel distribution over the 9 parsing labels.
struct LabelProbabilities {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // width*height*kLabelCount

  LabelProbabilities() = default;
  LabelProbabilities(int w, int h) : width(w), height(h), values(std::size_t(w) * h * kLabelCount, 0.0) {}
  double& at(int x, int y, int label) { return values[(std::size_t(y) * width + x) * kLabelCount + label]; }
  double at(int x, int y, int label) const { return values[(std::size_t(y) * width + x) * kLabelCount + label]; }
};

/// Mean over pixels of -ln p(gt label), p clamped at 1e-12.
inline double cross_entropy_seg(const LabelProbabilities& probs, const LabelMap& gt) {
  if (probs.width != gt.width() || probs.height != gt.height())
    throw InputError("cross_entropy_seg: dimension mismatch");
  validate_labels(gt);
  const std::size_t n = gt.pixel_count();
  if (n == 0) return 0.0;
  double sum = 0;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      double total = 0;
      for (int l = 0; l < kLabelCount; ++l) {
        const double p = probs.at(x, y, l);
        if (!(p >= 0.0)) throw InputError("cross_entropy_seg: negative or non-finite probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-6) throw InputError("cross_entropy_seg: distribution does not sum to 1");
      sum += -std::log(std::max(probs.at(x, y, gt.at(x, y)), 1e-12));
    }
  return sum / n;
}

}  // namespace tryon3d
