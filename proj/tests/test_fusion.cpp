#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "test_util.hpp"
#include "tryon3d/fusion.hpp"

using namespace tryon3d;

namespace {

Keypoints all_absent() { return Keypoints{}; }

LabelMap random_labels(int w, int h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> l(0, kLabelCount - 1);
  LabelMap s(w, h);
  for (auto& v : s.values()) v = static_cast<std::uint8_t>(l(rng));
  return s;
}

std::string keypoint_text(const Keypoints& kp) {
  std::ostringstream out;
  for (int j = 0; j < kJointCount; ++j) {
    out << joint_names()[j];
    if (kp[j].present)
      out << ' ' << kp[j].x << ' ' << kp[j].y << ' ' << kp[j].confidence << '\n';
    else
      out << " absent\n";
  }
  return out.str();
}

}  // namespace

TEST(RasterizePose, AbsentJointIsZero) {
  const auto maps = rasterize_pose(all_absent(), 12, 10, 3.0);
  ASSERT_EQ(maps.size(), 25u);
  for (const auto& m : maps)
    for (double v : m.values()) EXPECT_EQ(v, 0.0);
}

TEST(RasterizePose, PeakAndOneSigma) {
  Keypoints kp{};
  kp[0] = {10, 10, 0.9, true};
  kp[3] = {10, 10, 0.4, true};
  const auto maps = rasterize_pose(kp, 32, 24, 3.0);
  EXPECT_EQ(maps[0].at(10, 10), 1.0);
  EXPECT_NEAR(maps[0].at(13, 10), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(maps[0].at(10, 7), 0.6065306597126334, 1e-15);
  EXPECT_TRUE(maps[0] == maps[3]);
  for (double v : maps[0].values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(rasterize_pose(kp, 8, 8, 0.0), InputError);
}

TEST(Keypoints, ParseRoundTripAndClamp) {
  Keypoints kp{};
  kp[1] = {4.5, 7.25, 0.8, true};
  kp[24] = {100, -3, 1.0, true};
  std::istringstream in(keypoint_text(kp));
  const Keypoints back = parse_keypoints(in, 20, 30);
  EXPECT_TRUE(back[1].present);
  EXPECT_EQ(back[1].x, 4.5);
  EXPECT_EQ(back[1].y, 7.25);
  EXPECT_EQ(back[1].confidence, 0.8);
  EXPECT_EQ(back[24].x, 19.0);
  EXPECT_EQ(back[24].y, 0.0);
  EXPECT_FALSE(back[0].present);

  const auto dir = testutil::scratch("fusion_kp");
  save_keypoints(back, dir / "k.txt");
  const Keypoints again = load_keypoints(dir / "k.txt", 20, 30);
  for (int j = 0; j < kJointCount; ++j) {
    EXPECT_EQ(again[j].present, back[j].present);
    EXPECT_EQ(again[j].x, back[j].x);
    EXPECT_EQ(again[j].y, back[j].y);
  }
}

TEST(Keypoints, MalformedFiles) {
  std::string text = keypoint_text(all_absent());
  std::istringstream missing(text.substr(0, text.rfind("RHeel")));
  EXPECT_THROW(parse_keypoints(missing, 8, 8), InputError);
  std::istringstream unknown(text + "Tail 1 1 1\n");
  EXPECT_THROW(parse_keypoints(unknown, 8, 8), InputError);
  std::istringstream dup(text + "Nose 1 1 1\n");
  EXPECT_THROW(parse_keypoints(dup, 8, 8), InputError);
  std::istringstream conf("Nose 1 1 2\n" + text.substr(text.find('\n') + 1));
  EXPECT_THROW(parse_keypoints(conf, 8, 8), InputError);
}

TEST(ExtractPreserved, BackgroundAndHair) {
  std::mt19937_64 rng(1);
  const RgbImage img = testutil::random_rgb(9, 7, rng);
  EXPECT_TRUE(extract_preserved(img, LabelMap(9, 7, 0)) == RgbImage(9, 7));
  EXPECT_TRUE(extract_preserved(img, LabelMap(9, 7, 1)) == img);
  EXPECT_THROW(extract_preserved(img, LabelMap(9, 8)), InputError);
}

TEST(ExtractPreserved, MixedMapPerPixel) {
  std::mt19937_64 rng(2);
  const RgbImage img = testutil::random_rgb(16, 12, rng);
  const LabelMap s = random_labels(16, 12, rng);
  const RgbImage p = extract_preserved(img, s);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) {
      const int l = s.at(x, y);
      const bool keep = l == 1 || l == 2 || l == 6 || l == 8;
      const Rgb want = keep ? img.pixel(x, y) : Rgb{0, 0, 0};
      EXPECT_EQ(p.pixel(x, y), want);
    }
}

TEST(Agnostic, TwentyNineChannels) {
  std::mt19937_64 rng(3);
  const RgbImage img = testutil::random_rgb(20, 16, rng);
  LabelMap s(20, 16);
  s.at(10, 8) = 2;
  Keypoints kp{};
  kp[0] = {5, 5, 1, true};
  const AgnosticRep a = assemble_agnostic(kp, img, s);
  EXPECT_EQ(a.channel_count(), 29);
  EXPECT_EQ(a.pose.size(), 25u);
  for (const auto& c : a.pose) {
    EXPECT_EQ(c.width(), 20);
    EXPECT_EQ(c.height(), 16);
  }
  EXPECT_TRUE(a.preserved == extract_preserved(img, s));
  // Coarse mask: disk of radius 8 around the single person pixel.
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 20; ++x) {
      const double d2 = (x - 10) * (x - 10) + (y - 8) * (y - 8);
      EXPECT_EQ(a.coarse_mask.at(x, y), d2 <= 64 ? 1 : 0) << x << "," << y;
    }
}

TEST(FusionMask, Examples) {
  const LabelMap upper(8, 6, 3);
  const GrayImage full = derive_fusion_mask(upper, MaskImage(8, 6, 1));
  for (double v : full.values()) EXPECT_EQ(v, 1.0);
  const GrayImage none = derive_fusion_mask(upper, MaskImage(8, 6));
  for (double v : none.values()) EXPECT_EQ(v, 0.0);

  LabelMap striped = upper;
  for (int x = 0; x < 8; ++x) striped.at(x, 2) = 4;
  const MaskImage cw = testutil::rect_mask(8, 6, 1, 0, 6, 5);
  const GrayImage m = derive_fusion_mask(striped, cw);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(m.at(x, y), (y != 2 && cw.at(x, y)) ? 1.0 : 0.0);
  EXPECT_THROW(derive_fusion_mask(upper, MaskImage(6, 8)), InputError);
}

TEST(FusionMask, SubsetOfClothMask) {
  std::mt19937_64 rng(4);
  const LabelMap s = random_labels(24, 24, rng);
  const MaskImage cw = testutil::disk_mask(24, 24, 12, 12, 8);
  const GrayImage m = derive_fusion_mask(s, cw);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      if (m.at(x, y) != 0.0) {
        EXPECT_TRUE(cw.at(x, y));
      }
      if (s.at(x, y) == 4 || s.at(x, y) == 5) {
        EXPECT_EQ(m.at(x, y), 0.0);
      }
    }
}

TEST(CoarseTryon, NothingRemovedIsIdentity) {
  std::mt19937_64 rng(5);
  const RgbImage img = testutil::random_rgb(10, 10, rng);
  LabelMap s(10, 10, 2);
  EXPECT_TRUE(coarse_tryon(img, s, 3) == img);
  EXPECT_THROW(coarse_tryon(img, s, 0), InputError);
}

TEST(CoarseTryon, ConstantColorDiskFilledExactly) {
  const RgbImage img(32, 32, 0.3);
  LabelMap s(32, 32, 1);
  const MaskImage disk = testutil::disk_mask(32, 32, 16, 16, 6);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (disk.at(x, y)) s.at(x, y) = 3;
  RgbImage base = extract_preserved(img, s);
  const RgbImage out = coarse_tryon(base, s, 5);
  EXPECT_TRUE(out == img);
}

TEST(CoarseTryon, FillWithinBoundaryHull) {
  // Left half red-ish, right half blue-ish, a removed band in the middle.
  RgbImage img(40, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x) img.set_pixel(x, y, x < 20 ? Rgb{0.9, 0.1, 0.2} : Rgb{0.2, 0.3, 0.8});
  LabelMap s(40, 20, 6);
  for (int y = 4; y < 16; ++y)
    for (int x = 12; x < 28; ++x) s.at(x, y) = 7;
  const RgbImage out = coarse_tryon(extract_preserved(img, s), s, 5);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x) {
      if (s.at(x, y) != 7) {
        EXPECT_EQ(out.pixel(x, y), img.pixel(x, y));
        continue;
      }
      const Rgb p = out.pixel(x, y);
      EXPECT_GE(p[0], 0.2);
      EXPECT_LE(p[0], 0.9);
      EXPECT_GE(p[1], 0.1);
      EXPECT_LE(p[1], 0.3);
      EXPECT_GE(p[2], 0.2);
      EXPECT_LE(p[2], 0.8);
    }
}

TEST(Fuse, EndpointsAndMidpoint) {
  std::mt19937_64 rng(6);
  const RgbImage cw = testutil::random_rgb(11, 9, rng), coarse = testutil::random_rgb(11, 9, rng);
  EXPECT_TRUE(fuse(cw, coarse, GrayImage(11, 9, 1.0)) == cw);
  EXPECT_TRUE(fuse(cw, coarse, GrayImage(11, 9, 0.0)) == coarse);
  const RgbImage half = fuse(RgbImage(4, 4, 1.0), RgbImage(4, 4, 0.0), GrayImage(4, 4, 0.5));
  for (double v : half.values()) EXPECT_EQ(v, 0.5);
}

TEST(Fuse, ConvexAndComplementary) {
  std::mt19937_64 rng(7);
  const RgbImage a = testutil::random_rgb(20, 20, rng), b = testutil::random_rgb(20, 20, rng);
  const GrayImage m = testutil::random_field<GrayImage>(20, 20, 0, 1, rng);
  const RgbImage ab = fuse(a, b, m), ba = fuse(b, a, m);
  for (std::size_t i = 0; i < ab.values().size(); ++i) {
    const double x = a.values()[i], y = b.values()[i];
    EXPECT_GE(ab.values()[i], std::min(x, y));
    EXPECT_LE(ab.values()[i], std::max(x, y));
    EXPECT_NEAR(ab.values()[i] + ba.values()[i], x + y, 1e-15);
  }
}

TEST(Fuse, ErrorPaths) {
  EXPECT_THROW(fuse(RgbImage(3, 3), RgbImage(3, 3), GrayImage(3, 3, 1.5)), InputError);
  EXPECT_THROW(fuse(RgbImage(3, 3), RgbImage(3, 4), GrayImage(3, 3)), InputError);
}

TEST(Fuse, ReconstructsFromPreservedPart) {
  std::mt19937_64 rng(8);
  const RgbImage img = testutil::random_rgb(16, 16, rng);
  const LabelMap s = random_labels(16, 16, rng);
  GrayImage removed(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) removed.at(x, y) = is_preserved_label(s.at(x, y)) ? 0.0 : 1.0;
  EXPECT_TRUE(fuse(img, extract_preserved(img, s), removed) == img);
}

TEST(TfmLosses, Oracles) {
  std::mt19937_64 rng(9);
  const RgbImage img = testutil::random_rgb(10, 8, rng);
  const MaskImage m = testutil::rect_mask(10, 8, 2, 2, 6, 5);
  GrayImage mf(10, 8);
  for (std::size_t i = 0; i < m.values().size(); ++i) mf.values()[i] = m.values()[i];
  const TfmLosses zero = tfm_losses(img, img, mf, m);
  EXPECT_EQ(zero.tryon, 0.0);
  EXPECT_EQ(zero.mask, 0.0);

  RgbImage off(10, 8, 0.5);
  const TfmLosses c = tfm_losses(off, RgbImage(10, 8, 0.3), mf, m);
  EXPECT_NEAR(c.tryon, 0.2, 1e-15);
  EXPECT_EQ(c.mask, 0.0);

  const RgbImage other = testutil::random_rgb(10, 8, rng);
  const GrayImage soft = testutil::random_field<GrayImage>(10, 8, 0, 1, rng);
  double st = 0, sm = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      for (int ch = 0; ch < 3; ++ch) st += std::abs(other.at(x, y, ch) - img.at(x, y, ch));
      sm += std::abs(soft.at(x, y) - (m.at(x, y) ? 1.0 : 0.0));
    }
  const TfmLosses r = tfm_losses(other, img, soft, m);
  EXPECT_NEAR(r.tryon, st / 240, 1e-12);
  EXPECT_NEAR(r.mask, sm / 80, 1e-12);
  EXPECT_DOUBLE_EQ(r.combined, r.tryon + r.mask);
  EXPECT_EQ(perceptual_term(other, img), r.tryon);
  EXPECT_THROW(tfm_losses(other, img, soft, MaskImage(8, 10)), InputError);
}

TEST(CrossEntropy, Oracles) {
  std::mt19937_64 rng(10);
  const LabelMap gt = random_labels(6, 5, rng);
  LabelProbabilities onehot(6, 5), uniform(6, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      onehot.at(x, y, gt.at(x, y)) = 1.0;
      for (int l = 0; l < kLabelCount; ++l) uniform.at(x, y, l) = 1.0 / 9.0;
    }
  EXPECT_EQ(cross_entropy_seg(onehot, gt), 0.0);
  EXPECT_NEAR(cross_entropy_seg(uniform, gt), std::log(9.0), 1e-12);

  LabelProbabilities wrong = onehot;
  wrong.at(0, 0, gt.at(0, 0)) = 0.0;
  wrong.at(0, 0, (gt.at(0, 0) + 1) % kLabelCount) = 1.0;
  const double v = cross_entropy_seg(wrong, gt);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -std::log(1e-12) / 30, 1e-12);

  LabelProbabilities bad = onehot;
  bad.at(1, 1, 0) += 0.5;
  EXPECT_THROW(cross_entropy_seg(bad, gt), InputError);
}
