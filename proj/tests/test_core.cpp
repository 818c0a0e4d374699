#include <filesystem>

#include <gtest/gtest.h>

#include "dseg/core/components.hpp"
#include "dseg/core/png_io.hpp"
#include "dseg/core/random.hpp"
#include "dseg/core/raster.hpp"
#include "oracles.hpp"

using namespace dseg;

namespace {

Raster<int, 1> iota_raster(int h, int w) {
  Raster<int, 1> r(h, w);
  for (int i = 0; i < h * w; ++i) r.data[i] = i;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dseg_test_core";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Crop, SubRectangle) {
  const auto src = iota_raster(10, 10);
  const auto out = crop(src, PixelBox{2, 2, 6, 6});
  ASSERT_EQ(out.height, 4);
  ASSERT_EQ(out.width, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(out.at(r, c), src.at(r + 2, c + 2));
}

TEST(Crop, FullBoxIsIdentity) {
  const auto src = iota_raster(7, 5);
  EXPECT_EQ(crop(src, PixelBox{0, 0, 5, 7}), src);
}

TEST(Crop, OutOfBoundsOrEmptyThrows) {
  const auto src = iota_raster(10, 10);
  EXPECT_THROW(crop(src, PixelBox{-1, 0, 5, 5}), invalid_geometry);
  EXPECT_THROW(crop(src, PixelBox{2, 2, 2, 6}), invalid_geometry);
  EXPECT_THROW(crop(src, PixelBox{0, 0, 11, 5}), invalid_geometry);
}

TEST(PadToSquare, TallerThanWideAndViceVersa) {
  const auto src = iota_raster(4, 6);
  const auto [out, off] = pad_to_square(src);
  EXPECT_EQ(out.height, 6);
  EXPECT_EQ(out.width, 6);
  EXPECT_EQ(off.top, 1);
  EXPECT_EQ(off.left, 0);
  // rows 0 and 5 are padding, the rest is the source shifted down by one
  const std::vector<int> golden = {0, 0,  0,  0,  0,  0,  0,  1,  2,  3,  4,  5,  6,  7,  8,  9,  10, 11,
                                   12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(out.data, golden);

  const auto [one, off1] = pad_to_square(iota_raster(1, 3));
  EXPECT_EQ(one.height, 3);
  EXPECT_EQ(off1.top, 1);
  EXPECT_EQ(off1.left, 0);

  const auto [wide, off2] = pad_to_square(iota_raster(5, 2));
  EXPECT_EQ(wide.width, 5);
  EXPECT_EQ(off2.top, 0);
  EXPECT_EQ(off2.left, 1);  // floor(3/2); the odd column goes right
}

TEST(PadToSquare, SquareUnchanged) {
  const auto src = iota_raster(3, 3);
  const auto [out, off] = pad_to_square(src);
  EXPECT_EQ(out, src);
  EXPECT_EQ(off.top, 0);
  EXPECT_EQ(off.left, 0);
}

TEST(ResizeNearest, Upsample2x2To4x4ReplicatesBlocks) {
  const auto out = resize_nearest(iota_raster(2, 2), 4, 4);
  const std::vector<int> golden = {0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3};
  EXPECT_EQ(out.data, golden);
}

TEST(ResizeNearest, Downsample4x4SamplesEvenPixels) {
  const auto out = resize_nearest(iota_raster(4, 4), 2, 2);
  const std::vector<int> golden = {0, 2, 8, 10};
  EXPECT_EQ(out.data, golden);
}

TEST(ResizeNearest, SameSizeIsIdentity) {
  const auto src = iota_raster(5, 3);
  EXPECT_EQ(resize_nearest(src, 5, 3), src);
}

TEST(ResizeNearest, NonIntegerRatioGolden) {
  // rows floor(i*3/7), cols floor(j*5/4)
  const auto out = resize_nearest(iota_raster(3, 5), 7, 4);
  const int rows[] = {0, 0, 0, 1, 1, 2, 2};
  const int cols[] = {0, 1, 2, 3};
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(out.at(i, j), rows[i] * 5 + cols[j]);
}

TEST(ResizeNearest, MultiChannelKeepsPixelsTogether) {
  const auto img = oracle::coordinate_image(26, 26);
  const auto out = resize_nearest(img, 64, 64);
  const auto& rows = oracle::rows_26_to_64();
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      EXPECT_EQ(out.at(i, j, 0), float(rows[i]) / 256.0f);
      EXPECT_EQ(out.at(i, j, 1), float(rows[j]) / 256.0f);
    }
}

TEST(Flip, TwiceIsIdentity) {
  const auto src = iota_raster(3, 4);
  EXPECT_EQ(flip_horizontal(flip_horizontal(src)), src);
  EXPECT_EQ(flip_vertical(flip_vertical(src)), src);
  EXPECT_EQ(flip_horizontal(src).at(0, 0), 3);
  EXPECT_EQ(flip_vertical(src).at(0, 0), 8);
}

TEST(Coverage, Counts) {
  EXPECT_DOUBLE_EQ(coverage(Mask(10, 10, 0)), 0.0);
  EXPECT_DOUBLE_EQ(coverage(Mask(10, 10, 1)), 1.0);
  Mask m(10, 10, 0);
  for (int i = 0; i < 25; ++i) m.data[i * 4] = 1;
  EXPECT_DOUBLE_EQ(coverage(m), 0.25);
  EXPECT_THROW(coverage(Mask(0, 5)), invalid_input);
}

TEST(Rasterize, FloorMinCeilMaxThenClamp) {
  EXPECT_EQ(rasterize(Box{7.7525, 7.7525, 32.2475, 32.2475}, 100, 100), (PixelBox{7, 7, 33, 33}));
  EXPECT_EQ(rasterize(Box{-3.5, 2.0, 12.0, 120.2}, 100, 50), (PixelBox{0, 2, 12, 100}));
  EXPECT_EQ(rasterize(Box{2, 2, 6, 6}, 10, 10), (PixelBox{2, 2, 6, 6}));
}

TEST(ProjectMask, IdentityGeometry) {
  Mask pred(8, 8, 0);
  pred.at(3, 4) = 1;
  pred.at(7, 0) = 1;
  const CropGeometry g{{0, 0, 8, 8}, 0, 0, 8, 8, 8};
  EXPECT_EQ(project_mask(pred, g, 8, 8), pred);
}

TEST(ProjectMask, PlacesRectangle) {
  const CropGeometry g{{2, 2, 6, 6}, 0, 0, 4, 4, 4};
  const Mask full = project_mask(Mask(4, 4, 1), g, 10, 10);
  EXPECT_EQ(foreground_count(full), 16u);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) EXPECT_EQ(full.at(r, c), (r >= 2 && r < 6 && c >= 2 && c < 6) ? 1 : 0);
}

TEST(ProjectMask, RejectsInconsistentGeometry) {
  const CropGeometry g{{2, 2, 6, 6}, 0, 0, 4, 4, 4};
  EXPECT_THROW(project_mask(Mask(4, 4, 1), g, 5, 5), invalid_geometry);
  EXPECT_THROW(project_mask(Mask(5, 5, 1), g, 10, 10), invalid_geometry);
  CropGeometry bad = g;
  bad.pad_top = 1;
  EXPECT_THROW(project_mask(Mask(4, 4, 1), bad, 10, 10), invalid_geometry);
}

TEST(ProjectMask, CropRoundTripIsExactWhenUpsampling) {
  // Property: for out >= padded side, projecting the forward-mapped mask
  // reproduces the source mask inside the box and zero outside.
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = uniform_int(rng, 5, 40), w = uniform_int(rng, 5, 40);
    Mask src(h, w);
    for (auto& v : src.data) v = bernoulli(rng, 0.4) ? 1 : 0;
    const int x0 = uniform_int(rng, 0, w - 1), y0 = uniform_int(rng, 0, h - 1);
    const PixelBox box{x0, y0, uniform_int(rng, x0 + 1, w), uniform_int(rng, y0 + 1, h)};
    const int side = std::max(box.width(), box.height());
    const int out = uniform_int(rng, side, 3 * side);
    const auto [fwd, geom] = crop_pad_resize(src, box, out);
    const Mask back = project_mask(fwd, geom, h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const bool inside = r >= box.y_min && r < box.y_max && c >= box.x_min && c < box.x_max;
        ASSERT_EQ(back.at(r, c), inside ? src.at(r, c) : 0) << "trial " << trial;
      }
  }
}

TEST(ProjectMask, DownsampledGolden) {
  // 10x6 box padded to 10x10 (left pad 2), model input 4x4. Padded pixel i
  // reads model pixel min(ceil(i*4/10), 3) = {0,1,1,2,2,2,3,3,3,3}.
  Mask pred(4, 4, 0);
  for (int i = 0; i < 4; ++i) pred.at(i, i) = 1;
  const CropGeometry g{{0, 0, 6, 10}, 0, 2, 4, 10, 4};
  const Mask full = project_mask(pred, g, 10, 6);
  const int back[] = {0, 1, 1, 2, 2, 2, 3, 3, 3, 3};
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 6; ++c) EXPECT_EQ(full.at(r, c), back[r] == back[c + 2] ? 1 : 0) << r << "," << c;
}

TEST(Components, FourConnectedBoxes) {
  Mask m(8, 8, 0);
  m.at(1, 1) = m.at(1, 2) = m.at(2, 2) = 1;  // one blob
  m.at(3, 3) = 1;                            // diagonal neighbour: separate
  m.at(6, 5) = m.at(7, 5) = m.at(7, 6) = 1;
  const auto boxes = component_boxes(m);
  ASSERT_EQ(boxes.size(), 3u);
  EXPECT_EQ(boxes[0], (PixelBox{1, 1, 3, 3}));
  EXPECT_EQ(boxes[1], (PixelBox{3, 3, 4, 4}));
  EXPECT_EQ(boxes[2], (PixelBox{5, 6, 7, 8}));
  EXPECT_TRUE(component_boxes(Mask(4, 4, 0)).empty());
}

TEST(Png, ImageAndMaskRoundTrip) {
  Image img(5, 7);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = float(i % 256) / 255.0f;
  save_image_png(scratch("img.png"), img);
  EXPECT_EQ(load_image_png(scratch("img.png")), img);

  Mask m(6, 3, 0);
  m.at(2, 1) = 1;
  m.at(5, 2) = 1;
  save_mask_png(scratch("mask.png"), m);
  EXPECT_EQ(load_mask_png(scratch("mask.png")), m);
}

TEST(Png, MaskWithIllegalValueIsRejected) {
  std::vector<std::uint8_t> buf(16, 0);
  buf[5] = 128;
  detail::write_png(scratch("bad.png"), PNG_FORMAT_GRAY, 4, 4, buf);
  EXPECT_THROW(load_mask_png(scratch("bad.png")), load_error);
  EXPECT_THROW(load_image_png(scratch("missing.png")), load_error);
}

TEST(Random, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    const int v = uniform_int(a, -3, 4);
    EXPECT_EQ(v, uniform_int(b, -3, 4));
    EXPECT_GE(v, -3);
    EXPECT_LE(v, 4);
  }
}
