// Copyright 2026 The fodloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "common/oracles.hpp"
#include "core/imaging.hpp"

using namespace fodloc;

namespace {

DifferenceMap map_of(int w, int h, std::vector<float> v) {
  return DifferenceMap{w, h, std::move(v)};
}

Image solid(int w, int h, float r, float g, float b) {
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  }
  return img;
}

SegmentationMap mask_with(int w, int h, std::vector<std::pair<int, int>> row_col) {
  SegmentationMap s{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0), 0.5};
  for (auto [r, c] : row_col) s.mask[static_cast<std::size_t>(r) * w + c] = 1;
  return s;
}

}  // namespace

TEST_CASE("difference map: identity, extremes and channel mean") {
  Rng rng(3);
  const Image p = oracle::random_image(rng, 9, 7);
  const auto zero = difference_map(p, p);
  CHECK(std::all_of(zero.values.begin(), zero.values.end(), [](float v) { return v == 0.0f; }));

  const auto ones = difference_map(solid(4, 4, 0, 0, 0), solid(4, 4, 1, 1, 1));
  CHECK(std::all_of(ones.values.begin(), ones.values.end(), [](float v) { return v == 1.0f; }));

  const auto d = difference_map(solid(1, 1, 0.2f, 0.4f, 0.6f), solid(1, 1, 0.4f, 0.4f, 0.2f));
  CHECK(d.values[0] == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("difference map is symmetric and zero only for identical inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Image a = oracle::random_image(rng, 6, 5);
    Image b = a;
    const auto same = difference_map(a, b);
    CHECK(same.mean() == 0.0);
    b.at(static_cast<int>(rng.uniform_int(0, 5)), static_cast<int>(rng.uniform_int(0, 4)),
         static_cast<int>(rng.uniform_int(0, 2))) += 0.25f;
    const auto ab = difference_map(a, b);
    const auto ba = difference_map(b, a);
    CHECK(ab.values == ba.values);
    CHECK(ab.mean() > 0.0);
  }
}

TEST_CASE("difference map rejects mismatched shapes") {
  CHECK_THROWS_AS(difference_map(Image(4, 4, 3), Image(4, 5, 3)), DimensionError);
  CHECK_THROWS_AS(ssim_map(Image(4, 4, 3), Image(5, 4, 3)), DimensionError);
}

TEST_CASE("ssim map matches a direct-summation reference") {
  Rng rng(5);
  for (int window : {3, 7}) {
    const Image a = oracle::random_image(rng, 16, 16);
    const Image b = oracle::random_image(rng, 16, 16);
    const auto got = ssim_map(a, b, window);
    const auto want = oracle::ssim_dissimilarity(a, b, window);
    REQUIRE(got.values.size() == want.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(got.values[i]) - want[i]));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("ssim map: identical inputs give zero, distinct constants a uniform positive map") {
  Rng rng(8);
  const Image a = oracle::random_image(rng, 12, 10);
  const auto same = ssim_map(a, a, 7);
  CHECK(*std::max_element(same.values.begin(), same.values.end()) < 1e-6f);

  const auto flat = ssim_map(solid(10, 10, 0.2f, 0.2f, 0.2f), solid(10, 10, 0.7f, 0.7f, 0.7f), 5);
  const auto [lo, hi] = std::minmax_element(flat.values.begin(), flat.values.end());
  CHECK(*lo > 0.0f);
  CHECK(*hi - *lo < 1e-6f);
  CHECK_THROWS_AS(ssim_map(a, a, 4), InvalidArgument);
  CHECK_THROWS_AS(ssim_map(a, a, 1), InvalidArgument);
}

TEST_CASE("histogram bins are closed on the right") {
  for (int k = 0; k < 256; ++k) {
    const double edge = static_cast<double>(k + 1) / 256.0;
    CHECK(histogram_bin(edge, 256) == k);
    CHECK(histogram_bin(std::nextafter(edge, 2.0), 256) == std::min(k + 1, 255));
  }
  CHECK(histogram_bin(0.0, 256) == 0);
}

TEST_CASE("otsu: constant map is degenerate") {
  CHECK_FALSE(otsu_threshold(map_of(3, 3, std::vector<float>(9, 0.0f))).has_value());
  CHECK_FALSE(otsu_threshold(map_of(3, 3, std::vector<float>(9, 0.37f))).has_value());
  // Distinct values inside one bin are still one histogram spike.
  CHECK_FALSE(otsu_threshold(map_of(2, 1, {0.0f, 0.003f})).has_value());
}

TEST_CASE("otsu: two spikes at 0 and 1 split after bin 0") {
  std::vector<float> v(64, 0.0f);
  std::fill(v.begin() + 32, v.end(), 1.0f);
  const auto t = otsu_threshold(map_of(8, 8, v));
  const auto want = oracle::otsu(v);
  REQUIRE(t.has_value());
  REQUIRE(want.has_value());
  CHECK(t->bin == 0);
  CHECK(t->bin == want->bin);
  CHECK(t->value == 1.0 / 256.0);
}

TEST_CASE("otsu equals the exhaustive between-class variance maximizer") {
  Rng rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(1, 40));
    const int h = static_cast<int>(rng.uniform_int(1, 40));
    const auto map = oracle::random_difference_map(rng, w, h);
    const auto got = otsu_threshold(map);
    const auto want = oracle::otsu(map.values);
    REQUIRE(got.has_value() == want.has_value());
    if (!want) continue;
    ++compared;
    CHECK(got->bin == want->bin);
    CHECK(got->value == want->value);
  }
  CHECK(compared > 80);
}

TEST_CASE("otsu: ties resolve to the lowest bin") {
  // Symmetric three-spike histogram: splitting below or above the middle
  // spike scores equally.
  std::vector<float> v;
  for (int i = 0; i < 10; ++i) v.push_back(0.0f);
  for (int i = 0; i < 10; ++i) v.push_back(101.0f / 256.0f);  // bin 100
  for (int i = 0; i < 10; ++i) v.push_back(201.0f / 256.0f);  // bin 200
  const auto got = otsu_threshold(map_of(30, 1, v));
  const auto want = oracle::otsu(v);
  REQUIRE(got.has_value());
  CHECK(got->bin == want->bin);
  CHECK(got->bin == 0);
}

TEST_CASE("threshold map is strict") {
  const auto m = map_of(2, 1, {0.1f, 0.9f});
  CHECK(threshold_map(m, 0.5).mask == std::vector<std::uint8_t>{0, 1});
  CHECK(threshold_map(m, 1.0).count() == 0);
  const auto edge = map_of(1, 1, {0.5f});
  CHECK(threshold_map(edge, 0.5).count() == 0);
  CHECK(threshold_map(m, 0.5).threshold_used == doctest::Approx(0.5));
}

TEST_CASE("extreme points") {
  CHECK_FALSE(extreme_points(mask_with(10, 10, {})).has_value());
  CHECK(*extreme_points(mask_with(10, 10, {{5, 7}})) == BoundingBox{7, 5, 8, 6});
  CHECK(*extreme_points(mask_with(12, 12, {{2, 5}, {7, 1}, {4, 9}})) == BoundingBox{1, 2, 10, 8});
}

TEST_CASE("extreme-point box contains every segmented pixel and touches all four sides") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto map = oracle::random_difference_map(rng, 20, 15);
    const auto seg = threshold_map(map, rng.uniform(0.0, 0.9));
    const auto box = extreme_points(seg);
    if (seg.count() == 0) {
      CHECK_FALSE(box.has_value());
      continue;
    }
    REQUIRE(box.has_value());
    bool left = false, right = false, top = false, bottom = false;
    for (int y = 0; y < seg.height; ++y) {
      for (int x = 0; x < seg.width; ++x) {
        if (!seg.at(x, y)) continue;
        CHECK((x >= box->x_min && x < box->x_max && y >= box->y_min && y < box->y_max));
        left |= x == box->x_min;
        right |= x == box->x_max - 1;
        top |= y == box->y_min;
        bottom |= y == box->y_max - 1;
      }
    }
    CHECK((left && right && top && bottom));
  }
}

TEST_CASE("min area filter") {
  const auto three = mask_with(8, 8, {{0, 0}, {1, 1}, {2, 2}});
  CHECK(min_area_filter(three, 0).mask == three.mask);
  CHECK(min_area_filter(three, 5).count() == 0);
  std::vector<std::pair<int, int>> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({i / 4, i % 4});
  const auto big = mask_with(8, 8, ten);
  CHECK(min_area_filter(big, 5).mask == big.mask);
}

TEST_CASE("crop: sizes, identity and bounds") {
  Rng rng(4);
  const Image p = oracle::random_image(rng, 100, 100);
  CHECK(crop(p, {0, 0, 100, 100}).image == p);
  const auto one = crop(p, {0, 0, 1, 1});
  CHECK(one.image.width() == 1);
  CHECK(one.image.at(0, 0, 2) == p.at(0, 0, 2));
  const auto c = crop(p, {10, 20, 60, 90});
  CHECK(c.image.width() == 50);
  CHECK(c.image.height() == 70);
  CHECK(c.image.at(3, 4, 1) == p.at(13, 24, 1));
  CHECK_THROWS_AS(crop(p, {90, 0, 101, 10}), BoundsError);
  CHECK_THROWS_AS(crop(p, {5, 5, 5, 9}), BoundsError);
}

TEST_CASE("crop then paste at the same box is lossless") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Image p = oracle::random_image(rng, 30, 20);
    const int x0 = static_cast<int>(rng.uniform_int(0, 28));
    const int y0 = static_cast<int>(rng.uniform_int(0, 18));
    const BoundingBox box{x0, y0, static_cast<int>(rng.uniform_int(x0 + 1, 30)),
                          static_cast<int>(rng.uniform_int(y0 + 1, 20))};
    const auto c = crop(p, box);
    Image blank(30, 20, 3);
    paste(blank, c);
    Image back = p;
    paste(back, c);
    CHECK(back == p);
    CHECK(crop(blank, box).image == c.image);
  }
}

TEST_CASE("stitch segmentation") {
  const PatchSpec spec{16, 16};
  const auto cell = [&](int v) {
    return SegmentationMap{16, 16, std::vector<std::uint8_t>(256, static_cast<std::uint8_t>(v)),
                           0.5};
  };
  const auto one = stitch_segmentation({{cell(1)}}, spec);
  CHECK(one.mask == cell(1).mask);

  const auto wide = stitch_segmentation({{cell(0), cell(1)}}, spec);
  CHECK(wide.width == 32);
  CHECK(wide.height == 16);
  CHECK(wide.at(15, 3) == 0);
  CHECK(wide.at(16, 3) == 1);
  CHECK_FALSE(wide.threshold_used.has_value());

  std::vector<std::vector<SegmentationMap>> grid(4, std::vector<SegmentationMap>(8, cell(0)));
  const PatchSpec full_size{448, 448};
  for (auto& row : grid) {
    for (auto& m : row) {
      m = SegmentationMap{448, 448, std::vector<std::uint8_t>(448 * 448, 0), 0.1};
    }
  }
  const auto full = stitch_segmentation(grid, full_size);
  CHECK(full.width == 3584);
  CHECK(full.height == 1792);

  CHECK_THROWS_AS(stitch_segmentation({{cell(0), cell(0)}, {cell(0)}}, spec), CompletenessError);
  CHECK_THROWS_AS(stitch_segmentation({{cell(0), SegmentationMap{}}}, spec), CompletenessError);
}
