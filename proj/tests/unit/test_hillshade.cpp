#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "demcloud/hillshade.hpp"

using namespace demcloud;

namespace {

// Shade of the plane z = a*x + b*y (x east, y down the rows = south) as the
// dot product of its unit normal with the unit light vector.
int plane_shade(double a, double b, double az_deg, double alt_deg) {
  const double rad = std::numbers::pi / 180.0;
  // East/north/up components; rows grow southward, so dz/dnorth = -b.
  const double nx = -a, ny = b, nz = 1.0;
  const double nn = std::sqrt(nx * nx + ny * ny + nz * nz);
  const double lx = std::sin(az_deg * rad) * std::cos(alt_deg * rad);
  const double ly = std::cos(az_deg * rad) * std::cos(alt_deg * rad);
  const double lz = std::sin(alt_deg * rad);
  const double s = std::max(0.0, (nx * lx + ny * ly + nz * lz) / nn);
  return static_cast<int>(std::lround(1 + 253 * s));
}

DemGrid plane(std::uint32_t w, std::uint32_t h, double a, double b) {
  DemGrid g(w, h);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) g(x, y) = static_cast<float>(a * x + b * y);
  return g;
}

}  // namespace

TEST(Hillshade, FlatGridIsUniformInteriorAndZeroBorder) {
  const auto img = hillshade(plane(6, 5, 0, 0));
  for (std::uint32_t y = 0; y < 5; ++y)
    for (std::uint32_t x = 0; x < 6; ++x) {
      const bool border = x == 0 || y == 0 || x == 5 || y == 4;
      EXPECT_EQ(img(x, y), border ? 0 : 180) << x << "," << y;
    }
}

TEST(Hillshade, TiltedPlanesMatchNormalDotLight) {
  const double slopes[][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {0.5, -0.3}, {2, 2}, {-0.7, 1.2}};
  for (const auto& s : slopes) {
    for (double az : {315.0, 90.0, 200.0}) {
      HillshadeParams p;
      p.azimuth_deg = az;
      const auto img = hillshade(plane(5, 5, s[0], s[1]), p);
      EXPECT_NEAR(img(2, 2), plane_shade(s[0], s[1], az, 45.0), 1)
          << s[0] << "," << s[1] << " az " << az;
    }
  }
}

TEST(Hillshade, NodataNeighborhoodIsZero) {
  auto g = plane(7, 7, 0.2, 0.1);
  g(3, 3) = g.nodata();
  const auto img = hillshade(g);
  for (std::uint32_t y = 2; y <= 4; ++y)
    for (std::uint32_t x = 2; x <= 4; ++x) EXPECT_EQ(img(x, y), 0);
  EXPECT_GT(img(1, 1), 0);
  EXPECT_GT(img(5, 5), 0);
}

TEST(Hillshade, RejectsTinyGrids) { EXPECT_THROW(hillshade(DemGrid(2, 9)), DataError); }
