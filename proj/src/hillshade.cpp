#include "demcloud/hillshade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace demcloud {

GrayImage hillshade(const DemGrid& grid, const HillshadeParams& params) {
  const auto w = grid.width();
  const auto h = grid.height();
  if (w < 3 || h < 3) {
    throw DataError("hillshade needs at least a 3x3 grid, got " + std::to_string(w) + "x" +
                    std::to_string(h));
  }
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double zenith = (90.0 - params.altitude_deg) * kDeg;
  // Compass azimuth (clockwise from north) to math angle (counter-clockwise from east).
  double azimuth_math = 360.0 - params.azimuth_deg + 90.0;
  if (azimuth_math >= 360.0) azimuth_math -= 360.0;
  azimuth_math *= kDeg;
  const double cos_zen = std::cos(zenith);
  const double sin_zen = std::sin(zenith);

  GrayImage out(w, h, 0);
  for (std::uint32_t y = 1; y + 1 < h; ++y) {
    for (std::uint32_t x = 1; x + 1 < w; ++x) {
      double z[9];
      bool touches_nodata = false;
      for (int dy = -1; dy <= 1 && !touches_nodata; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const float v = grid(x + dx, y + dy);
          if (grid.is_nodata(v)) {
            touches_nodata = true;
            break;
          }
          z[(dy + 1) * 3 + (dx + 1)] = v;
        }
      }
      if (touches_nodata) continue;

      // a b c / d e f / g h i
      const double dzdx = ((z[2] + 2 * z[5] + z[8]) - (z[0] + 2 * z[3] + z[6])) /
                          (8.0 * params.cell_size);
      const double dzdy = ((z[6] + 2 * z[7] + z[8]) - (z[0] + 2 * z[1] + z[2])) /
                          (8.0 * params.cell_size);
      const double slope =
          std::atan(params.z_factor * std::sqrt(dzdx * dzdx + dzdy * dzdy));
      double aspect = 0.0;
      if (dzdx != 0.0) {
        aspect = std::atan2(dzdy, -dzdx);
        if (aspect < 0) aspect += 2 * std::numbers::pi;
      } else if (dzdy > 0) {
        aspect = std::numbers::pi / 2;
      } else if (dzdy < 0) {
        aspect = 2 * std::numbers::pi - std::numbers::pi / 2;
      }
      double shade = cos_zen * std::cos(slope) +
                     sin_zen * std::sin(slope) * std::cos(azimuth_math - aspect);
      shade = std::clamp(shade, 0.0, 1.0);
      out(x, y) = static_cast<std::uint8_t>(std::lround(1.0 + 253.0 * shade));
    }
  }
  return out;
}

}  // namespace demcloud
