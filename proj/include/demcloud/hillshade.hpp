#pragma once

#include "demcloud/grid.hpp"

namespace demcloud {

struct HillshadeParams {
  double azimuth_deg = 315.0;
  double altitude_deg = 45.0;
  double z_factor = 1.0;
  double cell_size = 1.0;
};

// Horn's 3x3 gradient shading. Interior shades lie in [1,254]; pixels on the
// frame border or whose 3x3 neighborhood touches nodata are written as 0.
GrayImage hillshade(const DemGrid& grid, const HillshadeParams& params = {});

}  // namespace demcloud
