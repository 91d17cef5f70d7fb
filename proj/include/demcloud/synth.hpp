#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "demcloud/grid.hpp"
#include "demcloud/mosaic.hpp"

namespace demcloud {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::uint32_t width = 256;
  std::uint32_t height = 256;
  int strip_count = 5;
  float nodata = DemGrid::kDefaultNodata;

  // Diamond-square terrain. Each displacement pass (corners, then every
  // diamond and square step) is one octave; pass k displaces by a uniform
  // value of peak-to-peak width amplitude * persistence^k. Passes at or
  // beyond `octaves` only interpolate (0 = no limit).
  double base_elevation = 100.0;
  double terrain_amplitude = 150.0;
  double persistence = 0.6;
  int octaves = 0;

  int clouds_min = 1;
  int clouds_max = 4;
  double cloud_radius_min = 5.0;
  double cloud_radius_max = 18.0;
  double cloud_offset_min = 500.0;
  double cloud_offset_max = 3000.0;

  // Broad, flat, low-lying haze sheets.
  double haze_probability = 0.0;
  double haze_offset_min = 460.0;
  double haze_offset_max = 600.0;

  // Strip footprint side as a fraction of the frame side.
  double footprint_min = 0.6;
  double footprint_max = 1.0;

  void validate() const;
};

DemGrid gen_terrain(const SynthConfig& cfg);

// Sum of per-octave displacement widths actually applied for this frame size;
// max - min of gen_terrain never exceeds it.
double terrain_relief_bound(const SynthConfig& cfg);

struct CloudInjection {
  DemGrid grid;
  MaskGrid truth;  // exactly the pixels that differ from the terrain
};

CloudInjection inject_clouds(const DemGrid& terrain, const SynthConfig& cfg);

struct SynthDataset {
  DemGrid terrain;
  StripSequence strips;
  // Full-frame cloud masks that ignore the strip footprint, like hand-drawn
  // masks that spill past the strip edge.
  std::vector<MaskGrid> overdrawn;
  // Cloud pixels inside the footprint: clip_mask(overdrawn, motion).
  std::vector<MaskGrid> truth;
};

SynthDataset gen_dataset(const SynthConfig& cfg);

// Writes terrain.cfdr, strip_<t>.cfdr, overdrawn_<t>.pgm, truth_<t>.pgm,
// strips.txt (manifest with the overdrawn mask column) and synth.json into
// `dir`. Returns the manifest path.
std::filesystem::path write_dataset(const SynthDataset& data, const SynthConfig& cfg,
                                    const std::filesystem::path& dir,
                                    const std::string& manifest_name = "strips.txt");

}  // namespace demcloud
