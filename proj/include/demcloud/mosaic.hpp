#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "demcloud/grid.hpp"

namespace demcloud {

struct Strip {
  std::int64_t timestep = 0;
  DemGrid grid;
};

// Time-ordered strips already aligned into a common region frame; pixels
// outside a strip's footprint hold nodata.
class StripSequence {
 public:
  StripSequence() = default;
  explicit StripSequence(std::vector<Strip> strips);

  const std::vector<Strip>& strips() const { return strips_; }
  std::size_t size() const { return strips_.size(); }
  bool empty() const { return strips_.empty(); }
  const Strip& operator[](std::size_t i) const { return strips_[i]; }

  // Appends a strip, enforcing increasing timesteps and uniform frames.
  void push_back(Strip strip);

 private:
  std::vector<Strip> strips_;
};

// mosaic[t](p) is the latest strip value at p up to and including t that is
// not nodata; nodata if no strip has observed p yet.
std::vector<DemGrid> accumulate(const StripSequence& seq);

// 1 where the strip carries data at this timestep.
MaskGrid motion_mask(const DemGrid& prev_mosaic, const DemGrid& strip);

// Pixelwise product of an overdrawn mask with a motion mask.
MaskGrid clip_mask(const MaskGrid& overdrawn, const MaskGrid& motion);

// Cloud pixels become nodata; everything else is copied.
DemGrid apply_mask(const DemGrid& strip, const MaskGrid& cloud);

// Strip manifest: one line per strip, `<timestep> <path-to-CFDR> [<mask.pgm>]`.
// The optional third column names the overdrawn cloud mask for that strip.
// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::int64_t timestep = 0;
  std::filesystem::path strip;
  std::optional<std::filesystem::path> mask;
};

std::vector<ManifestEntry> read_strip_manifest(const std::filesystem::path& path);
void write_strip_manifest(const std::filesystem::path& path,
                          const std::vector<ManifestEntry>& entries);
StripSequence load_strips(const std::vector<ManifestEntry>& entries);

}  // namespace demcloud
