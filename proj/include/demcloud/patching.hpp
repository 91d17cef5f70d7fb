#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "demcloud/grid.hpp"

namespace demcloud {

struct PatchSpec {
  std::uint32_t size = 224;
  std::uint32_t overlap = 50;

  std::uint32_t stride() const { return size - overlap; }
  void validate() const;
};

// Origins 0, s, 2s, ... with the last one clamped to dim - size so the final
// patch sits flush with the border. Requires dim >= size.
std::vector<std::uint32_t> patch_origins(std::uint32_t dim, const PatchSpec& spec);

template <typename G>
struct Patch {
  std::uint32_t ox = 0;
  std::uint32_t oy = 0;
  G grid;
};

// Patches are stored row-major over the origin lattice (oy outer, ox inner).
template <typename G>
struct PatchSet {
  std::uint32_t parent_width = 0;
  std::uint32_t parent_height = 0;
  PatchSpec spec;
  std::vector<Patch<G>> patches;
};

template <typename G>
PatchSet<G> split(const G& grid, const PatchSpec& spec);

// Each output pixel comes from the covering patch whose center is nearest;
// ties go to the smaller origin in row-major order.
template <typename G>
G stitch(const PatchSet<G>& set);

// For pixel coordinate p along one axis, the index into `origins` of the
// patch stitch() takes it from.
std::vector<std::uint32_t> stitch_source_index(std::uint32_t dim, const PatchSpec& spec);

struct PatchPair {
  std::uint32_t ox = 0;
  std::uint32_t oy = 0;
  DemGrid dem;
  MaskGrid mask;
};

// Indices of mask patches with at least one cloud pixel.
std::vector<std::size_t> cloudy_indices(const PatchSet<MaskGrid>& masks);

// Pairs whose mask patch contains at least one cloud pixel.
std::vector<PatchPair> filter_cloudy(const PatchSet<DemGrid>& dems,
                                     const PatchSet<MaskGrid>& masks);

template <typename A, typename B>
void require_aligned(const PatchSet<A>& a, const PatchSet<B>& b, const char* what) {
  bool ok = a.parent_width == b.parent_width && a.parent_height == b.parent_height &&
            a.patches.size() == b.patches.size();
  for (std::size_t i = 0; ok && i < a.patches.size(); ++i) {
    ok = a.patches[i].ox == b.patches[i].ox && a.patches[i].oy == b.patches[i].oy;
  }
  if (!ok) throw DataError(std::string(what) + ": patch sets are not aligned");
}

std::string patch_file_name(std::uint32_t ox, std::uint32_t oy, const std::string& ext);

// Directory of `patch_<ox>_<oy>.<ext>` files plus manifest.json.
template <typename G>
void save_patch_set(const PatchSet<G>& set, const std::filesystem::path& dir);
template <typename G>
PatchSet<G> load_patch_set(const std::filesystem::path& dir);

extern template PatchSet<DemGrid> split(const DemGrid&, const PatchSpec&);
extern template PatchSet<MaskGrid> split(const MaskGrid&, const PatchSpec&);
extern template PatchSet<ConfidenceGrid> split(const ConfidenceGrid&, const PatchSpec&);
extern template DemGrid stitch(const PatchSet<DemGrid>&);
extern template MaskGrid stitch(const PatchSet<MaskGrid>&);
extern template ConfidenceGrid stitch(const PatchSet<ConfidenceGrid>&);
extern template void save_patch_set(const PatchSet<DemGrid>&, const std::filesystem::path&);
extern template void save_patch_set(const PatchSet<MaskGrid>&, const std::filesystem::path&);
extern template void save_patch_set(const PatchSet<ConfidenceGrid>&,
                                    const std::filesystem::path&);
extern template PatchSet<DemGrid> load_patch_set(const std::filesystem::path&);
extern template PatchSet<MaskGrid> load_patch_set(const std::filesystem::path&);
extern template PatchSet<ConfidenceGrid> load_patch_set(const std::filesystem::path&);

}  // namespace demcloud
