#include "demcloud/patching.hpp"

#include <cstdlib>
#include <fstream>

#include "demcloud/raster_io.hpp"
#include "json.hpp"

namespace demcloud {

namespace {

DemGrid make_like(const DemGrid& ref, std::uint32_t w, std::uint32_t h) {
  return DemGrid(w, h, ref.nodata());
}
MaskGrid make_like(const MaskGrid&, std::uint32_t w, std::uint32_t h) {
  return MaskGrid(w, h, 0);
}
ConfidenceGrid make_like(const ConfidenceGrid&, std::uint32_t w, std::uint32_t h) {
  return ConfidenceGrid(w, h, 0.0f);
}

template <typename G>
G crop(const G& grid, std::uint32_t ox, std::uint32_t oy, std::uint32_t size) {
  G out = make_like(grid, size, size);
  for (std::uint32_t y = 0; y < size; ++y) {
    for (std::uint32_t x = 0; x < size; ++x) out(x, y) = grid(ox + x, oy + y);
  }
  return out;
}

template <typename G> const char* kind_name();
template <> const char* kind_name<DemGrid>() { return "dem"; }
template <> const char* kind_name<MaskGrid>() { return "mask"; }
template <> const char* kind_name<ConfidenceGrid>() { return "confidence"; }

template <typename G> const char* extension();
template <> const char* extension<DemGrid>() { return "cfdr"; }
template <> const char* extension<MaskGrid>() { return "pgm"; }
template <> const char* extension<ConfidenceGrid>() { return "cfdr"; }

void write_grid(const DemGrid& g, const std::filesystem::path& p) { write_dem(g, p); }
void write_grid(const MaskGrid& g, const std::filesystem::path& p) { write_mask(g, p); }
void write_grid(const ConfidenceGrid& g, const std::filesystem::path& p) {
  write_confidence(g, p);
}

template <typename G> G read_grid(const std::filesystem::path& p);
template <> DemGrid read_grid<DemGrid>(const std::filesystem::path& p) { return read_dem(p); }
template <> MaskGrid read_grid<MaskGrid>(const std::filesystem::path& p) { return read_mask(p); }
template <> ConfidenceGrid read_grid<ConfidenceGrid>(const std::filesystem::path& p) {
  return read_confidence(p);
}

}  // namespace

void PatchSpec::validate() const {
  if (size == 0 || overlap == 0 || overlap >= size) {
    throw ConfigError("patch spec requires 0 < overlap < size (size=" + std::to_string(size) +
                      ", overlap=" + std::to_string(overlap) + ")");
  }
}

std::vector<std::uint32_t> patch_origins(std::uint32_t dim, const PatchSpec& spec) {
  spec.validate();
  if (dim < spec.size) {
    throw DataError("image side " + std::to_string(dim) + " is smaller than patch size " +
                    std::to_string(spec.size));
  }
  std::vector<std::uint32_t> origins;
  const std::uint32_t last = dim - spec.size;
  for (std::uint64_t o = 0;; o += spec.stride()) {
    if (o >= last) {
      origins.push_back(last);
      break;
    }
    origins.push_back(static_cast<std::uint32_t>(o));
  }
  return origins;
}

std::vector<std::uint32_t> stitch_source_index(std::uint32_t dim, const PatchSpec& spec) {
  const auto origins = patch_origins(dim, spec);
  std::vector<std::uint32_t> source(dim);
  // Distances in half-pixel units: pixel center 2p+1, patch center 2o+size.
  for (std::uint32_t p = 0; p < dim; ++p) {
    std::int64_t best_dist = -1;
    std::uint32_t best = 0;
    for (std::uint32_t k = 0; k < origins.size(); ++k) {
      const std::uint32_t o = origins[k];
      if (p < o || p >= o + spec.size) continue;
      const std::int64_t d = std::llabs(static_cast<std::int64_t>(2 * p + 1) -
                                        static_cast<std::int64_t>(2 * o + spec.size));
      if (best_dist < 0 || d < best_dist) {
        best_dist = d;
        best = k;
      }
    }
    source[p] = best;
  }
  return source;
}

template <typename G>
PatchSet<G> split(const G& grid, const PatchSpec& spec) {
  PatchSet<G> set;
  set.parent_width = grid.width();
  set.parent_height = grid.height();
  set.spec = spec;
  const auto xs = patch_origins(grid.width(), spec);
  const auto ys = patch_origins(grid.height(), spec);
  set.patches.reserve(xs.size() * ys.size());
  for (auto oy : ys) {
    for (auto ox : xs) set.patches.push_back({ox, oy, crop(grid, ox, oy, spec.size)});
  }
  return set;
}

template <typename G>
G stitch(const PatchSet<G>& set) {
  const auto xs = patch_origins(set.parent_width, set.spec);
  const auto ys = patch_origins(set.parent_height, set.spec);
  if (set.patches.size() != xs.size() * ys.size()) {
    throw DataError("stitch: expected " + std::to_string(xs.size() * ys.size()) +
                    " patches, found " + std::to_string(set.patches.size()));
  }
  for (std::size_t j = 0; j < ys.size(); ++j) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto& p = set.patches[j * xs.size() + i];
      if (p.ox != xs[i] || p.oy != ys[j]) {
        throw DataError("stitch: patch origin (" + std::to_string(p.ox) + "," +
                        std::to_string(p.oy) + ") inconsistent with the patch spec");
      }
      if (p.grid.width() != set.spec.size || p.grid.height() != set.spec.size) {
        throw DataError("stitch: patch has wrong dimensions");
      }
    }
  }
  const auto src_x = stitch_source_index(set.parent_width, set.spec);
  const auto src_y = stitch_source_index(set.parent_height, set.spec);
  G out = make_like(set.patches.front().grid, set.parent_width, set.parent_height);
  for (std::uint32_t y = 0; y < set.parent_height; ++y) {
    for (std::uint32_t x = 0; x < set.parent_width; ++x) {
      const auto& p = set.patches[src_y[y] * xs.size() + src_x[x]];
      out(x, y) = p.grid(x - p.ox, y - p.oy);
    }
  }
  return out;
}

std::vector<std::size_t> cloudy_indices(const PatchSet<MaskGrid>& masks) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < masks.patches.size(); ++i) {
    if (masks.patches[i].grid.popcount() > 0) out.push_back(i);
  }
  return out;
}

std::vector<PatchPair> filter_cloudy(const PatchSet<DemGrid>& dems,
                                     const PatchSet<MaskGrid>& masks) {
  require_aligned(dems, masks, "filter_cloudy");
  std::vector<PatchPair> out;
  for (auto i : cloudy_indices(masks)) {
    const auto& d = dems.patches[i];
    out.push_back({d.ox, d.oy, d.grid, masks.patches[i].grid});
  }
  return out;
}

std::string patch_file_name(std::uint32_t ox, std::uint32_t oy, const std::string& ext) {
  return "patch_" + std::to_string(ox) + "_" + std::to_string(oy) + "." + ext;
}

template <typename G>
void save_patch_set(const PatchSet<G>& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["kind"] = kind_name<G>();
  manifest["parent_width"] = set.parent_width;
  manifest["parent_height"] = set.parent_height;
  manifest["patch"] = set.spec.size;
  manifest["overlap"] = set.spec.overlap;
  auto origins = nlohmann::ordered_json::array();
  for (const auto& p : set.patches) {
    write_grid(p.grid, dir / patch_file_name(p.ox, p.oy, extension<G>()));
    origins.push_back({p.ox, p.oy});
  }
  manifest["origins"] = std::move(origins);
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

template <typename G>
PatchSet<G> load_patch_set(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("missing patch manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
    if (manifest.at("kind").get<std::string>() != kind_name<G>()) {
      throw DataError(dir.string() + ": patch set kind is " +
                      manifest.at("kind").get<std::string>() + ", expected " +
                      kind_name<G>());
    }
    PatchSet<G> set;
    set.parent_width = manifest.at("parent_width").get<std::uint32_t>();
    set.parent_height = manifest.at("parent_height").get<std::uint32_t>();
    set.spec.size = manifest.at("patch").get<std::uint32_t>();
    set.spec.overlap = manifest.at("overlap").get<std::uint32_t>();
    for (const auto& o : manifest.at("origins")) {
      const auto ox = o.at(0).get<std::uint32_t>();
      const auto oy = o.at(1).get<std::uint32_t>();
      set.patches.push_back(
          {ox, oy, read_grid<G>(dir / patch_file_name(ox, oy, extension<G>()))});
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir.string() + ": malformed patch manifest: " + e.what());
  }
}

template PatchSet<DemGrid> split(const DemGrid&, const PatchSpec&);
template PatchSet<MaskGrid> split(const MaskGrid&, const PatchSpec&);
template PatchSet<ConfidenceGrid> split(const ConfidenceGrid&, const PatchSpec&);
template DemGrid stitch(const PatchSet<DemGrid>&);
template MaskGrid stitch(const PatchSet<MaskGrid>&);
template ConfidenceGrid stitch(const PatchSet<ConfidenceGrid>&);
template void save_patch_set(const PatchSet<DemGrid>&, const std::filesystem::path&);
template void save_patch_set(const PatchSet<MaskGrid>&, const std::filesystem::path&);
template void save_patch_set(const PatchSet<ConfidenceGrid>&, const std::filesystem::path&);
template PatchSet<DemGrid> load_patch_set(const std::filesystem::path&);
template PatchSet<MaskGrid> load_patch_set(const std::filesystem::path&);
template PatchSet<ConfidenceGrid> load_patch_set(const std::filesystem::path&);

}  // namespace demcloud
