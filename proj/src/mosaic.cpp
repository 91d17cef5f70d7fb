#include "demcloud/mosaic.hpp"

#include <fstream>
#include <sstream>

#include "demcloud/raster_io.hpp"

namespace demcloud {

StripSequence::StripSequence(std::vector<Strip> strips) {
  strips_.reserve(strips.size());
  for (auto& s : strips) push_back(std::move(s));
}

void StripSequence::push_back(Strip strip) {
  if (!strips_.empty()) {
    const auto& first = strips_.front().grid;
    if (strip.timestep <= strips_.back().timestep) {
      throw DataError("strip timesteps must be strictly increasing (" +
                      std::to_string(strips_.back().timestep) + " then " +
                      std::to_string(strip.timestep) + ")");
    }
    require_same_shape(first, strip.grid, "strip sequence");
    if (first.nodata() != strip.grid.nodata()) {
      throw DataError("strip sequence: nodata sentinel differs at timestep " +
                      std::to_string(strip.timestep));
    }
  }
  strips_.push_back(std::move(strip));
}

std::vector<DemGrid> accumulate(const StripSequence& seq) {
  if (seq.empty()) throw DataError("accumulate: empty strip sequence");
  std::vector<DemGrid> mosaics;
  mosaics.reserve(seq.size());
  const auto& first = seq[0].grid;
  DemGrid current(first.width(), first.height(), first.nodata());
  for (const auto& strip : seq.strips()) {
    const auto& g = strip.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.is_nodata(g[i])) current[i] = g[i];
    }
    mosaics.push_back(current);
  }
  return mosaics;
}

MaskGrid motion_mask(const DemGrid& prev_mosaic, const DemGrid& strip) {
  require_same_shape(prev_mosaic, strip, "motion_mask");
  MaskGrid out(strip.width(), strip.height(), 0);
  for (std::size_t i = 0; i < strip.size(); ++i) {
    out[i] = strip.is_nodata(strip[i]) ? 0 : 1;
  }
  return out;
}

MaskGrid clip_mask(const MaskGrid& overdrawn, const MaskGrid& motion) {
  require_same_shape(overdrawn, motion, "clip_mask");
  MaskGrid out(motion.width(), motion.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(overdrawn[i] * motion[i]);
  }
  return out;
}

DemGrid apply_mask(const DemGrid& strip, const MaskGrid& cloud) {
  require_same_shape(strip, cloud, "apply_mask");
  DemGrid out = strip;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (cloud[i]) out[i] = strip.nodata();
  }
  return out;
}

std::vector<ManifestEntry> read_strip_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open strip manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string strip, mask;
    if (!(ss >> e.timestep >> strip)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected `<timestep> <path>`");
    }
    e.strip = base / strip;
    if (ss >> mask) e.mask = base / mask;
    std::string extra;
    if (ss >> extra) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": trailing field `" +
                      extra + "`");
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw DataError("strip manifest " + path.string() + " is empty");
  return entries;
}

void write_strip_manifest(const std::filesystem::path& path,
                          const std::vector<ManifestEntry>& entries) {
  namespace fs = std::filesystem;
  const auto base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) { return fs::relative(fs::absolute(p), base).generic_string(); };
  std::ostringstream out;
  for (const auto& e : entries) {
    out << e.timestep << ' ' << rel(e.strip);
    if (e.mask) out << ' ' << rel(*e.mask);
    out << '\n';
  }
  write_text_file(path, out.str());
}

StripSequence load_strips(const std::vector<ManifestEntry>& entries) {
  StripSequence seq;
  for (const auto& e : entries) seq.push_back(Strip{e.timestep, read_dem(e.strip)});
  return seq;
}

}  // namespace demcloud
