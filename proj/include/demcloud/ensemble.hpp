#pragma once

#include <span>

#include "demcloud/grid.hpp"

namespace demcloud {

struct EnsembleConfig {
  double threshold = 0.1;
  int kernel_width = 5;
  int kernel_height = 5;

  void validate() const;
};

// Pixelwise product of the member confidences; a zero from any member vetoes.
// Independent of member order, bit for bit.
ConfidenceGrid combine(std::span<const ConfidenceGrid> members);
ConfidenceGrid combine(const ConfidenceGrid& a, const ConfidenceGrid& b, const ConfidenceGrid& c);

// 1 where confidence >= t.
MaskGrid threshold(const ConfidenceGrid& c, double t);

// Binary dilation by a centered kernel_width x kernel_height box, clipped at
// the frame border.
MaskGrid dilate(const MaskGrid& m, int kernel_width, int kernel_height);

// combine -> threshold -> dilate.
MaskGrid ensemble_mask(std::span<const ConfidenceGrid> members, const EnsembleConfig& cfg);

}  // namespace demcloud
