#pragma once

// Central finite differences against an analytic gradient.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

// f evaluates a scalar from the current contents of `x`; `analytic` is its
// claimed gradient. Relative error |a - n| / max(|a|, |n|, floor).
inline GradCheck gradcheck(std::span<double> x, std::span<const double> analytic,
                           const std::function<double()>& f, double h = 1e-5,
                           double floor = 1e-6) {
  GradCheck r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    r.max_rel = std::max(r.max_rel, std::abs(analytic[i] - numeric) / denom);
    ++r.checked;
  }
  return r;
}

}  // namespace oracle
