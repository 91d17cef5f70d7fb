// Runs each acceptance criterion and prints one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "../oracles/glcm_oracle.hpp"
#include "../oracles/gradcheck.hpp"
#include "../oracles/metrics_oracle.hpp"
#include "demcloud/config.hpp"
#include "demcloud/ensemble.hpp"
#include "demcloud/metrics.hpp"
#include "demcloud/patching.hpp"
#include "demcloud/pipeline.hpp"
#include "demcloud/raster_io.hpp"
#include "demcloud/synth.hpp"
#include "demcloud/tensor_ops.hpp"
#include "demcloud/texture.hpp"
#include "demcloud/train.hpp"
#include "demcloud/unet.hpp"
#include "fixtures.hpp"

using namespace demcloud;
using namespace demcloud::nn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, const char* f = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome glcm_equivalence() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> elev(0.0, 400.0);
  const int windows[] = {3, 5, 15};
  double worst = 0.0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 25; ++trial) {
    DemGrid g(20, 20);
    for (auto& v : g.values()) v = static_cast<float>(elev(rng));
    // A few patches carry nodata holes.
    if (trial % 4 == 1) {
      for (int k = 0; k < 30; ++k) g[rng() % g.size()] = g.nodata();
    }
    const int window = windows[trial % 3];
    const GlcmParams p{32, window, 0.0, 400.0};
    const auto got = texture_features(g, p);
    const auto want = oracle::texture(g, 32, window, 0.0, 400.0);
    for (int c = 0; c < kTextureChannels; ++c)
      for (std::uint32_t y = 0; y < 20; ++y)
        for (std::uint32_t x = 0; x < 20; ++x) {
          const double a = got.at(c, x, y);
          const double b = want[(static_cast<std::size_t>(c) * 20 + y) * 20 + x];
          worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
          ++compared;
        }
  }
  return {worst <= 1e-10,
          num(static_cast<double>(compared), "%.0f") + " values, max scaled diff " + num(worst)};
}

// ---------------------------------------------------------------- 2

using DT = Tensor4<double>;

DT random_tensor(std::mt19937_64& rng, int n, int c, int h, int w, double lo = -1,
                 double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  DT t(n, c, h, w);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

double dot(const DT& a, const DT& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct LayerReport {
  double worst = 0;
  int shapes = 0;
  void add(const oracle::GradCheck& g) { worst = std::max(worst, g.max_rel); }
};

LayerReport check_conv(std::mt19937_64& rng) {
  LayerReport r;
  for (int s = 0; s < 12; ++s) {
    const int n = 1 + s % 2, cin = 1 + s % 3, cout = 1 + (s / 2) % 3;
    const int k = (s % 4 == 3) ? 1 : 3, stride = 1 + (s % 5 == 4), pad = (s % 3 == 0) ? 0 : k / 2;
    const int h = 4 + s % 4, w = 5 + (s * 7) % 3;
    auto x = random_tensor(rng, n, cin, h, w);
    auto wt = random_tensor(rng, cout, cin, k, k);
    std::vector<double> b(cout);
    for (auto& v : b) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const auto y0 = conv2d_forward<double>(x, wt, b, stride, pad);
    auto proj = random_tensor(rng, y0.n(), y0.c(), y0.h(), y0.w());
    auto f = [&] { return dot(conv2d_forward<double>(x, wt, b, stride, pad), proj); };
    const auto g = conv2d_backward<double>(x, wt, proj, stride, pad);
    r.add(oracle::gradcheck(x.values(), g.dx.values(), f));
    r.add(oracle::gradcheck(wt.values(), g.dw.values(), f));
    r.add(oracle::gradcheck(b, g.db, f));
    ++r.shapes;
  }
  return r;
}

LayerReport check_relu(std::mt19937_64& rng) {
  LayerReport r;
  for (int s = 0; s < 12; ++s) {
    auto x = random_tensor(rng, 1 + s % 2, 1 + s % 4, 2 + s % 5, 3 + s % 3);
    // Keep inputs off the kink, further than the finite-difference step.
    for (auto& v : x.values()) {
      if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 : 1e-3;
    }
    const auto y0 = relu_forward(x);
    auto proj = random_tensor(rng, x.n(), x.c(), x.h(), x.w());
    auto f = [&] { return dot(relu_forward(x), proj); };
    r.add(oracle::gradcheck(x.values(), relu_backward(y0, proj).values(), f));
    ++r.shapes;
  }
  return r;
}

LayerReport check_maxpool(std::mt19937_64& rng) {
  LayerReport r;
  for (int s = 0; s < 12; ++s) {
    const int n = 1 + s % 2, c = 1 + s % 3, h = 2 * (1 + s % 4), w = 2 * (1 + (s + 1) % 3);
    DT x(n, c, h, w);
    // Distinct values spaced well beyond the step so no argmax flips.
    std::vector<double> vals(x.size());
    std::iota(vals.begin(), vals.end(), 0.0);
    std::shuffle(vals.begin(), vals.end(), rng);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * vals[i];
    const auto pool = maxpool_forward(x);
    auto proj = random_tensor(rng, pool.y.n(), pool.y.c(), pool.y.h(), pool.y.w());
    auto f = [&] { return dot(maxpool_forward(x).y, proj); };
    r.add(oracle::gradcheck(x.values(), maxpool_backward(proj, pool.argmax, x.dims()).values(), f));
    ++r.shapes;
  }
  return r;
}

LayerReport check_upconv(std::mt19937_64& rng) {
  LayerReport r;
  for (int s = 0; s < 12; ++s) {
    const int n = 1 + s % 2, cin = 1 + s % 3, cout = 1 + (s / 3) % 3, h = 1 + s % 4,
              w = 1 + (s + 2) % 4;
    auto x = random_tensor(rng, n, cin, h, w);
    auto wt = random_tensor(rng, cin, cout, 2, 2);
    std::vector<double> b(cout);
    for (auto& v : b) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    auto proj = random_tensor(rng, n, cout, 2 * h, 2 * w);
    auto f = [&] { return dot(upconv_forward<double>(x, wt, b), proj); };
    const auto g = upconv_backward<double>(x, wt, proj);
    r.add(oracle::gradcheck(x.values(), g.dx.values(), f));
    r.add(oracle::gradcheck(wt.values(), g.dw.values(), f));
    r.add(oracle::gradcheck(b, g.db, f));
    ++r.shapes;
  }
  return r;
}

LayerReport check_softmax_ce(std::mt19937_64& rng) {
  LayerReport r;
  for (int s = 0; s < 12; ++s) {
    const int n = 1 + s % 2, c = 2 + s % 3, h = 1 + s % 4, w = 1 + (s + 1) % 5;
    auto logits = random_tensor(rng, n, c, h, w, -3, 3);
    std::vector<std::uint8_t> y(static_cast<std::size_t>(n) * h * w);
    for (auto& v : y) v = static_cast<std::uint8_t>(rng() % c);
    std::vector<double> weights(c);
    for (auto& v : weights) v = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    auto f = [&] { return weighted_ce_loss(softmax_channels(logits), y, weights).loss; };
    const auto loss = weighted_ce_loss(softmax_channels(logits), y, weights);
    r.add(oracle::gradcheck(logits.values(), loss.dlogits.values(), f));
    ++r.shapes;
  }
  return r;
}

Outcome gradient_checks() {
  std::mt19937_64 rng(202);
  const std::pair<const char*, std::function<LayerReport(std::mt19937_64&)>> layers[] = {
      {"conv", check_conv},       {"relu", check_relu},
      {"maxpool", check_maxpool}, {"upconv", check_upconv},
      {"softmax+wce", check_softmax_ce}};
  bool pass = true;
  std::string detail;
  for (const auto& [name, fn] : layers) {
    const auto rep = fn(rng);
    pass = pass && rep.worst < 1e-4 && rep.shapes >= 10;
    detail += std::string(detail.empty() ? "" : ", ") + name + " " +
              std::to_string(rep.shapes) + " shapes max rel " + num(rep.worst, "%.2e");
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 3

Outcome shape_contract() {
  const UNetConfig cfg;
  const auto params = init_unet<float>(cfg, 3);
  Tensor4<float> x(1, 52, 64, 64);
  std::mt19937_64 rng(303);
  for (auto& v : x.values()) v = static_cast<float>((rng() >> 11) * 0x1.0p-53);
  const auto cache = unet_forward(cfg, params, x);
  const auto& b = cache.mid2;
  const bool ok = b.n() == 1 && b.c() == 512 && b.h() == 4 && b.w() == 4 &&
                  cache.probs.n() == 1 && cache.probs.c() == 2 && cache.probs.h() == 64 &&
                  cache.probs.w() == 64;
  return {ok, "bottleneck " + b.shape_string() + ", output " + cache.probs.shape_string()};
}

// ---------------------------------------------------------------- 4

Outcome split_stitch() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<float> u(-50.0f, 3000.0f);
  const std::pair<std::uint32_t, std::uint32_t> sizes[] = {{224, 224}, {398, 398}, {500, 431}};
  bool pass = true;
  std::string detail;
  for (auto [w, h] : sizes) {
    int ok = 0;
    for (int t = 0; t < 5; ++t) {
      DemGrid g(w, h);
      for (auto& v : g.values()) v = (rng() % 17 == 0) ? g.nodata() : u(rng);
      const auto set = split(g, PatchSpec{});
      ok += bitwise_equal(stitch(set), g);
    }
    pass = pass && ok == 5;
    detail += std::string(detail.empty() ? "" : ", ") + std::to_string(w) + "x" +
              std::to_string(h) + " " + std::to_string(ok) + "/5";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 5

Outcome synthetic_overfit() {
  std::vector<DemGrid> dems;
  std::vector<MaskGrid> masks;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < 32; ++i) {
    SynthConfig c;
    c.width = c.height = 64;
    c.seed = 5000 + static_cast<std::uint64_t>(i);
    c.cloud_radius_min = 4;
    c.cloud_radius_max = 14;
    auto clouds = inject_clouds(gen_terrain(c), c);
    for (float v : clouds.grid.values()) {
      lo = std::min<double>(lo, v);
      hi = std::max<double>(hi, v);
    }
    dems.push_back(std::move(clouds.grid));
    masks.push_back(std::move(clouds.truth));
  }
  const GlcmParams glcm{32, 3, lo, hi};
  std::vector<FeatureVolume> volumes;
  ChannelStats stats;
  for (const auto& d : dems) {
    volumes.push_back(texture_features(d, glcm));
    stats.update(volumes.back());
  }
  std::vector<Sample> data;
  for (int i = 0; i < 32; ++i) data.push_back({normalize(volumes[i], stats), masks[i]});

  TrainConfig tc;  // lr 0.005, weights [0.3, 0.7], 200 epochs, 60/20/20
  tc.seed = 55;
  const UNetConfig net;
  const auto result = train(data, tc, net);
  const double miou = dataset_miou(net, result.params, data, result.split.train, tc.batch_size);
  return {miou >= 0.95, "training mIoU " + num(miou, "%.4f") + " over " +
                            std::to_string(result.split.train.size()) + " patches, best epoch " +
                            std::to_string(result.best_epoch) + ", final loss " +
                            num(result.log.back().train_loss, "%.4g")};
}

// ---------------------------------------------------------------- 6, 8

PipelineConfig pipeline_config(const fs::path& dir, int epochs) {
  return parse_config(fixtures::pipeline_yaml(epochs), dir);
}

Outcome synthetic_end_to_end() {
  const auto dir = fixtures::scratch_dir("accept_e2e");
  const auto cfg = pipeline_config(dir, 60);
  const auto s = run_pipeline(cfg);
  const auto pr = pr_stats(s.holdout);
  const double recall = pr.recall.value_or(0.0);
  std::string held;
  for (const auto& f : s.frames) held += f.holdout ? std::to_string(f.timestep) + " " : "";
  return {pr.recall && recall >= 0.90,
          "held-out strips " + held + "recall " + num(recall, "%.4f") + " precision " +
              (pr.precision ? num(*pr.precision, "%.4f") : "-") + " mIoU " +
              num(iou(s.holdout).mean, "%.4f") + " mAP " +
              (s.holdout_map ? num(*s.holdout_map, "%.4f") : "-")};
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && read_file_bytes(a) == read_file_bytes(b);
}

Outcome determinism() {
  const auto a = fixtures::scratch_dir("accept_det_a");
  const auto b = fixtures::scratch_dir("accept_det_b");
  const auto ca = pipeline_config(a, 4), cb = pipeline_config(b, 4);
  run_pipeline(ca);
  run_pipeline(cb);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(ca.paths.output_dir)) {
    names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  int masks = 0, differing = 0;
  for (const auto& n : names) {
    masks += n.rfind("mask_", 0) == 0;
    differing += !same_bytes(ca.paths.output_dir / n, cb.paths.output_dir / n);
  }
  const bool report = same_bytes(ca.paths.output_dir / "report.tsv", cb.paths.output_dir / "report.tsv");
  return {differing == 0 && report && masks == 5,
          std::to_string(names.size()) + " output files (" + std::to_string(masks) +
              " masks, report.tsv), " + std::to_string(differing) + " differ"};
}

// ---------------------------------------------------------------- 7

ConfidenceGrid random_conf(std::mt19937_64& rng, std::uint32_t w, std::uint32_t h, double lo) {
  std::uniform_real_distribution<float> u(static_cast<float>(lo), 1.0f);
  ConfidenceGrid c(w, h);
  for (auto& v : c.values()) v = u(rng);
  return c;
}

MaskGrid random_mask(std::mt19937_64& rng, std::uint32_t w, std::uint32_t h, double density) {
  std::bernoulli_distribution b(density);
  MaskGrid m(w, h);
  for (auto& v : m.values()) v = b(rng);
  return m;
}

MaskGrid brute_dilate(const MaskGrid& m, int kw, int kh) {
  MaskGrid out(m.width(), m.height(), 0);
  const int w = m.width(), h = m.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int dy = -kh / 2; dy <= kh / 2; ++dy)
        for (int dx = -kw / 2; dx <= kw / 2; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (sx >= 0 && sy >= 0 && sx < w && sy < h && m(sx, sy)) out(x, y) = 1;
        }
  return out;
}

Outcome ensemble_algebra() {
  std::mt19937_64 rng(707);
  int zero_ok = 0, comm_ok = 0, mono_ok = 0, dil_ok = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::uint32_t w = 1 + rng() % 24, h = 1 + rng() % 24;
    const int k = 2 + static_cast<int>(rng() % 3);
    std::vector<ConfidenceGrid> members;
    for (int i = 0; i < k; ++i) members.push_back(random_conf(rng, w, h, 1e-3));

    // Zero override: a zero anywhere in a member zeroes the product there,
    // and only there.
    std::vector<std::size_t> zeros;
    for (int z = 0; z < 3; ++z) {
      const std::size_t px = rng() % members[0].size();
      members[rng() % k][px] = 0.0f;
      zeros.push_back(px);
    }
    const auto prod = combine(members);
    bool zok = true;
    for (std::size_t i = 0; i < prod.size(); ++i) {
      const bool vetoed = std::find(zeros.begin(), zeros.end(), i) != zeros.end();
      zok = zok && ((prod[i] == 0.0f) == vetoed);
    }
    zero_ok += zok;

    auto shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    comm_ok += combine(shuffled) == prod;

    const double t1 = (rng() >> 11) * 0x1.0p-53, t2 = (rng() >> 11) * 0x1.0p-53;
    const auto lo = threshold(prod, std::min(t1, t2)), hi = threshold(prod, std::max(t1, t2));
    bool mok = true;
    for (std::size_t i = 0; i < lo.size(); ++i) mok = mok && (hi[i] <= lo[i]);
    mono_ok += mok;

    const auto m = random_mask(rng, w, h, ((rng() >> 11) * 0x1.0p-53) * 0.2);
    const int kw = 1 + 2 * static_cast<int>(rng() % 3), kh = 1 + 2 * static_cast<int>(rng() % 3);
    const auto d = dilate(m, kw, kh);
    bool dok = d == brute_dilate(m, kw, kh);
    for (std::size_t i = 0; i < m.size(); ++i) dok = dok && d[i] >= m[i];
    dok = dok && d.popcount() >= m.popcount() &&
          d.popcount() <= std::min<std::size_t>(d.size(), m.popcount() * kw * kh);
    dil_ok += dok;
  }
  const bool pass = zero_ok == 1000 && comm_ok == 1000 && mono_ok == 1000 && dil_ok == 1000;
  return {pass, "zero-override " + std::to_string(zero_ok) + ", commutativity " +
                    std::to_string(comm_ok) + ", threshold monotonicity " +
                    std::to_string(mono_ok) + ", dilation " + std::to_string(dil_ok) +
                    " of 1000"};
}

// ---------------------------------------------------------------- 9

Outcome metrics_oracle() {
  std::mt19937_64 rng(909);
  int cm_ok = 0, iou_ok = 0, ap_ok = 0;
  double worst = 0;
  const int cases = 1000;
  for (int t = 0; t < cases; ++t) {
    const double density = (rng() >> 11) * 0x1.0p-53;
    const auto pred = random_mask(rng, 8, 8, density);
    const auto truth = random_mask(rng, 8, 8, (rng() >> 11) * 0x1.0p-53);
    const bool use_valid = t % 3 == 0;
    const auto valid = random_mask(rng, 8, 8, 0.7);
    ConfidenceGrid conf(8, 8);
    for (auto& v : conf.values()) {
      // Every other case draws from 11 levels so tie groups are common.
      v = (t % 2) ? static_cast<float>(rng() % 11) / 10.0f
                  : static_cast<float>((rng() >> 11) * 0x1.0p-53);
    }
    std::vector<int> p(64), y(64), ok(64, 1);
    std::vector<double> c(64);
    for (int i = 0; i < 64; ++i) {
      p[i] = pred[i];
      y[i] = truth[i];
      c[i] = conf[i];
      if (use_valid) ok[i] = valid[i];
    }
    const auto cm = confusion(pred, truth, use_valid ? &valid : nullptr);
    const auto want = oracle::count(p, y, ok);
    cm_ok += cm.tp == want.tp && cm.fp == want.fp && cm.fn == want.fn && cm.tn == want.tn;

    const auto io = iou(cm);
    const double e1 = std::abs(io.cloud - oracle::iou_cloud(want));
    const double e2 = std::abs(io.clear - oracle::iou_clear(want));
    const double e3 = std::abs(io.mean - 0.5 * (oracle::iou_cloud(want) + oracle::iou_clear(want)));
    worst = std::max({worst, e1, e2, e3});
    iou_ok += std::max({e1, e2, e3}) <= 1e-12;

    const auto ap = average_precision(conf, truth, use_valid ? &valid : nullptr);
    const auto ap_want = oracle::ap(c, y, ok);
    if (ap.has_value() == ap_want.has_value()) {
      const double e = ap ? std::abs(*ap - *ap_want) : 0.0;
      worst = std::max(worst, e);
      ap_ok += e <= 1e-12;
    }
  }
  const bool pass = cm_ok == cases && iou_ok == cases && ap_ok == cases;
  return {pass, "confusion " + std::to_string(cm_ok) + ", IoU " + std::to_string(iou_ok) +
                    ", AP " + std::to_string(ap_ok) + " of " + std::to_string(cases) +
                    " match, max diff " + num(worst, "%.2e")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
      {1, {"GLCM oracle equivalence", glcm_equivalence}},
      {2, {"gradient checks", gradient_checks}},
      {3, {"shape contract", shape_contract}},
      {4, {"split/stitch round-trip", split_stitch}},
      {5, {"synthetic overfit", synthetic_overfit}},
      {6, {"synthetic end-to-end recall", synthetic_end_to_end}},
      {7, {"ensemble algebra", ensemble_algebra}},
      {8, {"determinism", determinism}},
      {9, {"metrics oracle", metrics_oracle}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %-30s %s  %s  (%.1fs)\n", id, entry.first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
