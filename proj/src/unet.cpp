#include "demcloud/unet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "demcloud/error.hpp"

namespace demcloud::nn {

namespace {

template <typename T>
std::span<const T> bias_span(const Param<T>& p) {
  return {p.value.data(), p.value.size()};
}

template <typename T>
void add_grad(Param<T>& p, const Tensor4<T>& g) {
  if (g.size() != p.grad.size()) throw InvariantError("gradient size mismatch for " + p.name);
  for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

template <typename T>
void add_grad(Param<T>& p, const std::vector<T>& g) {
  if (g.size() != p.grad.size()) throw InvariantError("gradient size mismatch for " + p.name);
  for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Index of weight tensor for layer `layer`; the bias follows it.
std::size_t wi(int layer) { return static_cast<std::size_t>(2 * layer); }

constexpr int kMidLayer = 2 * kUNetDepth;
int enc_layer(int block, int conv) { return 2 * block + conv; }
int dec_layer(int block, int part) { return kMidLayer + 2 + 3 * block + part; }
constexpr int kHeadLayer = kMidLayer + 2 + 3 * kUNetDepth;

template <typename T>
struct ConvRef {
  const Param<T>& w;
  const Param<T>& b;
};

template <typename T>
ConvRef<T> layer(const UNetParams<T>& p, int l) {
  return {p.params[wi(l)], p.params[wi(l) + 1]};
}

template <typename T>
Tensor4<T> conv_relu(const Tensor4<T>& x, const UNetParams<T>& p, int l) {
  auto ref = layer(p, l);
  return relu_forward(conv2d_forward(x, ref.w.value, bias_span(ref.b), 1, 1));
}

// Backward through relu(conv3x3(x)) given its output y.
template <typename T>
Tensor4<T> conv_relu_backward(const Tensor4<T>& x, const Tensor4<T>& y, const Tensor4<T>& dy,
                              UNetParams<T>& p, int l) {
  auto g = conv2d_backward(x, p.params[wi(l)].value, relu_backward(y, dy), 1, 1);
  add_grad(p.params[wi(l)], g.dw);
  add_grad(p.params[wi(l) + 1], g.db);
  return std::move(g.dx);
}

template <typename T>
void add_into(Tensor4<T>& a, const Tensor4<T>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

void UNetConfig::validate() const {
  if (in_channels < 1) throw ConfigError("unet.in_channels must be positive");
  if (class_count < 2) throw ConfigError("unet.class_count must be at least 2");
  if (encoder.size() != kUNetDepth) {
    throw ConfigError("unet.encoder must list " + std::to_string(kUNetDepth) + " channel counts");
  }
  if (decoder.size() != kUNetDepth) {
    throw ConfigError("unet.decoder must list " + std::to_string(kUNetDepth) + " channel counts");
  }
  for (int c : encoder) {
    if (c < 1) throw ConfigError("unet.encoder channel counts must be positive");
  }
  for (int c : decoder) {
    if (c < 1) throw ConfigError("unet.decoder channel counts must be positive");
  }
  if (bottleneck < 1) throw ConfigError("unet.bottleneck must be positive");
}

template <typename T>
void UNetParams<T>::zero_grad() {
  for (auto& p : params) std::fill(p.grad.values().begin(), p.grad.values().end(), T{});
}

template <typename T>
std::size_t UNetParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

template <typename T>
Param<T>* UNetParams<T>::find(const std::string& name) {
  for (auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

template <typename T>
UNetParams<T> init_unet(const UNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  UNetParams<T> out;
  std::mt19937_64 rng(seed);

  auto add_layer = [&](const std::string& name, int d0, int d1, int k, int fan_in,
                       int bias_count) {
    Param<T> w;
    w.name = name + ".w";
    w.value = Tensor4<T>(d0, d1, k, k);
    const double limit = std::sqrt(6.0 / fan_in);
    for (auto& v : w.value.values()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
    Param<T> b;
    b.name = name + ".b";
    b.is_bias = true;
    b.value = Tensor4<T>(bias_count, 1, 1, 1);
    for (auto* p : {&w, &b}) {
      p->grad = Tensor4<T>(p->value.n(), p->value.c(), p->value.h(), p->value.w());
      p->m.assign(p->value.size(), T{});
      p->v.assign(p->value.size(), T{});
      out.params.push_back(std::move(*p));
    }
  };
  auto conv = [&](const std::string& name, int cin, int cout, int k) {
    add_layer(name, cout, cin, k, cin * k * k, cout);
  };

  int ch = cfg.in_channels;
  for (int b = 0; b < kUNetDepth; ++b) {
    const std::string pre = "enc" + std::to_string(b);
    conv(pre + ".conv1", ch, cfg.encoder[b], 3);
    conv(pre + ".conv2", cfg.encoder[b], cfg.encoder[b], 3);
    ch = cfg.encoder[b];
  }
  conv("mid.conv1", ch, cfg.bottleneck, 3);
  conv("mid.conv2", cfg.bottleneck, cfg.bottleneck, 3);
  ch = cfg.bottleneck;
  for (int b = 0; b < kUNetDepth; ++b) {
    const std::string pre = "dec" + std::to_string(b);
    const int out_ch = cfg.decoder[b];
    const int skip = cfg.encoder[kUNetDepth - 1 - b];
    add_layer(pre + ".up", ch, out_ch, 2, ch, out_ch);
    conv(pre + ".conv1", out_ch + skip, out_ch, 3);
    conv(pre + ".conv2", out_ch, out_ch, 3);
    ch = out_ch;
  }
  conv("head", ch, cfg.class_count, 1);
  return out;
}

template <typename T>
ForwardCache<T> unet_forward(const UNetConfig& cfg, const UNetParams<T>& params,
                             const Tensor4<T>& x) {
  if (x.c() != cfg.in_channels) {
    throw DataError("unet input has " + std::to_string(x.c()) + " channels, expected " +
                    std::to_string(cfg.in_channels));
  }
  if (x.h() % UNetConfig::kSizeMultiple != 0 || x.w() % UNetConfig::kSizeMultiple != 0 ||
      x.h() == 0 || x.w() == 0) {
    throw DataError("unet input sides must be positive multiples of " +
                    std::to_string(UNetConfig::kSizeMultiple) + ", got " + x.shape_string());
  }
  if (params.params.size() != wi(kHeadLayer) + 2) {
    throw InvariantError("unet parameter count does not match the architecture");
  }

  ForwardCache<T> c;
  c.input = x;
  const Tensor4<T>* in = &c.input;
  for (int b = 0; b < kUNetDepth; ++b) {
    auto& e = c.enc[b];
    e.c1 = conv_relu(*in, params, enc_layer(b, 0));
    e.c2 = conv_relu(e.c1, params, enc_layer(b, 1));
    e.pool = maxpool_forward(e.c2);
    in = &e.pool.y;
  }
  c.mid1 = conv_relu(*in, params, kMidLayer);
  c.mid2 = conv_relu(c.mid1, params, kMidLayer + 1);
  in = &c.mid2;
  for (int b = 0; b < kUNetDepth; ++b) {
    auto& d = c.dec[b];
    auto up = layer(params, dec_layer(b, 0));
    d.up = relu_forward(upconv_forward(*in, up.w.value, bias_span(up.b)));
    d.cat = concat_channels(d.up, c.enc[kUNetDepth - 1 - b].c2);
    d.d1 = conv_relu(d.cat, params, dec_layer(b, 1));
    d.d2 = conv_relu(d.d1, params, dec_layer(b, 2));
    in = &d.d2;
  }
  auto head = layer(params, kHeadLayer);
  c.logits = conv2d_forward(*in, head.w.value, bias_span(head.b), 1, 0);
  c.probs = softmax_channels(c.logits);
  return c;
}

template <typename T>
Tensor4<T> unet_backward(const UNetConfig& cfg, UNetParams<T>& params,
                         const ForwardCache<T>& c, const Tensor4<T>& dlogits) {
  (void)cfg;
  const Tensor4<T>& last = c.dec[kUNetDepth - 1].d2;
  auto hg = conv2d_backward(last, params.params[wi(kHeadLayer)].value, dlogits, 1, 0);
  add_grad(params.params[wi(kHeadLayer)], hg.dw);
  add_grad(params.params[wi(kHeadLayer) + 1], hg.db);
  Tensor4<T> grad = std::move(hg.dx);

  std::array<Tensor4<T>, kUNetDepth> skip_grad;
  for (int b = kUNetDepth - 1; b >= 0; --b) {
    const auto& d = c.dec[b];
    Tensor4<T> dd1 = conv_relu_backward(d.d1, d.d2, grad, params, dec_layer(b, 2));
    Tensor4<T> dcat = conv_relu_backward(d.cat, d.d1, dd1, params, dec_layer(b, 1));
    Tensor4<T> dup, dskip;
    split_channels(dcat, d.up.c(), dup, dskip);
    skip_grad[kUNetDepth - 1 - b] = std::move(dskip);
    const Tensor4<T>& up_in = b == 0 ? c.mid2 : c.dec[b - 1].d2;
    const int ul = dec_layer(b, 0);
    auto ug = upconv_backward(up_in, params.params[wi(ul)].value, relu_backward(d.up, dup));
    add_grad(params.params[wi(ul)], ug.dw);
    add_grad(params.params[wi(ul) + 1], ug.db);
    grad = std::move(ug.dx);
  }

  Tensor4<T> dmid1 = conv_relu_backward(c.mid1, c.mid2, grad, params, kMidLayer + 1);
  grad = conv_relu_backward(c.enc[kUNetDepth - 1].pool.y, c.mid1, dmid1, params, kMidLayer);

  for (int b = kUNetDepth - 1; b >= 0; --b) {
    const auto& e = c.enc[b];
    Tensor4<T> dc2 = maxpool_backward(grad, e.pool.argmax, e.c2.dims());
    add_into(dc2, skip_grad[b]);
    Tensor4<T> dc1 = conv_relu_backward(e.c1, e.c2, dc2, params, enc_layer(b, 1));
    const Tensor4<T>& in = b == 0 ? c.input : c.enc[b - 1].pool.y;
    grad = conv_relu_backward(in, e.c1, dc1, params, enc_layer(b, 0));
  }
  return grad;
}

template <typename T>
std::vector<ConfidenceGrid> cloud_confidence(const Tensor4<T>& probs) {
  std::vector<ConfidenceGrid> out;
  const std::size_t plane = probs.plane();
  for (int n = 0; n < probs.n(); ++n) {
    ConfidenceGrid g(static_cast<std::uint32_t>(probs.w()), static_cast<std::uint32_t>(probs.h()),
                     0.0f);
    const T* p1 = probs.sample(n) + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      g[i] = std::clamp(static_cast<float>(p1[i]), 0.0f, 1.0f);
    }
    out.push_back(std::move(g));
  }
  return out;
}

template <typename T>
void adam_update(std::span<T> value, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t step, const AdamConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    value[i] = static_cast<T>(value[i] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
  }
}

template <typename T>
void adam_step(UNetParams<T>& params, const AdamConfig& cfg) {
  for (const auto& p : params.params) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(static_cast<double>(p.grad[i]))) {
        throw InvariantError("non-finite gradient in " + p.name + " at index " +
                             std::to_string(i) + " (step " + std::to_string(params.step + 1) +
                             ")");
      }
    }
  }
  ++params.step;
  for (auto& p : params.params) {
    adam_update<T>(p.value.values(), p.grad.values(), p.m, p.v, params.step, cfg);
  }
}

#define DEMCLOUD_INSTANTIATE(T)                                                              \
  template struct UNetParams<T>;                                                             \
  template UNetParams<T> init_unet(const UNetConfig&, std::uint64_t);                        \
  template ForwardCache<T> unet_forward(const UNetConfig&, const UNetParams<T>&,             \
                                        const Tensor4<T>&);                                  \
  template Tensor4<T> unet_backward(const UNetConfig&, UNetParams<T>&, const ForwardCache<T>&, \
                                    const Tensor4<T>&);                                      \
  template std::vector<ConfidenceGrid> cloud_confidence(const Tensor4<T>&);                  \
  template void adam_update(std::span<T>, std::span<const T>, std::span<T>, std::span<T>,    \
                            std::uint64_t, const AdamConfig&);                               \
  template void adam_step(UNetParams<T>&, const AdamConfig&);

DEMCLOUD_INSTANTIATE(float)
DEMCLOUD_INSTANTIATE(double)

#undef DEMCLOUD_INSTANTIATE

}  // namespace demcloud::nn
