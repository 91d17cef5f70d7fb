#include "demcloud/train.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "demcloud/ensemble.hpp"
#include "demcloud/metrics.hpp"

namespace demcloud::nn {

namespace {

constexpr std::uint64_t kInitSalt = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kShuffleSalt = 0xD1B54A32D192ED03ull;

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng(), i)]);
  }
}

struct Batch {
  Tensor4<float> x;
  std::vector<std::uint8_t> y;
};

Batch make_batch(const std::vector<Sample>& data, std::span<const std::size_t> idx) {
  std::vector<const TextureStack*> stacks;
  for (auto i : idx) stacks.push_back(&data[i].input);
  Batch b{to_batch(stacks), {}};
  for (auto i : idx) {
    const auto v = data[i].target.values();
    b.y.insert(b.y.end(), v.begin(), v.end());
  }
  return b;
}

struct EvalResult {
  double loss = 0.0;
  ConfusionMatrix cm;
};

EvalResult evaluate(const UNetConfig& net, const UNetParams<float>& params,
                    const std::vector<Sample>& data, const std::vector<std::size_t>& indices,
                    std::span<const double> weights, int batch_size) {
  EvalResult r;
  std::size_t pixels = 0;
  double weighted = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const std::size_t end = std::min(indices.size(), start + batch_size);
    std::span<const std::size_t> idx(indices.data() + start, end - start);
    auto batch = make_batch(data, idx);
    auto cache = unet_forward(net, params, batch.x);
    if (!weights.empty()) {
      auto loss = weighted_ce_loss(cache.probs, batch.y, weights);
      weighted += loss.loss * static_cast<double>(batch.y.size());
      pixels += batch.y.size();
    }
    auto conf = cloud_confidence(cache.probs);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      r.cm += confusion(threshold(conf[k], 0.5), data[idx[k]].target);
    }
  }
  r.loss = pixels ? weighted / static_cast<double>(pixels) : 0.0;
  return r;
}

}  // namespace

std::uint64_t uniform_index(std::uint64_t random_bits, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(random_bits) * n) >> 64);
}

void TrainConfig::validate(const UNetConfig& net) const {
  if (class_weights.size() != static_cast<std::size_t>(net.class_count)) {
    throw ConfigError("train.class_weights needs one weight per class");
  }
  for (double w : class_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("train.class_weights must be positive");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  double sum = 0;
  for (double f : split) {
    if (f < 0.0) throw ConfigError("train.split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("train.split fractions must sum to 1");
}

DatasetSplit split_dataset(std::size_t n, const std::array<double, 3>& fractions,
                           std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed ^ kShuffleSalt);
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
  const auto n_val =
      std::min(n - std::min(n, n_train), static_cast<std::size_t>(std::llround(fractions[1] * n)));
  DatasetSplit s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train)));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(s.train.size()),
                      order.begin() + static_cast<std::ptrdiff_t>(s.train.size() + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(s.train.size() + n_val), order.end());
  if (s.train.empty() || s.validation.empty() || s.test.empty()) {
    throw DataError("dataset of " + std::to_string(n) + " samples leaves an empty split (" +
                    std::to_string(s.train.size()) + "/" + std::to_string(s.validation.size()) +
                    "/" + std::to_string(s.test.size()) + ")");
  }
  return s;
}

Tensor4<float> to_batch(const std::vector<const TextureStack*>& stacks) {
  if (stacks.empty()) throw DataError("empty batch");
  const auto& first = *stacks.front();
  Tensor4<float> x(static_cast<int>(stacks.size()), static_cast<int>(first.channels()),
                   static_cast<int>(first.height()), static_cast<int>(first.width()));
  for (std::size_t n = 0; n < stacks.size(); ++n) {
    const auto& s = *stacks[n];
    if (s.channels() != first.channels() || s.width() != first.width() ||
        s.height() != first.height()) {
      throw DataError("texture stacks in a batch have different shapes");
    }
    std::copy(s.values().begin(), s.values().end(), x.sample(static_cast<int>(n)));
  }
  return x;
}

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg,
                  const UNetConfig& net, const EpochCallback& on_epoch) {
  net.validate();
  cfg.validate(net);
  if (dataset.empty()) throw DataError("training dataset is empty");
  for (const auto& s : dataset) {
    if (s.input.channels() != static_cast<std::uint32_t>(net.in_channels)) {
      throw DataError("training sample has " + std::to_string(s.input.channels()) +
                      " channels, network expects " + std::to_string(net.in_channels));
    }
    if (s.target.width() != s.input.width() || s.target.height() != s.input.height()) {
      throw DataError("training sample mask does not match its texture stack");
    }
  }

  TrainResult result;
  result.split = split_dataset(dataset.size(), cfg.split, cfg.seed);
  result.params = init_unet<float>(net, cfg.seed ^ kInitSalt);
  UNetParams<float>& params = result.params;
  std::vector<Tensor4<float>> best;
  double best_miou = -1.0;

  AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  std::mt19937_64 rng(cfg.seed ^ kShuffleSalt ^ 1u);
  std::vector<std::size_t> order = result.split.train;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t pixel_sum = 0;
    std::size_t clamped = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      auto batch = make_batch(dataset, {order.data() + start, end - start});
      auto cache = unet_forward(net, params, batch.x);
      auto loss = weighted_ce_loss(cache.probs, batch.y, cfg.class_weights);
      if (!std::isfinite(loss.loss)) {
        throw InvariantError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch));
      }
      clamped += loss.clamped;
      params.zero_grad();
      unet_backward(net, params, cache, loss.dlogits);
      adam_step(params, adam);
      loss_sum += loss.loss * static_cast<double>(batch.y.size());
      pixel_sum += batch.y.size();
    }

    auto val = evaluate(net, params, dataset, result.split.validation, cfg.class_weights,
                        cfg.batch_size);
    EpochMetrics m{epoch, loss_sum / static_cast<double>(pixel_sum), val.loss, iou(val.cm).mean,
                   clamped};
    result.log.push_back(m);
    if (on_epoch) on_epoch(m);
    if (m.val_miou > best_miou) {
      best_miou = m.val_miou;
      result.best_epoch = epoch;
      best.clear();
      for (const auto& p : params.params) best.push_back(p.value);
    }
  }
  for (std::size_t i = 0; i < best.size(); ++i) params.params[i].value = std::move(best[i]);
  return result;
}

std::string format_metrics_log(const std::vector<EpochMetrics>& log) {
  std::ostringstream out;
  char buf[160];
  for (const auto& m : log) {
    std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\t%.9g\n", m.epoch, m.train_loss, m.val_loss,
                  m.val_miou);
    out << buf;
  }
  return out.str();
}

ConfidenceGrid predict(const UNetConfig& net, const UNetParams<float>& params,
                       const TextureStack& input) {
  auto cache = unet_forward(net, params, to_batch({&input}));
  return std::move(cloud_confidence(cache.probs).front());
}

double dataset_miou(const UNetConfig& net, const UNetParams<float>& params,
                    const std::vector<Sample>& dataset, const std::vector<std::size_t>& indices,
                    int batch_size) {
  return iou(evaluate(net, params, dataset, indices, {}, batch_size).cm).mean;
}

}  // namespace demcloud::nn
