// Copyright 2026 The snrmask Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "snrmask/error.hpp"
#include "snrmask/features.hpp"
#include "snrmask/types.hpp"

namespace snrmask {

enum class Activation : std::uint32_t {
  kReLU = 0,
  kSigmoid = 1,
  kRecurrentGated = 2,  // LSTM cell, gate order i, f, g, o
};

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::kReLU;

  bool operator==(const LayerSpec&) const = default;
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Parameters of one layer. Dense layers use weights (out x in) and bias;
/// recurrent layers use input weights (4H x in), recurrent weights (4H x H)
/// and bias (4H).
template <typename T>
struct Layer {
  LayerSpec spec;
  Mat<T> weights;
  Mat<T> recurrent;
  Vec<T> bias;

  template <typename F>
  void visit(F&& f) {
    f(weights.data(), static_cast<std::size_t>(weights.size()));
    f(recurrent.data(), static_cast<std::size_t>(recurrent.size()));
    f(bias.data(), static_cast<std::size_t>(bias.size()));
  }
  template <typename F>
  void visit(F&& f) const {
    f(weights.data(), static_cast<std::size_t>(weights.size()));
    f(recurrent.data(), static_cast<std::size_t>(recurrent.size()));
    f(bias.data(), static_cast<std::size_t>(bias.size()));
  }

  bool operator==(const Layer& o) const {
    return spec == o.spec && weights == o.weights &&
           recurrent == o.recurrent && bias == o.bias;
  }
};

template <typename T>
struct NetworkParams {
  std::vector<Layer<T>> layers;
  std::uint64_t seed = 0;
  // Input description carried with the model so inference can check it.
  FeatureKind feature = FeatureKind::kSnrNat;
  int context = 1;

  int input_dim() const { return layers.empty() ? 0 : layers.front().spec.in_dim; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().spec.out_dim; }

  bool recurrent() const {
    return std::any_of(layers.begin(), layers.end(), [](const Layer<T>& l) {
      return l.spec.activation == Activation::kRecurrentGated;
    });
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& l : layers) l.visit([&](const T*, std::size_t c) { n += c; });
    return n;
  }

  template <typename F>
  void visit(F&& f) {
    for (auto& l : layers) l.visit(f);
  }
  template <typename F>
  void visit(F&& f) const {
    for (const auto& l : layers) l.visit(f);
  }

  bool operator==(const NetworkParams&) const = default;

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out;
    out.seed = seed;
    out.feature = feature;
    out.context = context;
    for (const auto& l : layers) {
      out.layers.push_back({l.spec, l.weights.template cast<U>(),
                            l.recurrent.template cast<U>(),
                            l.bias.template cast<U>()});
    }
    return out;
  }
};

inline void validate_layer_specs(const std::vector<LayerSpec>& spec) {
  detail::require(!spec.empty(), ErrorKind::kInvalidArgument,
                  "network needs at least one layer");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    detail::require(spec[i].in_dim >= 1 && spec[i].out_dim >= 1,
                    ErrorKind::kInvalidArgument, "layer dims must be >= 1");
    if (i > 0) {
      detail::require(spec[i].in_dim == spec[i - 1].out_dim,
                      ErrorKind::kInvalidArgument,
                      "layer dims do not chain at layer " + std::to_string(i));
    }
  }
  detail::require(spec.back().activation == Activation::kSigmoid,
                  ErrorKind::kInvalidArgument,
                  "output layer must use sigmoid units");
}

inline double glorot_limit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

/// Uniform Glorot initialization with zero biases. Recurrent layers are
/// initialized per gate block.
template <typename T = float>
NetworkParams<T> glorot_init(const std::vector<LayerSpec>& spec,
                             std::uint64_t seed) {
  validate_layer_specs(spec);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](auto block, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < block.cols(); ++c) {
      for (Eigen::Index r = 0; r < block.rows(); ++r) {
        block(r, c) = static_cast<T>(dist(rng));
      }
    }
  };
  NetworkParams<T> p;
  p.seed = seed;
  for (const auto& s : spec) {
    Layer<T> layer;
    layer.spec = s;
    if (s.activation == Activation::kRecurrentGated) {
      const int h = s.out_dim;
      layer.weights.resize(4 * h, s.in_dim);
      layer.recurrent.resize(4 * h, h);
      layer.bias = Vec<T>::Zero(4 * h);
      for (int g = 0; g < 4; ++g) {
        fill(layer.weights.middleRows(g * h, h), glorot_limit(s.in_dim, h));
        fill(layer.recurrent.middleRows(g * h, h), glorot_limit(h, h));
      }
    } else {
      layer.weights.resize(s.out_dim, s.in_dim);
      layer.recurrent.resize(0, 0);
      layer.bias = Vec<T>::Zero(s.out_dim);
      fill(layer.weights.block(0, 0, s.out_dim, s.in_dim),
           glorot_limit(s.in_dim, s.out_dim));
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

enum class Architecture { kFeedForward, kRecurrent };
enum class Preset { kPaper, kDesk };

inline Architecture parse_architecture(std::string_view s) {
  if (s == "ff") return Architecture::kFeedForward;
  if (s == "rec") return Architecture::kRecurrent;
  throw Error(ErrorKind::kInvalidArgument, "unknown architecture '" + std::string(s) + "'");
}

inline Preset parse_preset(std::string_view s) {
  if (s == "paper") return Preset::kPaper;
  if (s == "desk") return Preset::kDesk;
  throw Error(ErrorKind::kInvalidArgument, "unknown preset '" + std::string(s) + "'");
}

/// Context depth used with each architecture: the feed-forward net sees the
/// current and three previous frames, the recurrent net one frame.
inline int context_for(Architecture arch) {
  return arch == Architecture::kFeedForward ? 4 : 1;
}

/// Hidden stack + 129 sigmoid outputs. Full-size preset: 3x1024 ReLU or 3x512
/// LSTM; desk preset: 2x256 ReLU or 2x64 LSTM.
inline std::vector<LayerSpec> mask_network_spec(Architecture arch,
                                                Preset preset, int input_dim,
                                                int output_dim = kNumBins) {
  const bool ff = arch == Architecture::kFeedForward;
  const int depth = preset == Preset::kPaper ? 3 : 2;
  const int width = preset == Preset::kPaper ? (ff ? 1024 : 512) : (ff ? 256 : 64);
  const Activation act = ff ? Activation::kReLU : Activation::kRecurrentGated;
  std::vector<LayerSpec> spec;
  int in = input_dim;
  for (int i = 0; i < depth; ++i) {
    spec.push_back({in, width, act});
    in = width;
  }
  spec.push_back({in, output_dim, Activation::kSigmoid});
  return spec;
}

// ---------------------------------------------------------------------------
// Forward / backward on one sequence. Rows are frames in time order; dense
// layers treat rows independently, recurrent layers run through time.

template <typename T>
struct LstmState {
  Vec<T> h;
  Vec<T> c;
};

/// Recurrent state carried across calls; one entry per layer (unused for
/// dense layers). Empty means zero initial state.
template <typename T>
using RecurrentState = std::vector<LstmState<T>>;

namespace detail {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
struct LstmCache {
  Mat<T> i, f, g, o, c, tanh_c;  // L x H each
  Vec<T> h0, c0;
};

template <typename T>
struct ForwardCache {
  std::vector<Mat<T>> acts;  // acts[0] = input, acts[j+1] = output of layer j
  std::vector<LstmCache<T>> lstm;
};

template <typename T>
Mat<T> dense_forward(const Layer<T>& layer, const Mat<T>& x) {
  Mat<T> z = x * layer.weights.transpose();
  z.rowwise() += layer.bias.transpose();
  if (layer.spec.activation == Activation::kReLU) {
    return z.cwiseMax(T(0));
  }
  return z.unaryExpr([](T v) { return sigmoid(v); });
}

template <typename T>
Mat<T> lstm_forward(const Layer<T>& layer, const Mat<T>& x, LstmState<T>& st,
                    LstmCache<T>* cache) {
  const int h = layer.spec.out_dim;
  const Eigen::Index steps = x.rows();
  if (st.h.size() != h) st.h = Vec<T>::Zero(h);
  if (st.c.size() != h) st.c = Vec<T>::Zero(h);
  const Mat<T> zx = x * layer.weights.transpose();  // L x 4H
  Mat<T> out(steps, h);
  if (cache) {
    cache->h0 = st.h;
    cache->c0 = st.c;
    for (auto* m : {&cache->i, &cache->f, &cache->g, &cache->o, &cache->c,
                    &cache->tanh_c}) {
      m->resize(steps, h);
    }
  }
  Vec<T> z(4 * h);
  for (Eigen::Index t = 0; t < steps; ++t) {
    z = zx.row(t).transpose() + layer.recurrent * st.h + layer.bias;
    for (int u = 0; u < h; ++u) {
      const T ig = sigmoid(z[u]);
      const T fg = sigmoid(z[h + u]);
      const T gg = std::tanh(z[2 * h + u]);
      const T og = sigmoid(z[3 * h + u]);
      const T c = fg * st.c[u] + ig * gg;
      const T tc = std::tanh(c);
      st.c[u] = c;
      st.h[u] = og * tc;
      if (cache) {
        cache->i(t, u) = ig;
        cache->f(t, u) = fg;
        cache->g(t, u) = gg;
        cache->o(t, u) = og;
        cache->c(t, u) = c;
        cache->tanh_c(t, u) = tc;
      }
    }
    out.row(t) = st.h.transpose();
  }
  return out;
}

template <typename T>
Mat<T> forward_sequence(const NetworkParams<T>& params, const Mat<T>& x,
                        RecurrentState<T>& state, ForwardCache<T>* cache) {
  if (state.size() != params.layers.size()) state.resize(params.layers.size());
  if (cache) {
    cache->acts.assign(1, x);
    cache->lstm.assign(params.layers.size(), {});
  }
  Mat<T> cur = x;
  for (std::size_t j = 0; j < params.layers.size(); ++j) {
    const auto& layer = params.layers[j];
    if (layer.spec.activation == Activation::kRecurrentGated) {
      cur = lstm_forward(layer, cur, state[j], cache ? &cache->lstm[j] : nullptr);
    } else {
      cur = dense_forward(layer, cur);
    }
    if (cache) cache->acts.push_back(cur);
  }
  return cur;
}

/// Backpropagates d(loss)/d(output) through one cached sequence and adds
/// parameter gradients into grads (same shapes as params).
template <typename T>
void backward_sequence(const NetworkParams<T>& params,
                       const ForwardCache<T>& cache, Mat<T> d_out,
                       NetworkParams<T>& grads) {
  for (std::size_t jj = params.layers.size(); jj-- > 0;) {
    const auto& layer = params.layers[jj];
    auto& g = grads.layers[jj];
    const Mat<T>& x = cache.acts[jj];
    const Mat<T>& a = cache.acts[jj + 1];
    if (layer.spec.activation == Activation::kRecurrentGated) {
      const auto& lc = cache.lstm[jj];
      const int h = layer.spec.out_dim;
      const Eigen::Index steps = x.rows();
      Mat<T> dz(steps, 4 * h);
      Vec<T> dh_next = Vec<T>::Zero(h);
      Vec<T> dc_next = Vec<T>::Zero(h);
      for (Eigen::Index t = steps; t-- > 0;) {
        for (int u = 0; u < h; ++u) {
          const T dh = d_out(t, u) + dh_next[u];
          const T o = lc.o(t, u), tc = lc.tanh_c(t, u);
          const T i = lc.i(t, u), f = lc.f(t, u), gg = lc.g(t, u);
          const T c_prev = t > 0 ? lc.c(t - 1, u) : lc.c0[u];
          const T dc = dh * o * (T(1) - tc * tc) + dc_next[u];
          dz(t, u) = dc * gg * i * (T(1) - i);
          dz(t, h + u) = dc * c_prev * f * (T(1) - f);
          dz(t, 2 * h + u) = dc * i * (T(1) - gg * gg);
          dz(t, 3 * h + u) = dh * tc * o * (T(1) - o);
          dc_next[u] = dc * f;
        }
        dh_next = layer.recurrent.transpose() * dz.row(t).transpose();
      }
      // h_{t-1} for every step: h0 then outputs shifted by one.
      Mat<T> h_prev(steps, h);
      h_prev.row(0) = lc.h0.transpose();
      if (steps > 1) h_prev.bottomRows(steps - 1) = a.topRows(steps - 1);
      g.weights.noalias() += dz.transpose() * x;
      g.recurrent.noalias() += dz.transpose() * h_prev;
      g.bias += dz.colwise().sum().transpose();
      if (jj > 0) d_out = dz * layer.weights;
    } else {
      Mat<T> dz;
      if (layer.spec.activation == Activation::kReLU) {
        dz = d_out.array() * (a.array() > T(0)).template cast<T>();
      } else {
        dz = d_out.array() * a.array() * (T(1) - a.array());
      }
      g.weights.noalias() += dz.transpose() * x;
      g.bias += dz.colwise().sum().transpose();
      if (jj > 0) d_out = dz * layer.weights;
    }
  }
}

template <typename T>
NetworkParams<T> zeros_like(const NetworkParams<T>& p) {
  NetworkParams<T> g = p;
  g.visit([](T* d, std::size_t n) { std::fill(d, d + n, T(0)); });
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct ForwardResult {
  MaskMatrix mask;    // L x out, in (0, 1)
  RealMatrix hidden;  // L x width of the second-last layer
};

/// Mask prediction for one utterance. Recurrent layers start from zero
/// state and run over the frames in order.
template <typename T>
ForwardResult forward(const NetworkParams<T>& params,
                      const FeatureMatrix& features) {
  detail::require(!params.layers.empty(), ErrorKind::kInvalidArgument,
                  "empty network");
  detail::require(features.dim() == params.input_dim(),
                  ErrorKind::kInvalidArgument,
                  "feature dim " + std::to_string(features.dim()) +
                      " does not match network input " +
                      std::to_string(params.input_dim()));
  const Mat<T> x = features.rows.template cast<T>();
  RecurrentState<T> state;
  detail::ForwardCache<T> cache;
  const Mat<T> out = detail::forward_sequence(params, x, state, &cache);
  ForwardResult r;
  r.mask = out.template cast<double>();
  const auto& hid = cache.acts[cache.acts.size() - 2];
  r.hidden = hid.template cast<double>();
  return r;
}

/// Summed squared error over all bins and frames.
inline double loss(const MaskMatrix& pred, const MaskMatrix& target) {
  detail::require(pred.rows() == target.rows() && pred.cols() == target.cols(),
                  ErrorKind::kInvalidArgument, "mask shape mismatch");
  return (pred - target).squaredNorm();
}

/// Summed squared error of one sequence and its gradient w.r.t. all
/// parameters (accumulated into grads, which must be shaped like params).
template <typename T>
T loss_and_gradient(const NetworkParams<T>& params, const Mat<T>& x,
                    const Mat<T>& target, NetworkParams<T>& grads,
                    RecurrentState<T>* state = nullptr, T scale = T(1)) {
  RecurrentState<T> local;
  RecurrentState<T>& st = state ? *state : local;
  detail::ForwardCache<T> cache;
  const Mat<T> out = detail::forward_sequence(params, x, st, &cache);
  const Mat<T> diff = out - target;
  detail::backward_sequence(params, cache, Mat<T>(T(2) * scale * diff), grads);
  return diff.squaredNorm();
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int epochs = 100;
  double lr0 = 0.4;
  double lr_decay = 0.95;
  double lr_floor = 0.1;
  int batch_size = 128;
  double val_fraction = 0.15;
  int chunk_len = 100;  // truncated BPTT length for recurrent nets
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(epochs >= 1, ErrorKind::kInvalidArgument, "epochs must be >= 1");
    detail::require(lr_floor >= 0.0 && lr_floor <= lr0,
                    ErrorKind::kInvalidArgument, "need 0 <= lr_floor <= lr0");
    detail::require(lr_decay > 0.0 && lr_decay <= 1.0,
                    ErrorKind::kInvalidArgument, "lr_decay must be in (0,1]");
    detail::require(val_fraction > 0.0 && val_fraction < 1.0,
                    ErrorKind::kInvalidArgument, "val_fraction must be in (0,1)");
    detail::require(batch_size >= 1 && chunk_len >= 1,
                    ErrorKind::kInvalidArgument, "batch and chunk sizes must be >= 1");
  }
};

/// Exponentially decaying learning rate with a floor; epochs count from 1.
inline double lr_at(int epoch, const TrainConfig& cfg = {}) {
  detail::require(epoch >= 1, ErrorKind::kInvalidArgument, "epoch must be >= 1");
  return std::max(cfg.lr0 * std::pow(cfg.lr_decay, epoch - 1), cfg.lr_floor);
}

/// One utterance of training data.
struct TrainRecord {
  FeatureMatrix features;
  MaskMatrix target;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // squared error per frame, averaged over the epoch
  double val_loss = 0.0;    // squared error per frame on the validation split
};

template <typename T>
struct TrainResult {
  NetworkParams<T> params;  // snapshot with the lowest validation loss
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

namespace detail {

template <typename T>
struct Sequence {
  Mat<T> x;
  Mat<T> y;
};

template <typename T>
double sequence_loss(const NetworkParams<T>& params, const Sequence<T>& s) {
  RecurrentState<T> st;
  const Mat<T> out = forward_sequence<T>(params, s.x, st, nullptr);
  return static_cast<double>((out - s.y).template cast<double>().squaredNorm());
}

// The step uses the gradient averaged over every output element of the
// batch (frames x bins), i.e. the mean-squared-error scaling; with the raw
// summed gradient a rate of 0.4 is 129 times too large and diverges.
template <typename T>
void sgd_step(NetworkParams<T>& params, NetworkParams<T>& grads, double lr,
              double frames) {
  const T step = static_cast<T>(lr / (frames * params.output_dim()));
  for (std::size_t j = 0; j < params.layers.size(); ++j) {
    auto& p = params.layers[j];
    auto& g = grads.layers[j];
    p.weights -= step * g.weights;
    p.recurrent -= step * g.recurrent;
    p.bias -= step * g.bias;
    g.weights.setZero();
    g.recurrent.setZero();
    g.bias.setZero();
  }
}

}  // namespace detail

/// Minibatch SGD on the summed squared mask error (gradient averaged over
/// the frames and bins of a batch). Feed-forward nets draw batches of frames;
/// recurrent nets draw batches of chunk_len-frame chunks, carrying state
/// across the chunks of an utterance. Returns the snapshot with the lowest
/// validation loss.
template <typename T>
TrainResult<T> train(NetworkParams<T> params,
                     const std::vector<TrainRecord>& data,
                     const TrainConfig& cfg,
                     const std::function<void(const EpochStats&)>& on_epoch = {}) {
  cfg.validate();
  detail::require(data.size() >= 2, ErrorKind::kInvalidArgument,
                  "training needs at least two utterances");
  for (const auto& r : data) {
    detail::require(r.features.dim() == params.input_dim() &&
                        r.target.cols() == params.output_dim() &&
                        r.target.rows() == r.features.num_frames(),
                    ErrorKind::kInvalidArgument,
                    "training record dims do not match the network");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.val_fraction * data.size())), 1,
      data.size() - 1);

  std::vector<detail::Sequence<T>> train_seqs, val_seqs;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = data[order[i]];
    if (r.features.num_frames() == 0) continue;
    detail::Sequence<T> s{r.features.rows.template cast<T>(),
                          r.target.template cast<T>()};
    (i < n_val ? val_seqs : train_seqs).push_back(std::move(s));
  }
  detail::require(!train_seqs.empty() && !val_seqs.empty(),
                  ErrorKind::kInvalidArgument,
                  "training or validation split has no frames");

  double val_frames = 0;
  for (const auto& s : val_seqs) val_frames += static_cast<double>(s.x.rows());
  auto validation_loss = [&](const NetworkParams<T>& p) {
    double total = 0;
    for (const auto& s : val_seqs) total += detail::sequence_loss(p, s);
    return total / val_frames;
  };

  TrainResult<T> result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  NetworkParams<T> grads = detail::zeros_like(params);
  const bool rec = params.recurrent();

  // Frame pool for feed-forward training.
  Mat<T> pool_x, pool_y;
  if (!rec) {
    Eigen::Index total = 0;
    for (const auto& s : train_seqs) total += s.x.rows();
    pool_x.resize(total, params.input_dim());
    pool_y.resize(total, params.output_dim());
    Eigen::Index at = 0;
    for (const auto& s : train_seqs) {
      pool_x.middleRows(at, s.x.rows()) = s.x;
      pool_y.middleRows(at, s.y.rows()) = s.y;
      at += s.x.rows();
    }
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    double epoch_loss = 0;
    double epoch_frames = 0;

    if (!rec) {
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool_x.rows()));
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      Mat<T> bx, by;
      for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
        const std::size_t n = std::min<std::size_t>(cfg.batch_size, idx.size() - start);
        bx.resize(static_cast<Eigen::Index>(n), pool_x.cols());
        by.resize(static_cast<Eigen::Index>(n), pool_y.cols());
        for (std::size_t r = 0; r < n; ++r) {
          bx.row(static_cast<Eigen::Index>(r)) = pool_x.row(idx[start + r]);
          by.row(static_cast<Eigen::Index>(r)) = pool_y.row(idx[start + r]);
        }
        epoch_loss += static_cast<double>(loss_and_gradient(params, bx, by, grads));
        epoch_frames += static_cast<double>(n);
        detail::sgd_step(params, grads, lr, static_cast<double>(n));
      }
    } else {
      std::vector<std::size_t> seq_order(train_seqs.size());
      std::iota(seq_order.begin(), seq_order.end(), 0);
      std::shuffle(seq_order.begin(), seq_order.end(), rng);
      int chunks = 0;
      double batch_frames = 0;
      for (std::size_t si : seq_order) {
        const auto& s = train_seqs[si];
        RecurrentState<T> state;
        for (Eigen::Index start = 0; start < s.x.rows(); start += cfg.chunk_len) {
          const Eigen::Index n = std::min<Eigen::Index>(cfg.chunk_len, s.x.rows() - start);
          epoch_loss += static_cast<double>(loss_and_gradient(
              params, Mat<T>(s.x.middleRows(start, n)),
              Mat<T>(s.y.middleRows(start, n)), grads, &state));
          batch_frames += static_cast<double>(n);
          epoch_frames += static_cast<double>(n);
          if (++chunks == cfg.batch_size) {
            detail::sgd_step(params, grads, lr, batch_frames);
            chunks = 0;
            batch_frames = 0;
          }
        }
      }
      if (chunks > 0) detail::sgd_step(params, grads, lr, batch_frames);
    }

    EpochStats stats{epoch, lr, epoch_loss / epoch_frames, validation_loss(params)};
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      throw Error(ErrorKind::kNumeric,
                  "non-finite loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (stats.val_loss < best) {
      best = stats.val_loss;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace snrmask
