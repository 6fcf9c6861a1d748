#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latticeforge/error.hpp"
#include "latticeforge/random.hpp"
#include "latticeforge/tileset.hpp"

namespace latticeforge {

/// Fully connected layer, weights stored row-major as [out][in].
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// tanh on every hidden layer, identity on the last.
struct Mlp {
  std::vector<DenseLayer> layers;

  int input_size() const { return layers.front().in; }
  int output_size() const { return layers.back().out; }

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

struct PolicyParams {
  int obs_dim = 0;
  int n_actions = 0;
  int hidden = 64;
  Mlp policy_net;
  Mlp value_net;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

namespace detail {

inline Mlp make_mlp(const std::vector<int>& sizes, Rng& rng) {
  Mlp net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    layer.weight.resize(static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out));
    layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double& w : layer.weight) w = (2.0 * uniform01(rng) - 1.0) * bound;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline Mlp zeros_like(const Mlp& net) {
  Mlp z = net;
  for (auto& l : z.layers) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return z;
}

/// Activations of every layer; acts[0] is the input.
struct Trace {
  std::vector<std::vector<double>> acts;
};

inline void forward(const Mlp& net, std::span<const double> x, Trace& trace) {
  trace.acts.resize(net.layers.size() + 1);
  trace.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& layer = net.layers[l];
    const auto& in = trace.acts[l];
    auto& out = trace.acts[l + 1];
    out.assign(layer.bias.begin(), layer.bias.end());
    for (int o = 0; o < layer.out; ++o) {
      const double* w = &layer.weight[static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in)];
      double s = 0.0;
      for (int i = 0; i < layer.in; ++i) s += w[i] * in[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(o)] += s;
    }
    if (l + 1 < net.layers.size())
      for (double& v : out) v = std::tanh(v);
  }
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
inline void backward(const Mlp& net, const Trace& trace, std::vector<double> delta, Mlp& grad) {
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const DenseLayer& layer = net.layers[l];
    DenseLayer& g = grad.layers[l];
    const auto& in = trace.acts[l];
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      g.bias[static_cast<std::size_t>(o)] += d;
      double* gw = &g.weight[static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in)];
      for (int i = 0; i < layer.in; ++i) gw[i] += d * in[static_cast<std::size_t>(i)];
    }
    if (l == 0) break;
    std::vector<double> prev(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      const double* w = &layer.weight[static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in)];
      for (int i = 0; i < layer.in; ++i) prev[static_cast<std::size_t>(i)] += d * w[i];
    }
    // Input of layer l is tanh output of layer l-1.
    for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= 1.0 - in[i] * in[i];
    delta = std::move(prev);
  }
}

inline void check_input(const PolicyParams& p, std::size_t obs_size) {
  if (obs_size != static_cast<std::size_t>(p.obs_dim))
    throw Error(ErrorCode::DimensionMismatch,
                "observation has " + std::to_string(obs_size) + " features, network expects " + std::to_string(p.obs_dim));
}

}  // namespace detail

inline PolicyParams init_params(int obs_dim, int n_actions, int hidden, std::uint64_t seed) {
  if (obs_dim < 1 || n_actions < 1 || hidden < 1 || n_actions > kMaxTiles)
    throw Error(ErrorCode::BadArchitecture, "network sizes must be positive (and at most 64 actions)");
  PolicyParams p;
  p.obs_dim = obs_dim;
  p.n_actions = n_actions;
  p.hidden = hidden;
  Rng rng = derive_rng(seed);
  p.policy_net = detail::make_mlp({obs_dim, hidden, hidden, n_actions}, rng);
  p.value_net = detail::make_mlp({obs_dim, hidden, hidden, 1}, rng);
  return p;
}

inline PolicyParams zeros_like(const PolicyParams& p) {
  PolicyParams z = p;
  z.policy_net = detail::zeros_like(p.policy_net);
  z.value_net = detail::zeros_like(p.value_net);
  return z;
}

/// Every parameter array in declaration order: policy layers (weight, bias)
/// then value layers (weight, bias).
inline std::vector<std::span<double>> parameter_blocks(PolicyParams& p) {
  std::vector<std::span<double>> out;
  for (Mlp* net : {&p.policy_net, &p.value_net})
    for (auto& l : net->layers) {
      out.emplace_back(l.weight);
      out.emplace_back(l.bias);
    }
  return out;
}

inline std::size_t parameter_count(const PolicyParams& p) {
  std::size_t n = 0;
  for (const Mlp* net : {&p.policy_net, &p.value_net})
    for (const auto& l : net->layers) n += l.weight.size() + l.bias.size();
  return n;
}

struct MaskedDistribution {
  std::vector<double> probs;
  std::vector<std::uint8_t> mask;
  /// ln probs, -inf where masked out.
  std::vector<double> logprobs;
};

/// Softmax over the mask-valid logits; masked entries act as -inf logits.
inline MaskedDistribution masked_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  if (logits.size() != mask.size()) throw Error(ErrorCode::DimensionMismatch, "mask length differs from action count");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < logits.size(); ++a)
    if (mask[a]) top = std::max(top, logits[a]);
  if (top == -std::numeric_limits<double>::infinity()) throw Error(ErrorCode::EmptyMask, "no action is mask-valid");
  double sum = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a)
    if (mask[a]) sum += std::exp(logits[a] - top);
  const double log_sum = std::log(sum);
  MaskedDistribution d;
  d.mask.assign(mask.begin(), mask.end());
  d.probs.assign(logits.size(), 0.0);
  d.logprobs.assign(logits.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < logits.size(); ++a)
    if (mask[a]) {
      d.logprobs[a] = logits[a] - top - log_sum;
      d.probs[a] = std::exp(d.logprobs[a]);
    }
  return d;
}

inline std::vector<double> policy_logits(const PolicyParams& params, std::span<const double> obs) {
  detail::check_input(params, obs.size());
  detail::Trace t;
  detail::forward(params.policy_net, obs, t);
  return std::move(t.acts.back());
}

inline MaskedDistribution policy_forward(const PolicyParams& params, std::span<const double> obs,
                                         std::span<const std::uint8_t> mask) {
  if (mask.size() != static_cast<std::size_t>(params.n_actions))
    throw Error(ErrorCode::DimensionMismatch, "mask length differs from action count");
  auto logits = policy_logits(params, obs);
  return masked_softmax(logits, mask);
}

inline double value_forward(const PolicyParams& params, std::span<const double> obs) {
  detail::check_input(params, obs.size());
  detail::Trace t;
  detail::forward(params.value_net, obs, t);
  return t.acts.back()[0];
}

struct SampledAction {
  TileId action = 0;
  double logprob = 0.0;
};

inline SampledAction sample_action(const MaskedDistribution& dist, Rng& rng) {
  double r = uniform01(rng);
  std::size_t last = dist.probs.size();
  for (std::size_t a = 0; a < dist.probs.size(); ++a) {
    if (!dist.mask[a] || dist.probs[a] == 0.0) continue;
    last = a;
    r -= dist.probs[a];
    if (r < 0.0) return {static_cast<TileId>(a), dist.logprobs[a]};
  }
  // r survived the loop only through rounding; the last valid action absorbs it.
  if (last == dist.probs.size()) throw Error(ErrorCode::EmptyMask, "distribution has no support");
  return {static_cast<TileId>(last), dist.logprobs[last]};
}

inline SampledAction greedy_action(const MaskedDistribution& dist) {
  std::size_t best = dist.probs.size();
  for (std::size_t a = 0; a < dist.probs.size(); ++a)
    if (dist.mask[a] && (best == dist.probs.size() || dist.probs[a] > dist.probs[best])) best = a;
  if (best == dist.probs.size()) throw Error(ErrorCode::EmptyMask, "distribution has no support");
  return {static_cast<TileId>(best), dist.logprobs[best]};
}

inline double entropy(const MaskedDistribution& dist) {
  double h = 0.0;
  for (std::size_t a = 0; a < dist.probs.size(); ++a)
    if (dist.mask[a] && dist.probs[a] > 0.0) h -= dist.probs[a] * dist.logprobs[a];
  return h;
}

// ---------------------------------------------------------------------------
// Clipped-surrogate loss and its exact gradient

struct LossSpec {
  double clip_eps = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

/// One row of a minibatch. Spans must outlive the call.
struct Sample {
  std::span<const double> obs;
  std::span<const std::uint8_t> mask;
  TileId action = 0;
  double old_logprob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct LossStats {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// L = -mean(min(rho*A, clip(rho, 1-eps, 1+eps)*A))
///     + value_coef * mean((V - R)^2) - entropy_coef * mean(H(pi)),
/// rho = exp(logprob - old_logprob). When `grad` is non-null the exact
/// gradient of L is accumulated into it (it must be shaped like `params`).
inline LossStats ppo_loss(const PolicyParams& params, std::span<const Sample> batch, const LossSpec& spec,
                          PolicyParams* grad = nullptr) {
  LossStats stats;
  if (batch.empty()) return stats;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  detail::Trace ptrace;
  detail::Trace vtrace;
  std::vector<double> dlogits(static_cast<std::size_t>(params.n_actions));
  for (const Sample& s : batch) {
    detail::check_input(params, s.obs.size());
    if (s.mask.size() != static_cast<std::size_t>(params.n_actions))
      throw Error(ErrorCode::DimensionMismatch, "mask length differs from action count");
    if (s.action < 0 || s.action >= params.n_actions || !s.mask[static_cast<std::size_t>(s.action)])
      throw Error(ErrorCode::IllegalAction, "stored action is masked out");

    detail::forward(params.policy_net, s.obs, ptrace);
    detail::forward(params.value_net, s.obs, vtrace);
    const MaskedDistribution dist = masked_softmax(ptrace.acts.back(), s.mask);
    const double logp = dist.logprobs[static_cast<std::size_t>(s.action)];
    const double ratio = std::exp(logp - s.old_logprob);
    const double clipped = std::clamp(ratio, 1.0 - spec.clip_eps, 1.0 + spec.clip_eps);
    const double surr1 = ratio * s.advantage;
    const double surr2 = clipped * s.advantage;
    const bool unclipped_branch = surr1 <= surr2;
    const double h = entropy(dist);
    const double v = vtrace.acts.back()[0];

    stats.policy_loss -= std::min(surr1, surr2) * inv_n;
    stats.value_loss += (v - s.ret) * (v - s.ret) * inv_n;
    stats.entropy += h * inv_n;
    stats.approx_kl += (s.old_logprob - logp) * inv_n;
    if (std::abs(ratio - 1.0) > spec.clip_eps) stats.clip_fraction += inv_n;

    if (!grad) continue;
    // d/dlogp of the surrogate term; zero once the clipped branch is selected.
    const double g_logp = unclipped_branch ? -surr1 * inv_n : 0.0;
    for (std::size_t j = 0; j < dlogits.size(); ++j) {
      if (!s.mask[j]) {
        dlogits[j] = 0.0;
        continue;
      }
      const double p = dist.probs[j];
      const double indicator = j == static_cast<std::size_t>(s.action) ? 1.0 : 0.0;
      // dH/dz_j = -p_j (ln p_j + H)
      dlogits[j] = g_logp * (indicator - p) + spec.entropy_coef * inv_n * p * (dist.logprobs[j] + h);
    }
    detail::backward(params.policy_net, ptrace, dlogits, grad->policy_net);
    detail::backward(params.value_net, vtrace, {2.0 * spec.value_coef * (v - s.ret) * inv_n}, grad->value_net);
  }
  stats.total = stats.policy_loss + spec.value_coef * stats.value_loss - spec.entropy_coef * stats.entropy;
  return stats;
}

inline PolicyParams gradients(const PolicyParams& params, std::span<const Sample> batch, const LossSpec& spec) {
  PolicyParams grad = zeros_like(params);
  ppo_loss(params, batch, spec, &grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Checkpoint documents

namespace detail {

inline nlohmann::json mlp_to_json(const Mlp& net) {
  auto layers = nlohmann::json::array();
  for (const auto& l : net.layers)
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}});
  return layers;
}

inline Mlp mlp_from_json(const nlohmann::json& doc, const std::vector<int>& sizes) {
  if (!doc.is_array() || doc.size() + 1 != sizes.size())
    throw Error(ErrorCode::MalformedDocument, "checkpoint layer list does not match the architecture");
  Mlp net;
  for (std::size_t l = 0; l < doc.size(); ++l) {
    DenseLayer layer;
    try {
      layer.in = doc[l].at("in").get<int>();
      layer.out = doc[l].at("out").get<int>();
      layer.weight = doc[l].at("weight").get<std::vector<double>>();
      layer.bias = doc[l].at("bias").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedDocument, std::string("checkpoint layer: ") + e.what());
    }
    if (layer.in != sizes[l] || layer.out != sizes[l + 1] ||
        layer.weight.size() != static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out) ||
        layer.bias.size() != static_cast<std::size_t>(layer.out))
      throw Error(ErrorCode::MalformedDocument, "checkpoint layer shape does not match the architecture");
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace detail

inline nlohmann::json params_to_json(const PolicyParams& p, std::uint64_t step = 0) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["architecture"] = {{"obs_dim", p.obs_dim}, {"hidden", p.hidden}, {"n_actions", p.n_actions}};
  doc["policy_net"] = detail::mlp_to_json(p.policy_net);
  doc["value_net"] = detail::mlp_to_json(p.value_net);
  doc["step"] = step;
  return doc;
}

inline PolicyParams params_from_json(const nlohmann::json& doc, std::uint64_t* step = nullptr) {
  PolicyParams p;
  try {
    if (doc.at("version").get<int>() != 1) throw Error(ErrorCode::MalformedDocument, "unsupported checkpoint version");
    const auto& arch = doc.at("architecture");
    p.obs_dim = arch.at("obs_dim").get<int>();
    p.hidden = arch.at("hidden").get<int>();
    p.n_actions = arch.at("n_actions").get<int>();
    if (step) *step = doc.value("step", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("checkpoint: ") + e.what());
  }
  if (p.obs_dim < 1 || p.hidden < 1 || p.n_actions < 1)
    throw Error(ErrorCode::BadArchitecture, "checkpoint architecture must be positive");
  p.policy_net = detail::mlp_from_json(doc.at("policy_net"), {p.obs_dim, p.hidden, p.hidden, p.n_actions});
  p.value_net = detail::mlp_from_json(doc.at("value_net"), {p.obs_dim, p.hidden, p.hidden, 1});
  return p;
}

}  // namespace latticeforge
