#include "stackrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stackrl {

const std::vector<int>* ObservationActionCache::find(std::uint64_t key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void ObservationActionCache::store(std::uint64_t key, std::vector<int> action) {
  entries_[key] = std::move(action);
}

LeaderPolicy::LeaderPolicy(const BayesianGame& game, PolicyArch arch,
                           int hidden_width, std::uint64_t init_seed)
    : game_(&game), arch_(arch) {
  dims_ = leader_action_dims(game);
  for (int levels : dims_) dim_total_ += levels;
  key_space_ = observation_key_space(game);
  if (arch_ == PolicyArch::tabular) {
    params_.assign(static_cast<std::size_t>(key_space_) * dim_total_, 0.0);
  } else {
    if (hidden_width < 1)
      throw std::invalid_argument("LeaderPolicy: hidden width must be positive");
    shape_ = MlpShape{observation_feature_dim(game), hidden_width, dim_total_};
    mlp_init(shape_, params_, init_seed);
  }
}

void LeaderPolicy::begin_episode() { cache_.clear(); }

std::vector<double> LeaderPolicy::logits_for(
    const Observation& obs, std::vector<double>& hidden_buf) const {
  if (arch_ == PolicyArch::tabular) {
    if (obs.key >= static_cast<std::uint64_t>(key_space_))
      throw std::out_of_range("LeaderPolicy: observation key out of table");
    auto begin = params_.begin() +
                 static_cast<std::ptrdiff_t>(obs.key) * dim_total_;
    return std::vector<double>(begin, begin + dim_total_);
  }
  std::vector<double> out;
  mlp_forward(shape_, params_, obs.features.data(), hidden_buf, out);
  return out;
}

namespace {

/// Masked softmax of one logit block; disallowed levels get probability 0.
std::vector<double> masked_softmax(const double* logits,
                                   const std::vector<std::uint8_t>& mask) {
  std::size_t n = mask.size();
  double best = -1e300;
  for (std::size_t k = 0; k < n; ++k)
    if (mask[k] && logits[k] > best) best = logits[k];
  std::vector<double> probs(n, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!mask[k]) continue;
    probs[k] = std::exp(logits[k] - best);
    total += probs[k];
  }
  if (total <= 0.0)
    throw std::invalid_argument("masked_softmax: no action is allowed");
  for (double& p : probs) p /= total;
  return probs;
}

}  // namespace

std::vector<std::vector<double>> LeaderPolicy::action_probs(
    const Observation& obs,
    const std::vector<std::vector<std::uint8_t>>& masks) const {
  std::vector<double> hidden;
  auto logits = logits_for(obs, hidden);
  std::vector<std::vector<double>> probs;
  probs.reserve(dims_.size());
  int offset = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    probs.push_back(masked_softmax(logits.data() + offset, masks[d]));
    offset += dims_[d];
  }
  return probs;
}

double LeaderPolicy::logprob(const Observation& obs,
                             const std::vector<std::vector<std::uint8_t>>& masks,
                             const std::vector<int>& action) const {
  auto probs = action_probs(obs, masks);
  double lp = 0.0;
  for (std::size_t d = 0; d < probs.size(); ++d) {
    double p = probs[d][static_cast<std::size_t>(action[d])];
    if (p <= 0.0)
      throw std::runtime_error("LeaderPolicy: log-probability of a masked action");
    lp += std::log(p);
  }
  return lp;
}

double LeaderPolicy::entropy(
    const Observation& obs,
    const std::vector<std::vector<std::uint8_t>>& masks) const {
  auto probs = action_probs(obs, masks);
  double h = 0.0;
  for (const auto& dim : probs)
    for (double p : dim)
      if (p > 0.0) h -= p * std::log(p);
  return h;
}

PolicyDecision LeaderPolicy::act(
    const Observation& obs, const std::vector<std::vector<std::uint8_t>>& masks,
    ActMode mode, Rng& rng) {
  PolicyDecision decision;
  if (const std::vector<int>* cached = cache_.find(obs.key)) {
    decision.action = *cached;
    decision.first_use = false;
    return decision;
  }
  auto probs = action_probs(obs, masks);
  decision.action.resize(dims_.size());
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    int chosen;
    if (mode == ActMode::greedy) {
      chosen = 0;
      double best = -1.0;
      for (std::size_t k = 0; k < probs[d].size(); ++k)
        if (probs[d][k] > best) {
          best = probs[d][k];
          chosen = static_cast<int>(k);
        }
    } else {
      chosen = rng.categorical(probs[d]);
    }
    decision.action[static_cast<std::size_t>(d)] = chosen;
    decision.logprob += std::log(probs[d][static_cast<std::size_t>(chosen)]);
  }
  decision.first_use = true;
  cache_.store(obs.key, decision.action);
  return decision;
}

void LeaderPolicy::accumulate_dlogits(const Observation& obs,
                                      const std::vector<double>& dlogits,
                                      std::vector<double>& grad) const {
  if (arch_ == PolicyArch::tabular) {
    std::size_t base = static_cast<std::size_t>(obs.key) *
                       static_cast<std::size_t>(dim_total_);
    for (int j = 0; j < dim_total_; ++j)
      grad[base + static_cast<std::size_t>(j)] +=
          dlogits[static_cast<std::size_t>(j)];
    return;
  }
  std::vector<double> hidden;
  std::vector<double> out;
  mlp_forward(shape_, params_, obs.features.data(), hidden, out);
  mlp_backward(shape_, params_, obs.features.data(), hidden, dlogits, grad);
}

void LeaderPolicy::accumulate_logprob_gradient(
    const Observation& obs, const std::vector<std::vector<std::uint8_t>>& masks,
    const std::vector<int>& action, double coef,
    std::vector<double>& grad) const {
  if (grad.size() != params_.size())
    throw std::invalid_argument("logprob gradient: buffer size mismatch");
  auto probs = action_probs(obs, masks);
  std::vector<double> dlogits(static_cast<std::size_t>(dim_total_), 0.0);
  int offset = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    for (int k = 0; k < dims_[d]; ++k) {
      double indicator = (k == action[d]) ? 1.0 : 0.0;
      dlogits[static_cast<std::size_t>(offset + k)] =
          coef * (indicator - probs[d][static_cast<std::size_t>(k)]);
    }
    offset += dims_[d];
  }
  accumulate_dlogits(obs, dlogits, grad);
}

void LeaderPolicy::accumulate_entropy_gradient(
    const Observation& obs, const std::vector<std::vector<std::uint8_t>>& masks,
    double coef, std::vector<double>& grad) const {
  if (grad.size() != params_.size())
    throw std::invalid_argument("entropy gradient: buffer size mismatch");
  auto probs = action_probs(obs, masks);
  std::vector<double> dlogits(static_cast<std::size_t>(dim_total_), 0.0);
  int offset = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    double h = 0.0;
    for (double p : probs[d])
      if (p > 0.0) h -= p * std::log(p);
    for (int k = 0; k < dims_[d]; ++k) {
      double p = probs[d][static_cast<std::size_t>(k)];
      if (p > 0.0)
        dlogits[static_cast<std::size_t>(offset + k)] =
            coef * (-p * (std::log(p) + h));
    }
    offset += dims_[d];
  }
  accumulate_dlogits(obs, dlogits, grad);
}

}  // namespace stackrl
