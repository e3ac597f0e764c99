#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "stackrl/game.hpp"
#include "stackrl/mlp.hpp"
#include "stackrl/pomdp.hpp"

namespace stackrl {

/// Per-episode memoization of observation key -> chosen action. Repeated
/// observations within one long episode always replay the stored action,
/// which removes policy noise from the followers' learning signal.
class ObservationActionCache {
 public:
  const std::vector<int>* find(std::uint64_t key) const;
  void store(std::uint64_t key, std::vector<int> action);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::uint64_t, std::vector<int>> entries_;
};

enum class PolicyArch { tabular, mlp };

/// The leader's parametric policy: independent masked softmax heads, one per
/// action dimension, scored either by a per-observation logit table or by a
/// one-hidden-layer network over the observation features. Implements the
/// episode runner's PolicyHandle including the per-episode cache.
class LeaderPolicy : public PolicyHandle {
 public:
  LeaderPolicy() = default;
  LeaderPolicy(const BayesianGame& game, PolicyArch arch, int hidden_width = 64,
               std::uint64_t init_seed = 0);

  void begin_episode() override;
  PolicyDecision act(const Observation& obs,
                     const std::vector<std::vector<std::uint8_t>>& masks,
                     ActMode mode, Rng& rng) override;

  /// Per-dimension probability vectors under the given masks.
  std::vector<std::vector<double>> action_probs(
      const Observation& obs,
      const std::vector<std::vector<std::uint8_t>>& masks) const;

  double logprob(const Observation& obs,
                 const std::vector<std::vector<std::uint8_t>>& masks,
                 const std::vector<int>& action) const;

  /// Sum of per-dimension entropies under the masks.
  double entropy(const Observation& obs,
                 const std::vector<std::vector<std::uint8_t>>& masks) const;

  /// grad += coef * d log pi(action | obs) / d params.
  void accumulate_logprob_gradient(
      const Observation& obs,
      const std::vector<std::vector<std::uint8_t>>& masks,
      const std::vector<int>& action, double coef,
      std::vector<double>& grad) const;

  /// grad += coef * d entropy(obs) / d params.
  void accumulate_entropy_gradient(
      const Observation& obs,
      const std::vector<std::vector<std::uint8_t>>& masks, double coef,
      std::vector<double>& grad) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  PolicyArch arch() const { return arch_; }
  const std::vector<int>& action_dims() const { return dims_; }
  const ObservationActionCache& cache() const { return cache_; }

 private:
  std::vector<double> logits_for(const Observation& obs,
                                 std::vector<double>& hidden_buf) const;
  void accumulate_dlogits(const Observation& obs,
                          const std::vector<double>& dlogits,
                          std::vector<double>& grad) const;

  const BayesianGame* game_ = nullptr;
  PolicyArch arch_ = PolicyArch::tabular;
  std::vector<int> dims_;
  int dim_total_ = 0;
  int key_space_ = 0;
  MlpShape shape_;
  std::vector<double> params_;
  ObservationActionCache cache_;
};

}  // namespace stackrl
