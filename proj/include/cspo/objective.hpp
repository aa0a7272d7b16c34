#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cspo/component.hpp"

namespace cspo {

/// Weights and constants of the objective. Defaults: w_global = 3 and
/// w_c = 1 for every rewarded component, eps_norm = 1e-4, eps_clip = 0.2,
/// beta = 0.01, G = 8.
struct CspoConfig {
  PerComponent<double> component_weights{1, 1, 1, 1, 1, 1, 1};
  double global_weight = 3.0;
  double eps_norm = 1e-4;
  double eps_clip = 0.2;
  double beta = 0.01;
  std::size_t group_size = 8;
  /// Raise EmptyComponentSpan instead of dropping the term.
  bool strict_empty_spans = false;

  /// Throws Error(kConfig) on a violated invariant.
  void validate() const;

  /// Same config with every rewarded component weight zeroed, i.e. GRPO.
  CspoConfig global_only() const;
};

/// One sampled sequence with everything the objective needs.
struct Rollout {
  std::vector<ComponentKind> membership;  // per token; never kGlobal
  PerComponent<double> rewards{};         // R_c
  double global_reward = 0.0;             // R_TEDS + R_cmp
  std::vector<double> old_logprobs;       // per token, may be empty

  std::size_t length() const noexcept { return membership.size(); }
  std::size_t count(ComponentKind kind) const noexcept;
};

struct RolloutGroup {
  std::string prompt_id;
  std::vector<Rollout> rollouts;

  std::size_t size() const noexcept { return rollouts.size(); }
};

/// Dropped (component, rollout) pairs: nonzero weight and advantage but no
/// tokens to carry them.
struct EmptySpanEvent {
  ComponentKind component;
  std::size_t rollout;
};

struct AdvantageSet {
  /// [component index 0..8][rollout]; index 8 is the global pseudo-component.
  std::array<std::vector<double>, kNumKinds> component;
  /// [rollout][token]
  std::vector<std::vector<double>> token;
  std::vector<EmptySpanEvent> dropped;

  double of(ComponentKind kind, std::size_t rollout) const {
    return component[index_of(kind)][rollout];
  }
};

/// (R - mean) / (population std + eps). Throws Error(kGroupTooSmall) for
/// fewer than two rewards.
std::vector<double> normalize_group(std::span<const double> rewards, double eps_norm);

/// A_c for every token in `kind`, zero elsewhere. kGlobal covers every token.
std::vector<double> mask_token_advantages(double advantage, std::span<const ComponentKind> membership,
                                          ComponentKind kind);

/// Normalizes every component over the group and aggregates per token:
/// A_t = sum_c (|y| / |y_c|) w_c A_c [t in c], global term included.
/// Components with weight > 0, nonzero advantage and no tokens are dropped
/// for that rollout and reported in `dropped`.
AdvantageSet compute_advantages(const RolloutGroup& group, const CspoConfig& config);

/// Aggregation alone, for callers that already hold A_c per rollout.
/// `component_advantages` is indexed like AdvantageSet::component.
std::vector<double> aggregate_token_advantage(
    std::span<const ComponentKind> membership,
    const std::array<double, kNumKinds>& component_advantages, const CspoConfig& config,
    std::vector<ComponentKind>* dropped = nullptr);

/// Advantages where all rewards are collapsed into one weighted scalar per
/// rollout before normalization; every token of a rollout shares it.
AdvantageSet compute_collapsed_advantages(const RolloutGroup& group, const CspoConfig& config);

/// Plain GRPO: normalized global reward times w_global on every token.
AdvantageSet compute_grpo_advantages(const RolloutGroup& group, const CspoConfig& config);

/// min(rho A, clip(rho, 1-eps, 1+eps) A).
double clipped_term(double ratio, double advantage, double eps_clip) noexcept;

/// (1/G) sum_g (1/|y_g|) sum_t clipped_term(rho_gt, A_gt).
double clipped_surrogate(const std::vector<std::vector<double>>& ratios,
                         const std::vector<std::vector<double>>& token_advantages, double eps_clip);

/// sum_c w_c L_c where L_c averages clipped terms of the masked advantage
/// over the component's own tokens; the global term uses every token.
double component_sum_loss(const RolloutGroup& group, const AdvantageSet& advantages,
                          const std::vector<std::vector<double>>& ratios, const CspoConfig& config);

/// k3 estimator r - 1 - ln r with r = pi_ref / pi_theta per sampled token,
/// averaged per rollout then over rollouts.
double kl_penalty(const std::vector<std::vector<double>>& current_logprobs,
                  const std::vector<std::vector<double>>& reference_logprobs);

struct ObjectiveResult {
  double objective = 0.0;  // surrogate - beta * kl
  double surrogate = 0.0;
  double kl = 0.0;
  AdvantageSet advantages;
};

enum class AdvantageMode { kCspo, kGrpo, kCollapsed };

/// Full objective. Ratios come from current vs old log-probs; empty
/// `current_logprobs` means the current policy is the old one (rho = 1).
/// Empty `reference_logprobs` means no KL term.
ObjectiveResult cspo_objective(const RolloutGroup& group, const CspoConfig& config,
                               const std::vector<std::vector<double>>& current_logprobs = {},
                               const std::vector<std::vector<double>>& reference_logprobs = {},
                               AdvantageMode mode = AdvantageMode::kCspo);

/// Ratios exp(current - old) per token; all ones when `current` is empty.
std::vector<std::vector<double>> importance_ratios(const RolloutGroup& group,
                                                   const std::vector<std::vector<double>>& current);

/// Advantage dump JSON: per rollout "A_component" keyed by kind and
/// "A_token", in a fixed field order.
std::string advantage_dump_json(const AdvantageSet& advantages);

}  // namespace cspo
