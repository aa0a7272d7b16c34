#include "cspo/objective.hpp"

#include <algorithm>
#include <cmath>

#include "cspo/error.hpp"
#include "json.hpp"

namespace cspo {
namespace {

void check_group(const RolloutGroup& group) {
  if (group.size() < 2) {
    throw Error(ErrorCode::kGroupTooSmall,
                "group of " + std::to_string(group.size()) + " rollouts; need at least 2");
  }
  for (std::size_t g = 0; g < group.size(); ++g) {
    const auto& r = group.rollouts[g];
    if (std::find(r.membership.begin(), r.membership.end(), ComponentKind::kGlobal) !=
        r.membership.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "rollout " + std::to_string(g) + " assigns a token to the global component");
    }
    if (!r.old_logprobs.empty() && r.old_logprobs.size() != r.length()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "rollout " + std::to_string(g) + " has mismatched old log-probs");
    }
  }
}

std::vector<double> column(const RolloutGroup& group, ComponentKind kind) {
  std::vector<double> out;
  out.reserve(group.size());
  for (const auto& r : group.rollouts) {
    out.push_back(kind == ComponentKind::kGlobal ? r.global_reward : r.rewards[index_of(kind)]);
  }
  return out;
}

double mean_over_rollouts(const std::vector<std::vector<double>>& per_token,
                          const std::vector<std::vector<double>>& weights_unused = {}) {
  (void)weights_unused;
  if (per_token.empty()) return 0.0;
  double total = 0.0;
  for (const auto& row : per_token) {
    if (row.empty()) continue;
    double s = 0.0;
    for (double v : row) s += v;
    total += s / static_cast<double>(row.size());
  }
  return total / static_cast<double>(per_token.size());
}

}  // namespace

void CspoConfig::validate() const {
  for (std::size_t c = 0; c < kNumRewarded; ++c) {
    if (!(component_weights[c] >= 0.0)) {
      throw Error(ErrorCode::kConfig, "weight for " +
                                          std::string(component_name(kRewardedComponents[c])) +
                                          " must be >= 0");
    }
  }
  if (!(global_weight >= 0.0)) throw Error(ErrorCode::kConfig, "w_global must be >= 0");
  if (!(eps_norm > 0.0)) throw Error(ErrorCode::kConfig, "eps_norm must be > 0");
  if (!(eps_clip > 0.0 && eps_clip < 1.0)) throw Error(ErrorCode::kConfig, "eps_clip must be in (0, 1)");
  if (!(beta >= 0.0)) throw Error(ErrorCode::kConfig, "beta must be >= 0");
  if (group_size < 2) throw Error(ErrorCode::kConfig, "group_size must be >= 2");
}

CspoConfig CspoConfig::global_only() const {
  CspoConfig c = *this;
  c.component_weights.fill(0.0);
  return c;
}

std::size_t Rollout::count(ComponentKind kind) const noexcept {
  if (kind == ComponentKind::kGlobal) return membership.size();
  return static_cast<std::size_t>(std::count(membership.begin(), membership.end(), kind));
}

std::vector<double> normalize_group(std::span<const double> rewards, double eps_norm) {
  if (rewards.size() < 2) {
    throw Error(ErrorCode::kGroupTooSmall,
                "normalization needs at least 2 rewards, got " + std::to_string(rewards.size()));
  }
  std::vector<double> out(rewards.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return out;
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sigma = std::sqrt(var / n);
  for (std::size_t g = 0; g < rewards.size(); ++g) out[g] = (rewards[g] - mean) / (sigma + eps_norm);
  return out;
}

std::vector<double> mask_token_advantages(double advantage, std::span<const ComponentKind> membership,
                                          ComponentKind kind) {
  std::vector<double> out(membership.size(), 0.0);
  for (std::size_t t = 0; t < membership.size(); ++t) {
    if (kind == ComponentKind::kGlobal || membership[t] == kind) out[t] = advantage;
  }
  return out;
}

std::vector<double> aggregate_token_advantage(std::span<const ComponentKind> membership,
                                              const std::array<double, kNumKinds>& component_advantages,
                                              const CspoConfig& config,
                                              std::vector<ComponentKind>* dropped) {
  const std::size_t length = membership.size();
  std::vector<double> out(length, 0.0);
  if (length == 0) return out;

  std::array<std::size_t, kNumTokenKinds> counts{};
  for (ComponentKind k : membership) ++counts[index_of(k)];

  for (ComponentKind c : kRewardedComponents) {
    const double w = config.component_weights[index_of(c)];
    const double a = component_advantages[index_of(c)];
    if (w == 0.0) continue;
    const std::size_t n = counts[index_of(c)];
    if (n == 0) {
      if (a != 0.0) {
        if (config.strict_empty_spans) {
          throw Error(ErrorCode::kEmptyComponentSpan,
                      "component " + std::string(component_name(c)) +
                          " has a nonzero advantage but no tokens");
        }
        if (dropped) dropped->push_back(c);
      }
      continue;
    }
    const double term = static_cast<double>(length) / static_cast<double>(n) * w * a;
    for (std::size_t t = 0; t < length; ++t) {
      if (membership[t] == c) out[t] += term;
    }
  }
  const double global = static_cast<double>(length) / static_cast<double>(length) *
                        config.global_weight * component_advantages[index_of(ComponentKind::kGlobal)];
  for (double& v : out) v += global;
  return out;
}

AdvantageSet compute_advantages(const RolloutGroup& group, const CspoConfig& config) {
  check_group(group);
  const std::size_t G = group.size();
  AdvantageSet set;
  for (ComponentKind c : kRewardedComponents) {
    set.component[index_of(c)] = normalize_group(column(group, c), config.eps_norm);
  }
  set.component[index_of(ComponentKind::kOther)].assign(G, 0.0);
  set.component[index_of(ComponentKind::kGlobal)] =
      normalize_group(column(group, ComponentKind::kGlobal), config.eps_norm);

  set.token.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    std::array<double, kNumKinds> a{};
    for (std::size_t k = 0; k < kNumKinds; ++k) a[k] = set.component[k][g];
    std::vector<ComponentKind> dropped;
    set.token[g] = aggregate_token_advantage(group.rollouts[g].membership, a, config, &dropped);
    for (ComponentKind c : dropped) set.dropped.push_back({c, g});
  }
  return set;
}

AdvantageSet compute_collapsed_advantages(const RolloutGroup& group, const CspoConfig& config) {
  check_group(group);
  const std::size_t G = group.size();
  std::vector<double> collapsed(G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    const auto& r = group.rollouts[g];
    double total = 0.0;
    for (std::size_t c = 0; c < kNumRewarded; ++c) total += config.component_weights[c] * r.rewards[c];
    collapsed[g] = total + config.global_weight * r.global_reward;
  }
  AdvantageSet set;
  for (auto& comp : set.component) comp.assign(G, 0.0);
  set.component[index_of(ComponentKind::kGlobal)] = normalize_group(collapsed, config.eps_norm);
  set.token.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    set.token[g].assign(group.rollouts[g].length(), set.component[index_of(ComponentKind::kGlobal)][g]);
  }
  return set;
}

AdvantageSet compute_grpo_advantages(const RolloutGroup& group, const CspoConfig& config) {
  check_group(group);
  const std::size_t G = group.size();
  AdvantageSet set;
  for (auto& comp : set.component) comp.assign(G, 0.0);
  const auto global = normalize_group(column(group, ComponentKind::kGlobal), config.eps_norm);
  set.component[index_of(ComponentKind::kGlobal)] = global;
  set.token.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    set.token[g].assign(group.rollouts[g].length(), config.global_weight * global[g]);
  }
  return set;
}

double clipped_term(double ratio, double advantage, double eps_clip) noexcept {
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate(const std::vector<std::vector<double>>& ratios,
                         const std::vector<std::vector<double>>& token_advantages, double eps_clip) {
  if (ratios.size() != token_advantages.size()) {
    throw Error(ErrorCode::kInvalidArgument, "ratio and advantage groups differ in size");
  }
  std::vector<std::vector<double>> terms(ratios.size());
  for (std::size_t g = 0; g < ratios.size(); ++g) {
    if (ratios[g].size() != token_advantages[g].size()) {
      throw Error(ErrorCode::kInvalidArgument, "ratio and advantage rows differ in length");
    }
    terms[g].resize(ratios[g].size());
    for (std::size_t t = 0; t < ratios[g].size(); ++t) {
      terms[g][t] = clipped_term(ratios[g][t], token_advantages[g][t], eps_clip);
    }
  }
  return mean_over_rollouts(terms);
}

double component_sum_loss(const RolloutGroup& group, const AdvantageSet& advantages,
                          const std::vector<std::vector<double>>& ratios, const CspoConfig& config) {
  const std::size_t G = group.size();
  double total = 0.0;
  for (std::size_t k = 0; k < kNumKinds; ++k) {
    const auto kind = static_cast<ComponentKind>(k);
    if (kind == ComponentKind::kOther) continue;
    const double w =
        kind == ComponentKind::kGlobal ? config.global_weight : config.component_weights[k];
    double loss = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      const auto& r = group.rollouts[g];
      const std::size_t n = r.count(kind);
      if (n == 0) continue;
      const auto masked = mask_token_advantages(advantages.component[k][g], r.membership, kind);
      double s = 0.0;
      for (std::size_t t = 0; t < r.length(); ++t) {
        if (kind == ComponentKind::kGlobal || r.membership[t] == kind) {
          s += clipped_term(ratios[g][t], masked[t], config.eps_clip);
        }
      }
      loss += s / static_cast<double>(n);
    }
    total += w * loss / static_cast<double>(G);
  }
  return total;
}

double kl_penalty(const std::vector<std::vector<double>>& current_logprobs,
                  const std::vector<std::vector<double>>& reference_logprobs) {
  if (current_logprobs.size() != reference_logprobs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "log-prob grids differ in size");
  }
  std::vector<std::vector<double>> k3(current_logprobs.size());
  for (std::size_t g = 0; g < current_logprobs.size(); ++g) {
    const auto& cur = current_logprobs[g];
    const auto& ref = reference_logprobs[g];
    if (cur.size() != ref.size()) throw Error(ErrorCode::kInvalidArgument, "log-prob rows differ in length");
    k3[g].resize(cur.size());
    for (std::size_t t = 0; t < cur.size(); ++t) {
      const double log_r = ref[t] - cur[t];
      k3[g][t] = std::expm1(log_r) - log_r;
    }
  }
  return mean_over_rollouts(k3);
}

std::vector<std::vector<double>> importance_ratios(const RolloutGroup& group,
                                                   const std::vector<std::vector<double>>& current) {
  std::vector<std::vector<double>> out(group.size());
  for (std::size_t g = 0; g < group.size(); ++g) {
    const auto& r = group.rollouts[g];
    if (current.empty()) {
      out[g].assign(r.length(), 1.0);
      continue;
    }
    if (current.size() != group.size() || current[g].size() != r.length() ||
        r.old_logprobs.size() != r.length()) {
      throw Error(ErrorCode::kInvalidArgument, "current and old log-probs must cover every token");
    }
    out[g].resize(r.length());
    for (std::size_t t = 0; t < r.length(); ++t) out[g][t] = std::exp(current[g][t] - r.old_logprobs[t]);
  }
  return out;
}

ObjectiveResult cspo_objective(const RolloutGroup& group, const CspoConfig& config,
                               const std::vector<std::vector<double>>& current_logprobs,
                               const std::vector<std::vector<double>>& reference_logprobs,
                               AdvantageMode mode) {
  config.validate();
  ObjectiveResult out;
  switch (mode) {
    case AdvantageMode::kCspo: out.advantages = compute_advantages(group, config); break;
    case AdvantageMode::kGrpo: out.advantages = compute_grpo_advantages(group, config); break;
    case AdvantageMode::kCollapsed: out.advantages = compute_collapsed_advantages(group, config); break;
  }
  const auto ratios = importance_ratios(group, current_logprobs);
  out.surrogate = clipped_surrogate(ratios, out.advantages.token, config.eps_clip);
  if (!reference_logprobs.empty()) {
    if (current_logprobs.empty()) {
      std::vector<std::vector<double>> old(group.size());
      for (std::size_t g = 0; g < group.size(); ++g) old[g] = group.rollouts[g].old_logprobs;
      out.kl = kl_penalty(old, reference_logprobs);
    } else {
      out.kl = kl_penalty(current_logprobs, reference_logprobs);
    }
  }
  out.objective = out.surrogate - config.beta * out.kl;
  return out;
}

std::string advantage_dump_json(const AdvantageSet& advantages) {
  using nlohmann::ordered_json;
  ordered_json root;
  auto rollouts = ordered_json::array();
  for (std::size_t g = 0; g < advantages.token.size(); ++g) {
    ordered_json r;
    ordered_json comp = ordered_json::object();
    for (ComponentKind k : kRewardedComponents) {
      comp[std::string(component_name(k))] = advantages.of(k, g);
    }
    comp["global"] = advantages.of(ComponentKind::kGlobal, g);
    r["A_component"] = std::move(comp);
    r["A_token"] = advantages.token[g];
    rollouts.push_back(std::move(r));
  }
  root["rollouts"] = std::move(rollouts);
  auto dropped = ordered_json::array();
  for (const auto& e : advantages.dropped) {
    dropped.push_back({{"component", std::string(component_name(e.component))}, {"rollout", e.rollout}});
  }
  root["dropped"] = std::move(dropped);
  return root.dump();
}

}  // namespace cspo
