#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cspo/objective.hpp"
#include "cspo/rewards.hpp"

namespace cspo {

enum class TaskKind { kStructure, kContent, kStyle, kMixed };
std::string_view task_name(TaskKind kind) noexcept;
std::optional<TaskKind> task_from_name(std::string_view name) noexcept;

enum class SimMode { kCspo, kGrpo, kCompSum };
std::string_view sim_mode_name(SimMode mode) noexcept;
std::optional<SimMode> sim_mode_from_name(std::string_view name) noexcept;

/// A position the initial policy tends to get wrong, and the token it
/// emits instead. Substituting the wrong token changes exactly one oracle
/// component.
struct ErrorSite {
  std::size_t position = 0;
  std::string wrong_token;
  ComponentKind component = ComponentKind::kStruct;
};

struct SyntheticTask {
  TaskKind kind = TaskKind::kStructure;
  std::vector<std::string> reference_tokens;
  std::vector<ErrorSite> errors;
  std::vector<std::string> vocab;  // reference tokens, wrong tokens, fillers

  std::string reference_source() const;
};

/// Fixed reference table covering all seven components, with error sites
/// chosen by `kind`.
SyntheticTask make_task(TaskKind kind);

/// Independent softmax per output position over a shared vocabulary.
struct ToyPolicy {
  std::vector<std::string> vocab;
  std::size_t length = 0;
  std::vector<double> logits;  // [position * vocab + token]

  std::size_t vocab_size() const noexcept { return vocab.size(); }
  double& logit(std::size_t t, std::size_t v) { return logits[t * vocab.size() + v]; }
  double logit(std::size_t t, std::size_t v) const { return logits[t * vocab.size() + v]; }
  std::vector<double> probs(std::size_t t) const;
  double logprob(std::size_t t, std::size_t v) const;
};

/// Reference token gets logit `confidence`; at error sites the wrong token
/// gets the logit that gives it probability `error_prob` against the
/// reference token.
ToyPolicy initial_policy(const SyntheticTask& task, double error_prob = 0.5, double confidence = 14.0);

/// Uniform logits over `vocab` for `length` positions.
ToyPolicy uniform_policy(std::vector<std::string> vocab, std::size_t length);

/// Tokens joined with single spaces.
std::string render(const ToyPolicy& policy, const std::vector<std::size_t>& ids);

/// Component of each output position: the kind of the first source token it
/// produces; positions producing no token map to kOther.
std::vector<ComponentKind> position_membership(const ToyPolicy& policy,
                                               const std::vector<std::size_t>& ids);

struct ScoredSample {
  ComponentRewards rewards;
  GlobalReward global;
};
ScoredSample score_source(std::string_view prediction, const AnalyzedSource& reference,
                          RewardScheme scheme = RewardScheme::kBinary);

struct SampledGroup {
  RolloutGroup group;
  std::vector<std::vector<std::size_t>> ids;
  std::vector<GlobalReward> globals;
};

/// Draws G sequences. temperature 0 is greedy; otherwise tokens are drawn
/// from softmax(logits / temperature). Recorded old log-probs are always
/// those of the policy itself.
SampledGroup sample_group(const ToyPolicy& policy, const SyntheticTask& task, std::size_t group_size,
                          std::uint64_t seed, double temperature = 1.0,
                          RewardScheme scheme = RewardScheme::kBinary);

/// Per-token log-probs of the sampled ids under `policy`.
std::vector<std::vector<double>> sequence_logprobs(const ToyPolicy& policy,
                                                   const std::vector<std::vector<std::size_t>>& ids);

AdvantageMode advantage_mode(SimMode mode) noexcept;

/// Objective of `policy` on a fixed sampled group; old log-probs come from
/// the group, KL is against `reference`.
double objective_value(const ToyPolicy& policy, const ToyPolicy& reference, const SampledGroup& sampled,
                       const CspoConfig& config, SimMode mode);

/// Analytic gradient of objective_value with respect to policy.logits.
std::vector<double> objective_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                       const SampledGroup& sampled, const CspoConfig& config,
                                       SimMode mode);

struct TrainConfig {
  CspoConfig cspo;
  SimMode mode = SimMode::kCspo;
  TaskKind task = TaskKind::kStructure;
  std::size_t steps = 100;
  double lr = 1e-2;
  double temperature = 1.0;
  double error_prob = 0.5;
  RewardScheme scheme = RewardScheme::kBinary;
  std::size_t eval_samples = 256;
};

struct AdvantageStats {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct StepRecord {
  std::size_t step = 0;
  double objective = 0.0;
  double surrogate = 0.0;
  double kl = 0.0;
  PerComponent<double> mean_rewards{};
  double mean_teds = 0.0;
  double mean_cmp = 0.0;
  double mean_global = 0.0;
  AdvantageStats advantage;
  std::size_t dropped_spans = 0;
};

struct EvalResult {
  PerComponent<double> mean_rewards{};
  double mean_global = 0.0;
};

/// Mean rewards of `samples` sequences drawn at temperature 1 from a fixed
/// eval seed.
EvalResult evaluate_policy(const ToyPolicy& policy, const SyntheticTask& task, std::size_t samples,
                           std::uint64_t seed, RewardScheme scheme);

struct TrainRun {
  TrainConfig config;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  EvalResult initial;
  EvalResult final;
};

/// One seeded run. Identical (task, config, seed) give identical runs.
TrainRun train(const TrainConfig& config, std::uint64_t seed);

struct ModeSummary {
  SimMode mode = SimMode::kCspo;
  std::vector<TrainRun> runs;  // one per seed
  PerComponent<double> final_rewards{};    // seed mean
  PerComponent<double> initial_rewards{};  // seed mean
  double final_global = 0.0;
  double initial_global = 0.0;
  /// First step whose seed-averaged group mean reaches 0.95, per component.
  PerComponent<std::optional<std::size_t>> convergence_step{};
};

struct ExperimentSummary {
  TaskKind task = TaskKind::kStructure;
  std::vector<std::uint64_t> seeds;
  std::vector<ModeSummary> modes;
};

/// Trains every mode on the same task and seeds. Throws Error(kConfig) when
/// `seeds` or `modes` is empty.
ExperimentSummary run_experiment(const std::vector<SimMode>& modes, const TrainConfig& config,
                                 const std::vector<std::uint64_t>& seeds);

std::string config_snapshot_json(const TrainConfig& config);
/// One JSON object per line, per step, tagged with mode and seed.
std::string run_records_jsonl(const TrainRun& run);
std::string run_records_csv(const std::vector<TrainRun>& runs);
std::string experiment_summary_json(const ExperimentSummary& summary);

}  // namespace cspo
