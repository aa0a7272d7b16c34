#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cspo/judge.hpp"
#include "cspo/metrics.hpp"
#include "cspo/objective.hpp"
#include "cspo/train_sim.hpp"

namespace cspo {

enum class OutputFormat { kJson, kCsv };

/// Everything a command can be configured with. Config files and flags both
/// go through set(), so a later set() wins over an earlier one.
struct RunConfig {
  CspoConfig cspo;
  RewardScheme scheme = RewardScheme::kBinary;
  JudgeMode judge = JudgeMode::kOracle;
  std::string judge_template;  // path; empty uses the built-in wording
  int judge_retries = 3;
  int judge_backoff_ms = 200;
  int judge_timeout_ms = 30000;
  std::string judge_audit;
  std::string compile_command;  // empty uses the validity proxy
  std::size_t parallelism = 1;
  std::vector<std::uint64_t> seeds{0};
  std::size_t steps = 100;
  double lr = 1e-2;
  double temperature = 1.0;
  double error_prob = 0.5;
  std::size_t eval_samples = 256;
  TaskKind task = TaskKind::kStructure;
  SimMode mode = SimMode::kCspo;
  OutputFormat format = OutputFormat::kJson;

  /// Throws Error(kConfig) for unknown keys and unparsable values.
  void set(std::string_view key, std::string_view value);
  /// Throws Error(kConfig) on a violated invariant.
  void validate() const;

  TrainConfig train_config() const;
  /// Judge settings with JUDGE_ENDPOINT / JUDGE_API_KEY from the environment.
  JudgeConfig judge_config() const;
};

/// Recognized keys, in documentation order.
const std::vector<std::string>& run_config_keys();

/// Flat `key = value` lines; `#` starts a comment. Applies each entry to
/// `config` in file order. Errors carry the line number.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::string& path);

}  // namespace cspo
