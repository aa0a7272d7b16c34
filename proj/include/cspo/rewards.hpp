#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "cspo/component.hpp"
#include "cspo/table_parser.hpp"
#include "cspo/teds.hpp"

namespace cspo {

enum class RewardScheme { kBinary, kGraded };

std::string_view scheme_name(RewardScheme scheme) noexcept;
std::optional<RewardScheme> scheme_from_name(std::string_view name) noexcept;

/// Per-component rewards. Binary values are 0/1; graded values are 0..3
/// (3 exact, 2 one discrepancy, 1 more than one, 0 absent or invalid).
struct ComponentRewards {
  RewardScheme scheme = RewardScheme::kBinary;
  PerComponent<int> values{};

  int operator[](ComponentKind kind) const { return values[index_of(kind)]; }
  int& operator[](ComponentKind kind) { return values[index_of(kind)]; }
  bool operator==(const ComponentRewards&) const = default;
};

/// Discrepancy count for one component of a prediction against its
/// reference. `absent` is set when the reference has the component and the
/// prediction lacks it or could not be parsed.
struct ComponentDiscrepancy {
  int count = 0;
  bool absent = false;
};

PerComponent<ComponentDiscrepancy> component_discrepancies(const AnalyzedSource& pred,
                                                           const AnalyzedSource& ref);

int graded_value(const ComponentDiscrepancy& d) noexcept;

/// Rule-based stand-in for the component judge.
ComponentRewards oracle_component_rewards(const AnalyzedSource& pred, const AnalyzedSource& ref,
                                          RewardScheme scheme);

/// Positionwise cell comparisons, split by what is compared.
bool cell_contents_equal(const AnalyzedSource& pred, const AnalyzedSource& ref);
bool cell_formatting_equal(const AnalyzedSource& pred, const AnalyzedSource& ref);

ValidityVerdict validate_source(const AnalyzedSource& source);

struct CompileCheck {
  /// Empty command means proxy mode. Otherwise the command is run with the
  /// path of a standalone .tex file appended, from a scratch directory.
  std::string command;
};

/// 1 when the verdict is valid and, if configured, the external compile
/// succeeds. Throws Error(kExternalToolUnavailable) when the configured
/// executable cannot be found.
int compile_reward(const ValidityVerdict& verdict, const CompileCheck& check = {},
                   const AnalyzedSource* source = nullptr);

struct GlobalReward {
  double teds = 0.0;
  int cmp = 0;
  double total = 0.0;
};

GlobalReward global_reward(const TableTree& pred, const TableTree& ref, int cmp);

/// Tree for a source; a source without a tabular maps to an empty table.
TableTree tree_of(const AnalyzedSource& source);

}  // namespace cspo
