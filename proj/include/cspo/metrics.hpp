#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cspo/judge.hpp"
#include "cspo/rewards.hpp"

namespace cspo {

/// Binary per-sample metrics. Invariants: y = y_line & y_align & y_cell and
/// of = s & c & y & r.
struct SampleMetrics {
  std::string id;
  double teds = 0.0;
  int r = 0;
  int s = 0;
  int c = 0;
  int y_line = 0;
  int y_align = 0;
  int y_cell = 0;
  int y = 0;
  int of = 0;
  std::string diagnostic;  // set when the sample could not be scored
};

enum class JudgeMode { kOracle, kExternal };
std::string_view judge_mode_name(JudgeMode mode) noexcept;
std::optional<JudgeMode> judge_mode_from_name(std::string_view name) noexcept;

struct MetricsOptions {
  JudgeMode judge = JudgeMode::kOracle;
  /// Required in external mode; shared by all workers.
  JudgeClient* client = nullptr;
  CompileCheck compile;
  std::size_t parallelism = 1;
};

/// S, C and Y come from the oracle or the judge verdicts; TEDS and R are
/// always computed locally. In external mode C is cap & cell_app and Y_cell
/// is cell_app, since the judge does not split cell text from formatting.
SampleMetrics evaluate_sample(std::string_view prediction, std::string_view reference,
                              const MetricsOptions& options = {});

struct CorpusRecord {
  std::string id;
  std::string prediction;
  std::string reference;
  std::string error;  // non-empty when the line could not be read as a record
};

/// One record per non-blank line. Malformed lines become records carrying
/// `error` so that they are reported rather than dropped.
std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in);

struct MetricsAggregates {
  double teds = 0.0;  // all fields are percentages with one decimal
  double of = 0.0;
  double s = 0.0;
  double c = 0.0;
  double y = 0.0;
  double y_line = 0.0;
  double y_align = 0.0;
  double y_cell = 0.0;
  double r = 0.0;
};

struct MetricsReport {
  std::vector<SampleMetrics> samples;  // input order
  std::optional<MetricsAggregates> aggregates;  // empty for an empty corpus
};

/// Never throws for per-record failures; those score zero with a diagnostic.
MetricsReport evaluate_corpus(const std::vector<CorpusRecord>& records, const MetricsOptions& options = {});

MetricsAggregates aggregate(const std::vector<SampleMetrics>& samples);

std::string report_json(const MetricsReport& report);
std::string report_csv(const MetricsReport& report);

}  // namespace cspo
