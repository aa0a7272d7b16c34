#include "cspo/metrics.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <sstream>
#include <thread>

#include "cspo/error.hpp"
#include "json.hpp"

namespace cspo {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

double percent(double sum, std::size_t n) {
  return std::round(sum / static_cast<double>(n) * 1000.0) / 10.0;
}

void combine(SampleMetrics& m) {
  m.y = m.y_line & m.y_align & m.y_cell;
  m.of = m.s & m.c & m.y & m.r;
}

SampleMetrics score_record(const CorpusRecord& rec, const MetricsOptions& options) {
  SampleMetrics m;
  if (!rec.error.empty()) {
    m.diagnostic = rec.error;
  } else {
    try {
      m = evaluate_sample(rec.prediction, rec.reference, options);
    } catch (const std::exception& e) {
      m = SampleMetrics{};
      m.diagnostic = e.what();
    }
  }
  m.id = rec.id;
  return m;
}

}  // namespace

std::string_view judge_mode_name(JudgeMode mode) noexcept {
  return mode == JudgeMode::kExternal ? "external" : "oracle";
}

std::optional<JudgeMode> judge_mode_from_name(std::string_view name) noexcept {
  if (name == "oracle") return JudgeMode::kOracle;
  if (name == "external") return JudgeMode::kExternal;
  return std::nullopt;
}

SampleMetrics evaluate_sample(std::string_view prediction, std::string_view reference,
                              const MetricsOptions& options) {
  const auto pred = analyze_source(prediction);
  const auto ref = analyze_source(reference);
  SampleMetrics m;
  m.teds = teds(tree_of(pred), tree_of(ref));
  m.r = compile_reward(validate_source(pred), options.compile, &pred);

  if (options.judge == JudgeMode::kOracle) {
    const auto rw = oracle_component_rewards(pred, ref, RewardScheme::kBinary);
    m.s = rw[ComponentKind::kStruct];
    m.c = rw[ComponentKind::kCap] & static_cast<int>(cell_contents_equal(pred, ref));
    m.y_line = rw[ComponentKind::kHline] & rw[ComponentKind::kVline];
    m.y_align = rw[ComponentKind::kAlign];
    m.y_cell = static_cast<int>(cell_formatting_equal(pred, ref));
  } else {
    if (!options.client) throw Error(ErrorCode::kConfig, "external judge mode needs a judge client");
    const auto verdict = options.client->judge(prediction, reference);
    const int top = verdict.rewards.scheme == RewardScheme::kGraded ? 3 : 1;
    auto ok = [&](ComponentKind k) { return static_cast<int>(verdict.rewards[k] == top); };
    m.s = ok(ComponentKind::kStruct);
    m.c = ok(ComponentKind::kCap) & ok(ComponentKind::kCellApp);
    m.y_line = ok(ComponentKind::kHline) & ok(ComponentKind::kVline);
    m.y_align = ok(ComponentKind::kAlign);
    m.y_cell = ok(ComponentKind::kCellApp);
  }
  combine(m);
  return m;
}

std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    CorpusRecord rec;
    rec.id = "line " + std::to_string(lineno);
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      rec.error = "line " + std::to_string(lineno) + ": not a JSON object";
    } else {
      if (j.contains("id")) rec.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
      if (!j.contains("prediction") || !j["prediction"].is_string() || !j.contains("reference") ||
          !j["reference"].is_string()) {
        rec.error = "line " + std::to_string(lineno) + ": prediction and reference must be strings";
      } else {
        rec.prediction = j["prediction"].get<std::string>();
        rec.reference = j["reference"].get<std::string>();
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

MetricsReport evaluate_corpus(const std::vector<CorpusRecord>& records, const MetricsOptions& options) {
  MetricsReport report;
  report.samples.resize(records.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.parallelism, records.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) report.samples[i] = score_record(records[i], options);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
          report.samples[i] = score_record(records[i], options);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  if (!report.samples.empty()) report.aggregates = aggregate(report.samples);
  return report;
}

MetricsAggregates aggregate(const std::vector<SampleMetrics>& samples) {
  MetricsAggregates a;
  if (samples.empty()) return a;
  double teds = 0, of = 0, s = 0, c = 0, y = 0, yl = 0, ya = 0, yc = 0, r = 0;
  for (const auto& m : samples) {
    teds += m.teds;
    of += m.of;
    s += m.s;
    c += m.c;
    y += m.y;
    yl += m.y_line;
    ya += m.y_align;
    yc += m.y_cell;
    r += m.r;
  }
  const auto n = samples.size();
  return MetricsAggregates{percent(teds, n), percent(of, n), percent(s, n),  percent(c, n), percent(y, n),
                           percent(yl, n),   percent(ya, n), percent(yc, n), percent(r, n)};
}

std::string report_json(const MetricsReport& report) {
  ordered_json j;
  j["n"] = report.samples.size();
  if (report.aggregates) {
    const auto& a = *report.aggregates;
    j["aggregates"] = {{"teds", a.teds},     {"of", a.of},           {"s", a.s},
                       {"c", a.c},           {"y", a.y},             {"y_line", a.y_line},
                       {"y_align", a.y_align}, {"y_cell", a.y_cell}, {"r", a.r}};
  } else {
    j["aggregates"] = nullptr;
  }
  auto samples = ordered_json::array();
  for (const auto& m : report.samples) {
    ordered_json s;
    s["id"] = m.id;
    s["teds"] = m.teds;
    s["of"] = m.of;
    s["s"] = m.s;
    s["c"] = m.c;
    s["y"] = m.y;
    s["y_line"] = m.y_line;
    s["y_align"] = m.y_align;
    s["y_cell"] = m.y_cell;
    s["r"] = m.r;
    if (!m.diagnostic.empty()) s["diagnostic"] = m.diagnostic;
    samples.push_back(std::move(s));
  }
  j["samples"] = std::move(samples);
  return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "id,teds,of,s,c,y,y_line,y_align,y_cell,r,diagnostic\n";
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q.push_back('"');
      q.push_back(ch);
    }
    return q + "\"";
  };
  out << std::setprecision(17);
  for (const auto& m : report.samples) {
    out << quote(m.id) << ',' << m.teds << ',' << m.of << ',' << m.s << ',' << m.c << ',' << m.y << ','
        << m.y_line << ',' << m.y_align << ',' << m.y_cell << ',' << m.r << ',' << quote(m.diagnostic)
        << '\n';
  }
  return out.str();
}

}  // namespace cspo
