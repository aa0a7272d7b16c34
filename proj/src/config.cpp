#include "cspo/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cspo/error.hpp"

namespace cspo {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(ErrorCode::kConfig, "invalid value for " + std::string(key) + ": '" + std::string(value) +
                                      "' (expected " + std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::uint64_t> to_seeds(std::string_view key, std::string_view v) {
  std::vector<std::uint64_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    const auto dash = item.find('-');
    if (dash != std::string_view::npos && dash > 0) {
      const auto lo = to_int<std::uint64_t>(key, trim(item.substr(0, dash)));
      const auto hi = to_int<std::uint64_t>(key, trim(item.substr(dash + 1)));
      if (hi < lo || hi - lo > 100000) bad_value(key, item, "an ascending range");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(to_int<std::uint64_t>(key, item));
    }
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v, "a seed list such as 0,1,2 or 0-9");
  return out;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "w_global", "w_pkg", "w_cap", "w_struct", "w_cell_app", "w_align", "w_vline", "w_hline",
      "eps_norm", "eps_clip", "beta", "group_size", "strict_empty_spans", "scheme", "judge",
      "judge_template", "judge_retries", "judge_backoff_ms", "judge_timeout_ms", "judge_audit",
      "compile_command", "parallelism", "seeds", "seed", "steps", "lr", "temperature", "error_prob",
      "eval_samples", "task", "mode", "format"};
  return keys;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const auto v = trim(raw);
  if (key.starts_with("w_") && key != "w_global") {
    const auto kind = component_from_name(key.substr(2));
    if (!kind || !is_rewarded(*kind)) throw Error(ErrorCode::kConfig, "unknown config key: " + std::string(key));
    cspo.component_weights[index_of(*kind)] = to_double(key, v);
  } else if (key == "w_global") {
    cspo.global_weight = to_double(key, v);
  } else if (key == "eps_norm") {
    cspo.eps_norm = to_double(key, v);
  } else if (key == "eps_clip") {
    cspo.eps_clip = to_double(key, v);
  } else if (key == "beta") {
    cspo.beta = to_double(key, v);
  } else if (key == "group_size") {
    cspo.group_size = to_int<std::size_t>(key, v);
  } else if (key == "strict_empty_spans") {
    cspo.strict_empty_spans = to_bool(key, v);
  } else if (key == "scheme") {
    const auto s = scheme_from_name(v);
    if (!s) bad_value(key, v, "binary or graded");
    scheme = *s;
  } else if (key == "judge") {
    const auto j = judge_mode_from_name(v);
    if (!j) bad_value(key, v, "oracle or external");
    judge = *j;
  } else if (key == "judge_template") {
    judge_template = std::string(v);
  } else if (key == "judge_retries") {
    judge_retries = to_int<int>(key, v);
  } else if (key == "judge_backoff_ms") {
    judge_backoff_ms = to_int<int>(key, v);
  } else if (key == "judge_timeout_ms") {
    judge_timeout_ms = to_int<int>(key, v);
  } else if (key == "judge_audit") {
    judge_audit = std::string(v);
  } else if (key == "compile_command") {
    compile_command = std::string(v);
  } else if (key == "parallelism") {
    parallelism = to_int<std::size_t>(key, v);
  } else if (key == "seeds" || key == "seed") {
    seeds = to_seeds(key, v);
  } else if (key == "steps") {
    steps = to_int<std::size_t>(key, v);
  } else if (key == "lr") {
    lr = to_double(key, v);
  } else if (key == "temperature") {
    temperature = to_double(key, v);
  } else if (key == "error_prob") {
    error_prob = to_double(key, v);
  } else if (key == "eval_samples") {
    eval_samples = to_int<std::size_t>(key, v);
  } else if (key == "task") {
    const auto t = task_from_name(v);
    if (!t) bad_value(key, v, "structure, content, style or mixed");
    task = *t;
  } else if (key == "mode") {
    const auto m = sim_mode_from_name(v);
    if (!m) bad_value(key, v, "cspo, grpo or comp_sum");
    mode = *m;
  } else if (key == "format") {
    if (v == "json") {
      format = OutputFormat::kJson;
    } else if (v == "csv") {
      format = OutputFormat::kCsv;
    } else {
      bad_value(key, v, "json or csv");
    }
  } else {
    throw Error(ErrorCode::kConfig, "unknown config key: " + std::string(key));
  }
}

void RunConfig::validate() const {
  cspo.validate();
  if (parallelism < 1) throw Error(ErrorCode::kConfig, "parallelism must be >= 1");
  if (seeds.empty()) throw Error(ErrorCode::kConfig, "seeds must not be empty");
  if (!(lr > 0.0)) throw Error(ErrorCode::kConfig, "lr must be > 0");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::kConfig, "temperature must be >= 0");
  if (!(error_prob > 0.0 && error_prob < 1.0)) throw Error(ErrorCode::kConfig, "error_prob must be in (0, 1)");
  if (judge_retries < 0) throw Error(ErrorCode::kConfig, "judge_retries must be >= 0");
  if (judge_backoff_ms < 0) throw Error(ErrorCode::kConfig, "judge_backoff_ms must be >= 0");
  if (judge_timeout_ms <= 0) throw Error(ErrorCode::kConfig, "judge_timeout_ms must be > 0");
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.cspo = cspo;
  t.mode = mode;
  t.task = task;
  t.steps = steps;
  t.lr = lr;
  t.temperature = temperature;
  t.error_prob = error_prob;
  t.scheme = scheme;
  t.eval_samples = eval_samples;
  return t;
}

JudgeConfig RunConfig::judge_config() const {
  JudgeConfig j = JudgeConfig::from_environment();
  j.scheme = scheme;
  j.max_retries = judge_retries;
  j.backoff_ms = judge_backoff_ms;
  j.timeout_ms = judge_timeout_ms;
  j.max_in_flight = static_cast<int>(std::max<std::size_t>(parallelism, 1));
  j.audit_path = judge_audit;
  if (!judge_template.empty()) j.prompt_template = load_prompt_template(judge_template);
  return j;
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

}  // namespace cspo
