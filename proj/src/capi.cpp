#include "cspo/cspo.h"

#include <exception>
#include <new>
#include <sstream>
#include <string>

#include "cspo/config.hpp"
#include "cspo/error.hpp"
#include "cspo/metrics.hpp"
#include "cspo/train_sim.hpp"
#include "json.hpp"

struct cspo_session {
  cspo::RunConfig config;
};

struct cspo_buffer {
  std::string data;
};

namespace {

using cspo::ComponentKind;
using cspo::ErrorCode;
using nlohmann::json;
using nlohmann::ordered_json;

thread_local std::string g_last_error;

cspo_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return CSPO_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return CSPO_ERR_IO;
    case ErrorCode::kConfig: return CSPO_ERR_CONFIG;
    case ErrorCode::kSchema: return CSPO_ERR_SCHEMA;
    case ErrorCode::kUnrecoverableStructure: return CSPO_ERR_UNRECOVERABLE_STRUCTURE;
    case ErrorCode::kGroupTooSmall: return CSPO_ERR_GROUP_TOO_SMALL;
    case ErrorCode::kEmptyComponentSpan: return CSPO_ERR_EMPTY_COMPONENT_SPAN;
    case ErrorCode::kExternalToolUnavailable: return CSPO_ERR_EXTERNAL_TOOL_UNAVAILABLE;
    case ErrorCode::kJudgeUnreachable: return CSPO_ERR_JUDGE_UNREACHABLE;
    case ErrorCode::kJudgeReplyUnparseable: return CSPO_ERR_JUDGE_REPLY_UNPARSEABLE;
    case ErrorCode::kInternal: return CSPO_ERR_INTERNAL;
  }
  return CSPO_ERR_INTERNAL;
}

template <typename F>
cspo_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return CSPO_OK;
  } catch (const cspo::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return CSPO_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw cspo::Error(ErrorCode::kInvalidArgument, what);
}

void emit(cspo_buffer** out, std::string data) {
  if (!out) return;
  *out = new cspo_buffer{std::move(data)};
}

std::string_view view(const char* p, std::size_t n) { return p ? std::string_view(p, n) : std::string_view(); }

ordered_json per_component(const cspo::PerComponent<int>& values) {
  ordered_json out = ordered_json::object();
  for (ComponentKind k : cspo::kRewardedComponents) out[std::string(cspo::component_name(k))] = values[cspo::index_of(k)];
  return out;
}

ComponentKind kind_from_int(int value, bool allow_global) {
  if (value < 0 || value >= static_cast<int>(cspo::kNumKinds) ||
      (!allow_global && value == static_cast<int>(ComponentKind::kGlobal))) {
    throw cspo::Error(ErrorCode::kInvalidArgument, "component id out of range: " + std::to_string(value));
  }
  return static_cast<ComponentKind>(value);
}

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw cspo::Error(ErrorCode::kSchema, path + ": " + what);
}

double number_at(const json& node, const std::string& path) {
  if (!node.is_number()) schema_error(path, "expected a number");
  return node.get<double>();
}

cspo::RolloutGroup parse_group(std::string_view text) {
  const json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) schema_error("$", "not valid JSON");
  if (!root.is_object()) schema_error("$", "expected an object");
  if (!root.contains("rollouts") || !root["rollouts"].is_array()) schema_error("$.rollouts", "expected an array");
  cspo::RolloutGroup group;
  if (root.contains("prompt_id")) {
    if (!root["prompt_id"].is_string()) schema_error("$.prompt_id", "expected a string");
    group.prompt_id = root["prompt_id"].get<std::string>();
  }
  const auto& rollouts = root["rollouts"];
  for (std::size_t g = 0; g < rollouts.size(); ++g) {
    const std::string base = "$.rollouts[" + std::to_string(g) + "]";
    const auto& r = rollouts[g];
    if (!r.is_object()) schema_error(base, "expected an object");
    cspo::Rollout out;
    if (!r.contains("membership") || !r["membership"].is_array()) schema_error(base + ".membership", "expected an array");
    const auto& membership = r["membership"];
    for (std::size_t t = 0; t < membership.size(); ++t) {
      const std::string path = base + ".membership[" + std::to_string(t) + "]";
      if (!membership[t].is_string()) schema_error(path, "expected a component name");
      const auto kind = cspo::component_from_name(membership[t].get<std::string>());
      if (!kind || *kind == ComponentKind::kGlobal) schema_error(path, "unknown token component");
      out.membership.push_back(*kind);
    }
    if (!r.contains("rewards") || !r["rewards"].is_object()) schema_error(base + ".rewards", "expected an object");
    for (ComponentKind k : cspo::kRewardedComponents) {
      const std::string name(cspo::component_name(k));
      if (!r["rewards"].contains(name)) schema_error(base + ".rewards." + name, "missing");
      out.rewards[cspo::index_of(k)] = number_at(r["rewards"][name], base + ".rewards." + name);
    }
    for (const auto& item : r["rewards"].items()) {
      const auto kind = cspo::component_from_name(item.key());
      if (!kind || !cspo::is_rewarded(*kind)) schema_error(base + ".rewards." + item.key(), "unknown component");
    }
    if (!r.contains("global")) schema_error(base + ".global", "missing");
    out.global_reward = number_at(r["global"], base + ".global");
    if (r.contains("old_logprobs")) {
      const auto& lp = r["old_logprobs"];
      if (!lp.is_array() || lp.size() != out.membership.size()) {
        schema_error(base + ".old_logprobs", "expected one number per token");
      }
      for (std::size_t t = 0; t < lp.size(); ++t) {
        out.old_logprobs.push_back(number_at(lp[t], base + ".old_logprobs[" + std::to_string(t) + "]"));
      }
    }
    group.rollouts.push_back(std::move(out));
  }
  return group;
}

std::string config_json(const cspo::RunConfig& c) {
  ordered_json j;
  j["w_global"] = c.cspo.global_weight;
  for (ComponentKind k : cspo::kRewardedComponents) {
    j["w_" + std::string(cspo::component_name(k))] = c.cspo.component_weights[cspo::index_of(k)];
  }
  j["eps_norm"] = c.cspo.eps_norm;
  j["eps_clip"] = c.cspo.eps_clip;
  j["beta"] = c.cspo.beta;
  j["group_size"] = c.cspo.group_size;
  j["strict_empty_spans"] = c.cspo.strict_empty_spans;
  j["scheme"] = std::string(cspo::scheme_name(c.scheme));
  j["judge"] = std::string(cspo::judge_mode_name(c.judge));
  j["judge_template"] = c.judge_template;
  j["judge_retries"] = c.judge_retries;
  j["judge_backoff_ms"] = c.judge_backoff_ms;
  j["judge_timeout_ms"] = c.judge_timeout_ms;
  j["judge_audit"] = c.judge_audit;
  j["compile_command"] = c.compile_command;
  j["parallelism"] = c.parallelism;
  j["seeds"] = c.seeds;
  j["steps"] = c.steps;
  j["lr"] = c.lr;
  j["temperature"] = c.temperature;
  j["error_prob"] = c.error_prob;
  j["eval_samples"] = c.eval_samples;
  j["task"] = std::string(cspo::task_name(c.task));
  j["mode"] = std::string(cspo::sim_mode_name(c.mode));
  j["format"] = c.format == cspo::OutputFormat::kCsv ? "csv" : "json";
  return j.dump();
}

}  // namespace

extern "C" {

const char* cspo_version(void) { return "1.0.0"; }

const char* cspo_status_name(cspo_status status) {
  switch (status) {
    case CSPO_OK: return "Ok";
    case CSPO_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case CSPO_ERR_IO: return "Io";
    case CSPO_ERR_CONFIG: return "Config";
    case CSPO_ERR_SCHEMA: return "Schema";
    case CSPO_ERR_UNRECOVERABLE_STRUCTURE: return "UnrecoverableStructure";
    case CSPO_ERR_GROUP_TOO_SMALL: return "GroupTooSmall";
    case CSPO_ERR_EMPTY_COMPONENT_SPAN: return "EmptyComponentSpan";
    case CSPO_ERR_EXTERNAL_TOOL_UNAVAILABLE: return "ExternalToolUnavailable";
    case CSPO_ERR_JUDGE_UNREACHABLE: return "JudgeUnreachable";
    case CSPO_ERR_JUDGE_REPLY_UNPARSEABLE: return "JudgeReplyUnparseable";
    case CSPO_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* cspo_last_error_message(void) { return g_last_error.c_str(); }

const char* cspo_buffer_data(const cspo_buffer* buffer) { return buffer ? buffer->data.c_str() : ""; }

size_t cspo_buffer_size(const cspo_buffer* buffer) { return buffer ? buffer->data.size() : 0; }

void cspo_buffer_free(cspo_buffer* buffer) { delete buffer; }

cspo_status cspo_session_create(cspo_session** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be NULL");
    *out = new cspo_session{};
  });
}

void cspo_session_destroy(cspo_session* session) { delete session; }

cspo_status cspo_session_set(cspo_session* session, const char* key, const char* value) {
  return guarded([&] {
    require(session && key && value, "session, key and value must not be NULL");
    session->config.set(key, value);
  });
}

cspo_status cspo_session_load_config(cspo_session* session, const char* path) {
  return guarded([&] {
    require(session && path, "session and path must not be NULL");
    cspo::apply_config_file(session->config, path);
  });
}

cspo_status cspo_session_validate(const cspo_session* session) {
  return guarded([&] {
    require(session != nullptr, "session must not be NULL");
    session->config.validate();
  });
}

cspo_status cspo_session_config_json(const cspo_session* session, cspo_buffer** out) {
  return guarded([&] {
    require(session && out, "session and out must not be NULL");
    emit(out, config_json(session->config));
  });
}

cspo_status cspo_decompose(const char* source, size_t length, cspo_buffer** out) {
  return guarded([&] {
    require((source || length == 0) && out, "source and out must not be NULL");
    const auto tokens = cspo::tokenize(view(source, length));
    emit(out, cspo::span_report_json(tokens, cspo::decompose(tokens)));
  });
}

cspo_status cspo_teds(const char* pred, size_t pred_length, const char* ref, size_t ref_length,
                      double* out_teds, cspo_buffer** out_json) {
  return guarded([&] {
    require((pred || pred_length == 0) && (ref || ref_length == 0), "sources must not be NULL");
    const auto p = cspo::analyze_source(view(pred, pred_length));
    const auto r = cspo::analyze_source(view(ref, ref_length));
    const auto result = cspo::compare_trees(cspo::tree_of(p), cspo::tree_of(r));
    if (out_teds) *out_teds = result.teds;
    if (out_json) {
      ordered_json j;
      j["teds"] = result.teds;
      j["dist"] = result.distance;
      j["pred_nodes"] = result.pred_nodes;
      j["ref_nodes"] = result.ref_nodes;
      emit(out_json, j.dump());
    }
  });
}

cspo_status cspo_reward(cspo_session* session, const char* pred, size_t pred_length, const char* ref,
                        size_t ref_length, cspo_buffer** out) {
  return guarded([&] {
    require(session && out, "session and out must not be NULL");
    require((pred || pred_length == 0) && (ref || ref_length == 0), "sources must not be NULL");
    const auto& cfg = session->config;
    cfg.validate();
    const auto p = cspo::analyze_source(view(pred, pred_length));
    const auto r = cspo::analyze_source(view(ref, ref_length));
    cspo::ComponentRewards rewards;
    if (cfg.judge == cspo::JudgeMode::kExternal) {
      cspo::JudgeClient client(cfg.judge_config());
      rewards = client.judge(view(pred, pred_length), view(ref, ref_length)).rewards;
    } else {
      rewards = cspo::oracle_component_rewards(p, r, cfg.scheme);
    }
    const auto verdict = cspo::validate_source(p);
    const int cmp = cspo::compile_reward(verdict, cspo::CompileCheck{cfg.compile_command}, &p);
    const auto global = cspo::global_reward(cspo::tree_of(p), cspo::tree_of(r), cmp);
    ordered_json j;
    j["scheme"] = std::string(cspo::scheme_name(rewards.scheme));
    j["components"] = per_component(rewards.values);
    j["teds"] = global.teds;
    j["cmp"] = global.cmp;
    j["global"] = global.total;
    j["valid"] = verdict.valid;
    j["reasons"] = verdict.reasons;
    emit(out, j.dump());
  });
}

cspo_status cspo_evaluate_corpus(cspo_session* session, const char* jsonl, size_t length,
                                 cspo_buffer** out_report, cspo_buffer** out_csv) {
  return guarded([&] {
    require(session && (jsonl || length == 0), "session and input must not be NULL");
    const auto& cfg = session->config;
    cfg.validate();
    std::istringstream in{std::string(view(jsonl, length))};
    const auto records = cspo::read_corpus_jsonl(in);
    cspo::MetricsOptions options;
    options.judge = cfg.judge;
    options.compile.command = cfg.compile_command;
    options.parallelism = cfg.parallelism;
    std::unique_ptr<cspo::JudgeClient> client;
    if (cfg.judge == cspo::JudgeMode::kExternal) {
      client = std::make_unique<cspo::JudgeClient>(cfg.judge_config());
      options.client = client.get();
    }
    const auto report = cspo::evaluate_corpus(records, options);
    emit(out_report, cspo::report_json(report));
    emit(out_csv, cspo::report_csv(report));
  });
}

cspo_status cspo_normalize(const double* rewards, size_t n, double eps_norm, double* out) {
  return guarded([&] {
    require(rewards && out, "rewards and out must not be NULL");
    const auto a = cspo::normalize_group(std::span<const double>(rewards, n), eps_norm);
    std::copy(a.begin(), a.end(), out);
  });
}

cspo_status cspo_mask(double advantage, const int* membership, size_t n, int component, double* out) {
  return guarded([&] {
    require((membership || n == 0) && (out || n == 0), "membership and out must not be NULL");
    std::vector<ComponentKind> kinds(n);
    for (std::size_t t = 0; t < n; ++t) kinds[t] = kind_from_int(membership[t], false);
    const auto a = cspo::mask_token_advantages(advantage, kinds, kind_from_int(component, true));
    std::copy(a.begin(), a.end(), out);
  });
}

cspo_status cspo_aggregate(const cspo_session* session, const int* membership, size_t n,
                           const double* component_advantages, double* out) {
  return guarded([&] {
    require(session && component_advantages, "session and component_advantages must not be NULL");
    require((membership || n == 0) && (out || n == 0), "membership and out must not be NULL");
    std::vector<ComponentKind> kinds(n);
    for (std::size_t t = 0; t < n; ++t) kinds[t] = kind_from_int(membership[t], false);
    std::array<double, cspo::kNumKinds> a{};
    std::copy(component_advantages, component_advantages + cspo::kNumKinds, a.begin());
    const auto tokens = cspo::aggregate_token_advantage(kinds, a, session->config.cspo);
    std::copy(tokens.begin(), tokens.end(), out);
  });
}

cspo_status cspo_advantages(const cspo_session* session, const char* group_json, size_t length,
                            cspo_buffer** out) {
  return guarded([&] {
    require(session && group_json && out, "session, group_json and out must not be NULL");
    const auto& cfg = session->config;
    cfg.validate();
    const auto group = parse_group(view(group_json, length));
    cspo::AdvantageSet set;
    switch (cfg.mode) {
      case cspo::SimMode::kCspo: set = cspo::compute_advantages(group, cfg.cspo); break;
      case cspo::SimMode::kGrpo: set = cspo::compute_grpo_advantages(group, cfg.cspo); break;
      case cspo::SimMode::kCompSum: set = cspo::compute_collapsed_advantages(group, cfg.cspo); break;
    }
    emit(out, cspo::advantage_dump_json(set));
  });
}

cspo_status cspo_simulate_train(const cspo_session* session, cspo_buffer** out_records_jsonl,
                                cspo_buffer** out_summary_json, cspo_buffer** out_csv) {
  return guarded([&] {
    require(session != nullptr, "session must not be NULL");
    const auto& cfg = session->config;
    cfg.validate();
    const auto summary = cspo::run_experiment({cfg.mode}, cfg.train_config(), cfg.seeds);
    const auto& runs = summary.modes.front().runs;
    if (out_records_jsonl) {
      std::string records;
      for (const auto& run : runs) records += cspo::run_records_jsonl(run);
      emit(out_records_jsonl, std::move(records));
    }
    emit(out_summary_json, cspo::experiment_summary_json(summary));
    emit(out_csv, cspo::run_records_csv(runs));
  });
}

}  // extern "C"
