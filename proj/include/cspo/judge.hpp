#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>

#include "cspo/rewards.hpp"

namespace cspo {

/// status == 0 means the request never completed (timeout, refused, ...).
struct HttpReply {
  int status = 0;
  std::string body;
  std::string error;
};

class JudgeTransport {
 public:
  virtual ~JudgeTransport() = default;
  virtual HttpReply post(const std::string& json_body) = 0;
};

/// Plain HTTP(S) POST to `endpoint` with a bearer token when `api_key` is set.
std::unique_ptr<JudgeTransport> make_http_transport(const std::string& endpoint,
                                                    const std::string& api_key, int timeout_ms);

struct JudgeConfig {
  std::string endpoint;
  std::string api_key;
  std::string prompt_template;  // {PREDICTION} / {REFERENCE} placeholders
  RewardScheme scheme = RewardScheme::kBinary;
  int max_retries = 3;
  int backoff_ms = 200;  // doubled after each failed attempt
  int timeout_ms = 30000;
  int max_in_flight = 4;
  std::string audit_path;  // JSONL of raw replies; empty disables

  /// Reads JUDGE_ENDPOINT and JUDGE_API_KEY; other fields keep defaults.
  static JudgeConfig from_environment();
};

struct JudgeVerdict {
  ComponentRewards rewards;
  std::string raw_reply;
  int retries = 0;
};

struct JudgeTelemetry {
  long requests = 0;
  long retries = 0;
  long failures = 0;
};

/// Built-in wording; templates/ holds the same text as editable files.
std::string default_prompt_template(RewardScheme scheme = RewardScheme::kBinary);
std::string load_prompt_template(const std::string& path);
std::string render_prompt(std::string_view tmpl, std::string_view prediction,
                          std::string_view reference);

/// Finds the verdict object in a judge reply, either the whole body or a
/// JSON object embedded in it (for chat-style wrappers). Throws
/// JudgeReplyError when no object with all seven keys and in-range values
/// exists.
ComponentRewards parse_judge_reply(std::string_view raw, RewardScheme scheme);

class JudgeClient {
 public:
  explicit JudgeClient(JudgeConfig config, std::unique_ptr<JudgeTransport> transport = nullptr);

  JudgeClient(const JudgeClient&) = delete;
  JudgeClient& operator=(const JudgeClient&) = delete;

  /// Thread-safe. Throws Error(kJudgeUnreachable) once retries are exhausted
  /// and JudgeReplyError for replies that do not parse.
  JudgeVerdict judge(std::string_view prediction, std::string_view reference);

  JudgeTelemetry telemetry() const;
  const JudgeConfig& config() const { return config_; }

 private:
  void audit(const std::string& request, const std::string& reply, int attempt);

  JudgeConfig config_;
  std::unique_ptr<JudgeTransport> transport_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<long> requests_{0};
  std::atomic<long> retries_{0};
  std::atomic<long> failures_{0};
  std::mutex audit_mutex_;
};

/// One-shot convenience over JudgeClient with the HTTP transport.
ComponentRewards judge_component_rewards(const JudgeConfig& config, std::string_view prediction,
                                         std::string_view reference);

}  // namespace cspo
