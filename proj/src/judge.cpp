#include "cspo/judge.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <sstream>
#include <thread>

#include "cspo/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cspo {
namespace {

#include "prompt_templates.inc"

using nlohmann::json;

class HttpTransport final : public JudgeTransport {
 public:
  HttpTransport(const std::string& endpoint, std::string api_key, int timeout_ms)
      : api_key_(std::move(api_key)), timeout_ms_(timeout_ms) {
    const auto scheme_end = endpoint.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = endpoint.find('/', host_start);
    base_ = endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
  }

  HttpReply post(const std::string& json_body) override {
    HttpReply reply;
    try {
      httplib::Client client(base_);
      const auto secs = timeout_ms_ / 1000;
      const auto usecs = (timeout_ms_ % 1000) * 1000;
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
      auto res = client.Post(path_, headers, json_body, "application/json");
      if (!res) {
        reply.error = httplib::to_string(res.error());
        return reply;
      }
      reply.status = res->status;
      reply.body = res->body;
    } catch (const std::exception& e) {
      reply.error = e.what();
    }
    return reply;
  }

 private:
  std::string base_;
  std::string path_;
  std::string api_key_;
  int timeout_ms_;
};

std::optional<int> integral_value(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<int>(d))) return static_cast<int>(d);
  }
  return std::nullopt;
}

bool has_all_keys(const json& obj) {
  if (!obj.is_object()) return false;
  for (ComponentKind k : kRewardedComponents) {
    if (!obj.contains(std::string(component_name(k)))) return false;
  }
  return true;
}

// Depth-first search for a verdict object inside a parsed reply, including
// JSON text embedded in string values.
const json* find_verdict(const json& node, std::deque<json>& scratch) {
  if (has_all_keys(node)) return &node;
  if (node.is_object() || node.is_array()) {
    for (const auto& child : node) {
      if (const json* hit = find_verdict(child, scratch)) return hit;
    }
  }
  if (node.is_string()) {
    const std::string& s = node.get_ref<const std::string&>();
    for (std::size_t open = s.find('{'); open != std::string::npos; open = s.find('{', open + 1)) {
      json parsed = json::parse(s.begin() + static_cast<std::ptrdiff_t>(open), s.end(), nullptr,
                                false);
      if (parsed.is_discarded()) {
        // Trailing prose after the object: retry on the balanced prefix.
        int depth = 0;
        std::size_t close = open;
        for (; close < s.size(); ++close) {
          if (s[close] == '{') ++depth;
          if (s[close] == '}' && --depth == 0) break;
        }
        if (close >= s.size()) continue;
        parsed = json::parse(s.substr(open, close - open + 1), nullptr, false);
        if (parsed.is_discarded()) continue;
      }
      scratch.push_back(std::move(parsed));
      if (const json* hit = find_verdict(scratch.back(), scratch)) return hit;
    }
  }
  return nullptr;
}

}  // namespace

JudgeConfig JudgeConfig::from_environment() {
  JudgeConfig c;
  if (const char* e = std::getenv("JUDGE_ENDPOINT")) c.endpoint = e;
  if (const char* k = std::getenv("JUDGE_API_KEY")) c.api_key = k;
  return c;
}

std::unique_ptr<JudgeTransport> make_http_transport(const std::string& endpoint,
                                                    const std::string& api_key, int timeout_ms) {
  if (endpoint.empty()) {
    throw Error(ErrorCode::kJudgeUnreachable, "no judge endpoint configured (JUDGE_ENDPOINT)");
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (endpoint.starts_with("https://")) {
    throw Error(ErrorCode::kJudgeUnreachable, "https endpoints need a build with OpenSSL");
  }
#endif
  return std::make_unique<HttpTransport>(endpoint, api_key, timeout_ms);
}

std::string default_prompt_template(RewardScheme scheme) {
  return scheme == RewardScheme::kGraded ? std::string(kGradedPrompt) : std::string(kBinaryPrompt);
}

std::string load_prompt_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read prompt template: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string render_prompt(std::string_view tmpl, std::string_view prediction,
                          std::string_view reference) {
  static constexpr std::string_view kPred = "{PREDICTION}";
  static constexpr std::string_view kRef = "{REFERENCE}";
  std::string out;
  out.reserve(tmpl.size() + prediction.size() + reference.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.substr(i, kPred.size()) == kPred) {
      out.append(prediction);
      i += kPred.size();
    } else if (tmpl.substr(i, kRef.size()) == kRef) {
      out.append(reference);
      i += kRef.size();
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

ComponentRewards parse_judge_reply(std::string_view raw, RewardScheme scheme) {
  const std::string text(raw);
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) root = json(text);  // free text: search inside it

  std::deque<json> scratch;
  const json* verdict = find_verdict(root, scratch);
  if (!verdict) throw JudgeReplyError("judge reply has no verdict object", text);

  const int top = scheme == RewardScheme::kBinary ? 1 : 3;
  ComponentRewards out;
  out.scheme = scheme;
  for (ComponentKind k : kRewardedComponents) {
    const auto value = integral_value((*verdict)[std::string(component_name(k))]);
    if (!value || *value < 0 || *value > top) {
      throw JudgeReplyError("judge score out of range for " + std::string(component_name(k)), text);
    }
    out[k] = *value;
  }
  return out;
}

JudgeClient::JudgeClient(JudgeConfig config, std::unique_ptr<JudgeTransport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
  if (config_.prompt_template.empty()) config_.prompt_template = default_prompt_template(config_.scheme);
  if (!transport_) {
    transport_ = make_http_transport(config_.endpoint, config_.api_key, config_.timeout_ms);
  }
}

JudgeVerdict JudgeClient::judge(std::string_view prediction, std::string_view reference) {
  json request;
  request["prompt"] = render_prompt(config_.prompt_template, prediction, reference);
  request["prediction"] = std::string(prediction);
  request["reference"] = std::string(reference);
  const std::string body = request.dump(-1, ' ', false, json::error_handler_t::replace);

  JudgeVerdict verdict;
  const int attempts = 1 + std::max(config_.max_retries, 0);
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      ++retries_;
      ++verdict.retries;
      const long delay = static_cast<long>(config_.backoff_ms) << (attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    HttpReply reply;
    in_flight_.acquire();
    try {
      ++requests_;
      reply = transport_->post(body);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();
    audit(body, reply.status == 0 ? reply.error : reply.body, attempt);

    if (reply.status >= 200 && reply.status < 300) {
      verdict.raw_reply = reply.body;
      verdict.rewards = parse_judge_reply(reply.body, config_.scheme);
      return verdict;
    }
    ++failures_;
    last_error = reply.status == 0 ? reply.error : "HTTP " + std::to_string(reply.status);
    const bool retryable = reply.status == 0 || reply.status == 429 || reply.status >= 500;
    if (!retryable) break;
  }
  throw Error(ErrorCode::kJudgeUnreachable, "judge request failed: " + last_error);
}

JudgeTelemetry JudgeClient::telemetry() const {
  return JudgeTelemetry{requests_.load(), retries_.load(), failures_.load()};
}

void JudgeClient::audit(const std::string& request, const std::string& reply, int attempt) {
  if (config_.audit_path.empty()) return;
  json line;
  line["attempt"] = attempt;
  line["request"] = json::parse(request, nullptr, false);
  line["reply"] = reply;
  std::lock_guard lock(audit_mutex_);
  std::ofstream out(config_.audit_path, std::ios::app | std::ios::binary);
  out << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
}

ComponentRewards judge_component_rewards(const JudgeConfig& config, std::string_view prediction,
                                         std::string_view reference) {
  JudgeClient client(config);
  return client.judge(prediction, reference).rewards;
}

}  // namespace cspo
