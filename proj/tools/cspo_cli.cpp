// Command-line front end. Talks to the toolkit only through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cspo/cspo.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct CliFailure {
  int exit_code;
  std::string message;
};

struct BufferDeleter {
  void operator()(cspo_buffer* b) const { cspo_buffer_free(b); }
};
using Buffer = std::unique_ptr<cspo_buffer, BufferDeleter>;

struct SessionDeleter {
  void operator()(cspo_session* s) const { cspo_session_destroy(s); }
};
using Session = std::unique_ptr<cspo_session, SessionDeleter>;

std::string text(const Buffer& b) { return std::string(cspo_buffer_data(b.get()), cspo_buffer_size(b.get())); }

void check(cspo_status status) {
  if (status == CSPO_OK) return;
  const int code = (status == CSPO_ERR_IO || status == CSPO_ERR_CONFIG || status == CSPO_ERR_INVALID_ARGUMENT)
                       ? kExitUsage
                       : kExitDomain;
  throw CliFailure{code, std::string(cspo_status_name(status)) + ": " + cspo_last_error_message()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure{kExitUsage, "cannot read " + path};
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  return read_file(path);
}

void write_output(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    if (!data.empty() && data.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliFailure{kExitUsage, "cannot write " + path};
  out << data;
  if (!data.empty() && data.back() != '\n') out << '\n';
}

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  bool quiet = false;
};

// Flags that map one-to-one onto session keys; applied after the config file.
struct KeyFlag {
  std::string key;
  std::optional<std::string> value;
};

class Command {
 public:
  explicit Command(Common& common) : common_(common) {}

  void key_flag(CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    flags_.push_back(std::make_unique<KeyFlag>(KeyFlag{key, std::nullopt}));
    sub->add_option(flag, flags_.back()->value, help);
  }

  Session session() {
    cspo_session* raw = nullptr;
    check(cspo_session_create(&raw));
    Session s(raw);
    if (!common_.config_path.empty()) check(cspo_session_load_config(s.get(), common_.config_path.c_str()));
    for (const auto& kv : common_.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw CliFailure{kExitUsage, "--set expects key=value, got " + kv};
      check(cspo_session_set(s.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    for (const auto& f : flags_) {
      if (f->value) check(cspo_session_set(s.get(), f->key.c_str(), f->value->c_str()));
    }
    check(cspo_session_validate(s.get()));
    return s;
  }

  void note(const std::string& message) const {
    if (!common_.quiet) std::cerr << message << '\n';
  }

 private:
  Common& common_;
  std::vector<std::unique_ptr<KeyFlag>> flags_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Component-level table reward and policy optimization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cspo_version());
  Common common;
  app.add_option("--config", common.config_path, "Flat key = value config file");
  app.add_option("--set", common.sets, "Override a config key (key=value), repeatable");
  app.add_flag("-q,--quiet", common.quiet, "No informational output on stderr");
  Command cmd(common);

  std::function<void()> action;

  // decompose
  std::string decompose_input;
  std::string decompose_out;
  auto* decompose = app.add_subcommand("decompose", "Span report: component of every token");
  decompose->add_option("input", decompose_input, "LaTeX file (default: stdin)");
  decompose->add_option("-o,--out", decompose_out, "Output path (default: stdout)");
  decompose->callback([&] {
    action = [&] {
      const auto src = read_input(decompose_input);
      cspo_buffer* raw = nullptr;
      check(cspo_decompose(src.data(), src.size(), &raw));
      write_output(decompose_out, text(Buffer(raw)));
    };
  });

  // teds
  std::string teds_pred;
  std::string teds_ref;
  auto* teds = app.add_subcommand("teds", "Tree edit similarity of two tables");
  teds->add_option("--pred", teds_pred, "Predicted LaTeX file")->required();
  teds->add_option("--ref", teds_ref, "Reference LaTeX file")->required();
  teds->callback([&] {
    action = [&] {
      const auto p = read_file(teds_pred);
      const auto r = read_file(teds_ref);
      double value = 0.0;
      cspo_buffer* raw = nullptr;
      check(cspo_teds(p.data(), p.size(), r.data(), r.size(), &value, &raw));
      write_output("", text(Buffer(raw)));
    };
  });

  // reward
  std::string reward_pred;
  std::string reward_ref;
  auto* reward = app.add_subcommand("reward", "Component and global rewards of a prediction");
  reward->add_option("--pred", reward_pred, "Predicted LaTeX file")->required();
  reward->add_option("--ref", reward_ref, "Reference LaTeX file")->required();
  cmd.key_flag(reward, "--scheme", "scheme", "binary or graded");
  cmd.key_flag(reward, "--judge", "judge", "oracle or external (JUDGE_ENDPOINT, JUDGE_API_KEY)");
  cmd.key_flag(reward, "--compile-command", "compile_command", "External compiler, e.g. pdflatex");
  cmd.key_flag(reward, "--judge-template", "judge_template", "Prompt template file");
  reward->callback([&] {
    action = [&] {
      auto s = cmd.session();
      const auto p = read_file(reward_pred);
      const auto r = read_file(reward_ref);
      cspo_buffer* raw = nullptr;
      check(cspo_reward(s.get(), p.data(), p.size(), r.data(), r.size(), &raw));
      write_output("", text(Buffer(raw)));
    };
  });

  // evaluate
  std::string eval_input;
  std::string eval_out;
  std::string eval_csv;
  auto* evaluate = app.add_subcommand("evaluate", "Corpus metrics over JSONL {id, prediction, reference}");
  evaluate->add_option("--pred,--input", eval_input, "JSONL corpus (default: stdin)");
  evaluate->add_option("-o,--out", eval_out, "Report path (default: stdout)");
  evaluate->add_option("--csv", eval_csv, "Also write per-sample CSV here");
  cmd.key_flag(evaluate, "--parallelism", "parallelism", "Worker threads");
  cmd.key_flag(evaluate, "--judge", "judge", "oracle or external");
  cmd.key_flag(evaluate, "--compile-command", "compile_command", "External compiler");
  cmd.key_flag(evaluate, "--format", "format", "json or csv for the main output");
  evaluate->callback([&] {
    action = [&] {
      auto s = cmd.session();
      const auto corpus = read_input(eval_input);
      cspo_buffer* report = nullptr;
      cspo_buffer* csv = nullptr;
      check(cspo_evaluate_corpus(s.get(), corpus.data(), corpus.size(), &report, &csv));
      Buffer report_buf(report);
      Buffer csv_buf(csv);
      cspo_buffer* cfg = nullptr;
      check(cspo_session_config_json(s.get(), &cfg));
      const bool as_csv = text(Buffer(cfg)).find("\"format\":\"csv\"") != std::string::npos;
      write_output(eval_out, as_csv ? text(csv_buf) : text(report_buf));
      if (!eval_csv.empty()) {
        write_output(eval_csv, text(csv_buf));
        cmd.note("wrote " + eval_csv);
      }
    };
  });

  // simulate-train
  std::string sim_out;
  std::string sim_summary;
  std::string sim_csv;
  auto* sim = app.add_subcommand("simulate-train", "Toy-policy training run");
  cmd.key_flag(sim, "--mode", "mode", "cspo, grpo or comp_sum");
  cmd.key_flag(sim, "--task", "task", "structure, content, style or mixed");
  cmd.key_flag(sim, "--seed,--seeds", "seeds", "Seed list: 7 or 0,1,2 or 0-9");
  cmd.key_flag(sim, "--steps", "steps", "Training steps");
  cmd.key_flag(sim, "--lr", "lr", "Step size");
  cmd.key_flag(sim, "--group-size", "group_size", "Rollouts per group");
  cmd.key_flag(sim, "--beta", "beta", "KL coefficient");
  cmd.key_flag(sim, "--temperature", "temperature", "Sampling temperature");
  cmd.key_flag(sim, "--eval-samples", "eval_samples", "Samples for the initial and final evaluation");
  sim->add_option("-o,--out", sim_out, "Per-step JSONL records (default: stdout)");
  sim->add_option("--summary", sim_summary, "Summary JSON path");
  sim->add_option("--csv", sim_csv, "Reward curve CSV path");
  sim->callback([&] {
    action = [&] {
      auto s = cmd.session();
      cspo_buffer* records = nullptr;
      cspo_buffer* summary = nullptr;
      cspo_buffer* csv = nullptr;
      check(cspo_simulate_train(s.get(), &records, &summary, &csv));
      Buffer records_buf(records);
      Buffer summary_buf(summary);
      Buffer csv_buf(csv);
      write_output(sim_out, text(records_buf));
      if (!sim_summary.empty()) write_output(sim_summary, text(summary_buf));
      if (!sim_csv.empty()) write_output(sim_csv, text(csv_buf));
      if (!sim_out.empty()) cmd.note("wrote " + sim_out);
    };
  });

  // advantages
  std::string adv_group;
  auto* adv = app.add_subcommand("advantages", "Advantage dump for a rollout group JSON");
  adv->add_option("--group", adv_group, "Group JSON file (default: stdin)");
  cmd.key_flag(adv, "--mode", "mode", "cspo, grpo or comp_sum");
  adv->callback([&] {
    action = [&] {
      auto s = cmd.session();
      const auto group = read_input(adv_group);
      cspo_buffer* raw = nullptr;
      check(cspo_advantages(s.get(), group.data(), group.size(), &raw));
      write_output("", text(Buffer(raw)));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (action) action();
  } catch (const CliFailure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitOk;
}
