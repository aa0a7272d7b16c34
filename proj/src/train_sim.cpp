#include "cspo/train_sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "cspo/error.hpp"
#include "json.hpp"

namespace cspo {
namespace {

using nlohmann::ordered_json;

// Reference table, one policy position per source token.
constexpr const char* kReference =
    R"(\usepackage { booktabs } \begin { table } \caption { Quarterly results } )"
    R"(\begin { tabular } { | l | c | } \hline \multicolumn { 2 } { c } { Total } \\ \hline )"
    R"(\multirow { 2 } { * } { \textbf { a } } & b \\ & c \\ \hline \end { tabular } \end { table })";

constexpr const char* kFillers[] = {"x", "0", "1", "3", "r", "||", "\\textit", "\\midrule", "graphicx",
                                    "B", "Result", "\\cline", "$"};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<double> softmax(const double* logits, std::size_t n, double temperature) {
  std::vector<double> p(n);
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, logits[i] / temperature);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += (p[i] = std::exp(logits[i] / temperature - hi));
  for (double& v : p) v /= z;
  return p;
}

std::size_t draw(const std::vector<double>& p, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

std::size_t find_position(const std::vector<std::string>& tokens, std::string_view text,
                          std::size_t occurrence = 0) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == text && occurrence-- == 0) return i;
  }
  throw Error(ErrorCode::kInternal, "reference token not found: " + std::string(text));
}

AdvantageStats stats_of(const std::vector<std::vector<double>>& token) {
  AdvantageStats s;
  std::size_t n = 0;
  double sum = 0.0;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  for (const auto& row : token) {
    for (double v : row) {
      sum += v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      ++n;
    }
  }
  if (n == 0) return AdvantageStats{};
  s.mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& row : token) {
    for (double v : row) var += (v - s.mean) * (v - s.mean);
  }
  s.stddev = std::sqrt(var / static_cast<double>(n));
  return s;
}

ordered_json per_component_json(const PerComponent<double>& values) {
  ordered_json out = ordered_json::object();
  for (ComponentKind k : kRewardedComponents) out[std::string(component_name(k))] = values[index_of(k)];
  return out;
}

}  // namespace

std::string_view task_name(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::kStructure: return "structure";
    case TaskKind::kContent: return "content";
    case TaskKind::kStyle: return "style";
    case TaskKind::kMixed: return "mixed";
  }
  return "structure";
}

std::optional<TaskKind> task_from_name(std::string_view name) noexcept {
  for (TaskKind k : {TaskKind::kStructure, TaskKind::kContent, TaskKind::kStyle, TaskKind::kMixed}) {
    if (task_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view sim_mode_name(SimMode mode) noexcept {
  switch (mode) {
    case SimMode::kCspo: return "cspo";
    case SimMode::kGrpo: return "grpo";
    case SimMode::kCompSum: return "comp_sum";
  }
  return "cspo";
}

std::optional<SimMode> sim_mode_from_name(std::string_view name) noexcept {
  for (SimMode m : {SimMode::kCspo, SimMode::kGrpo, SimMode::kCompSum}) {
    if (sim_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

AdvantageMode advantage_mode(SimMode mode) noexcept {
  switch (mode) {
    case SimMode::kCspo: return AdvantageMode::kCspo;
    case SimMode::kGrpo: return AdvantageMode::kGrpo;
    case SimMode::kCompSum: return AdvantageMode::kCollapsed;
  }
  return AdvantageMode::kCspo;
}

std::string SyntheticTask::reference_source() const {
  std::string out;
  for (std::size_t i = 0; i < reference_tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += reference_tokens[i];
  }
  return out;
}

SyntheticTask make_task(TaskKind kind) {
  SyntheticTask task;
  task.kind = kind;
  std::istringstream in(kReference);
  for (std::string tok; in >> tok;) task.reference_tokens.push_back(tok);
  const auto& ref = task.reference_tokens;

  const ErrorSite colspan{find_position(ref, "2", 0), "1", ComponentKind::kStruct};
  const ErrorSite rowspan{find_position(ref, "2", 1), "3", ComponentKind::kStruct};
  const ErrorSite cell_text{find_position(ref, "b"), "B", ComponentKind::kCellApp};
  const ErrorSite caption{find_position(ref, "results"), "Result", ComponentKind::kCap};
  const ErrorSite align{find_position(ref, "l"), "r", ComponentKind::kAlign};
  const ErrorSite vline{find_position(ref, "|", 2), "||", ComponentKind::kVline};
  const ErrorSite hline{find_position(ref, "\\hline", 2), "\\midrule", ComponentKind::kHline};
  const ErrorSite bold{find_position(ref, "\\textbf"), "\\textit", ComponentKind::kCellApp};
  const ErrorSite package{find_position(ref, "booktabs"), "graphicx", ComponentKind::kPkg};

  switch (kind) {
    case TaskKind::kStructure: task.errors = {colspan, rowspan}; break;
    case TaskKind::kContent: task.errors = {cell_text, caption}; break;
    case TaskKind::kStyle: task.errors = {align, vline, hline, bold}; break;
    case TaskKind::kMixed: task.errors = {colspan, cell_text, align, package}; break;
  }

  auto add = [&](const std::string& t) {
    if (std::find(task.vocab.begin(), task.vocab.end(), t) == task.vocab.end()) task.vocab.push_back(t);
  };
  for (const auto& t : ref) add(t);
  for (const auto& e : task.errors) add(e.wrong_token);
  for (const char* f : kFillers) add(f);
  return task;
}

std::vector<double> ToyPolicy::probs(std::size_t t) const {
  return softmax(&logits[t * vocab.size()], vocab.size(), 1.0);
}

double ToyPolicy::logprob(std::size_t t, std::size_t v) const {
  const double* row = &logits[t * vocab.size()];
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vocab.size(); ++i) hi = std::max(hi, row[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) z += std::exp(row[i] - hi);
  return row[v] - hi - std::log(z);
}

ToyPolicy initial_policy(const SyntheticTask& task, double error_prob, double confidence) {
  if (!(error_prob > 0.0 && error_prob < 1.0)) {
    throw Error(ErrorCode::kConfig, "error_prob must be in (0, 1)");
  }
  ToyPolicy p;
  p.vocab = task.vocab;
  p.length = task.reference_tokens.size();
  p.logits.assign(p.length * p.vocab.size(), 0.0);
  auto id = [&](const std::string& t) {
    return static_cast<std::size_t>(std::find(p.vocab.begin(), p.vocab.end(), t) - p.vocab.begin());
  };
  for (std::size_t t = 0; t < p.length; ++t) p.logit(t, id(task.reference_tokens[t])) = confidence;
  for (const auto& e : task.errors) {
    p.logit(e.position, id(e.wrong_token)) = confidence + std::log(error_prob / (1.0 - error_prob));
  }
  return p;
}

ToyPolicy uniform_policy(std::vector<std::string> vocab, std::size_t length) {
  ToyPolicy p;
  p.vocab = std::move(vocab);
  p.length = length;
  p.logits.assign(length * p.vocab.size(), 0.0);
  return p;
}

std::string render(const ToyPolicy& policy, const std::vector<std::size_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += policy.vocab[ids[i]];
  }
  return out;
}

std::vector<ComponentKind> position_membership(const ToyPolicy& policy,
                                               const std::vector<std::size_t>& ids) {
  std::vector<std::size_t> starts(ids.size());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    starts[i] = offset;
    offset += policy.vocab[ids[i]].size() + 1;
  }
  const auto source = render(policy, ids);
  const auto tokens = tokenize(source);
  const auto map = decompose(tokens);
  std::vector<ComponentKind> out(ids.size(), ComponentKind::kOther);
  std::vector<bool> seen(ids.size(), false);
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const auto it = std::upper_bound(starts.begin(), starts.end(), tokens[k].begin);
    const auto pos = static_cast<std::size_t>(it - starts.begin()) - 1;
    if (!seen[pos]) {
      seen[pos] = true;
      out[pos] = map.assignment[k];
    }
  }
  return out;
}

ScoredSample score_source(std::string_view prediction, const AnalyzedSource& reference,
                          RewardScheme scheme) {
  const auto pred = analyze_source(prediction);
  ScoredSample s;
  s.rewards = oracle_component_rewards(pred, reference, scheme);
  const int cmp = compile_reward(validate_source(pred));
  s.global = global_reward(tree_of(pred), tree_of(reference), cmp);
  return s;
}

SampledGroup sample_group(const ToyPolicy& policy, const SyntheticTask& task, std::size_t group_size,
                          std::uint64_t seed, double temperature, RewardScheme scheme) {
  if (group_size < 2) throw Error(ErrorCode::kGroupTooSmall, "group_size must be >= 2");
  if (temperature < 0.0) throw Error(ErrorCode::kConfig, "temperature must be >= 0");
  std::mt19937_64 rng(seed);
  const auto reference = analyze_source(task.reference_source());
  SampledGroup out;
  out.group.prompt_id = std::string(task_name(task.kind));
  for (std::size_t g = 0; g < group_size; ++g) {
    std::vector<std::size_t> ids(policy.length);
    Rollout r;
    r.old_logprobs.resize(policy.length);
    for (std::size_t t = 0; t < policy.length; ++t) {
      const double* row = &policy.logits[t * policy.vocab_size()];
      if (temperature == 0.0) {
        ids[t] = static_cast<std::size_t>(std::max_element(row, row + policy.vocab_size()) - row);
      } else {
        ids[t] = draw(softmax(row, policy.vocab_size(), temperature), rng);
      }
      r.old_logprobs[t] = policy.logprob(t, ids[t]);
    }
    r.membership = position_membership(policy, ids);
    const auto scored = score_source(render(policy, ids), reference, scheme);
    for (std::size_t c = 0; c < kNumRewarded; ++c) r.rewards[c] = scored.rewards.values[c];
    r.global_reward = scored.global.total;
    out.group.rollouts.push_back(std::move(r));
    out.ids.push_back(std::move(ids));
    out.globals.push_back(scored.global);
  }
  return out;
}

std::vector<std::vector<double>> sequence_logprobs(const ToyPolicy& policy,
                                                   const std::vector<std::vector<std::size_t>>& ids) {
  std::vector<std::vector<double>> out(ids.size());
  for (std::size_t g = 0; g < ids.size(); ++g) {
    out[g].resize(ids[g].size());
    for (std::size_t t = 0; t < ids[g].size(); ++t) out[g][t] = policy.logprob(t, ids[g][t]);
  }
  return out;
}

double objective_value(const ToyPolicy& policy, const ToyPolicy& reference, const SampledGroup& sampled,
                       const CspoConfig& config, SimMode mode) {
  return cspo_objective(sampled.group, config, sequence_logprobs(policy, sampled.ids),
                        sequence_logprobs(reference, sampled.ids), advantage_mode(mode))
      .objective;
}

std::vector<double> objective_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                       const SampledGroup& sampled, const CspoConfig& config,
                                       SimMode mode) {
  const auto result = cspo_objective(sampled.group, config, {}, {}, advantage_mode(mode));
  const auto& adv = result.advantages.token;
  const std::size_t V = policy.vocab_size();
  const double G = static_cast<double>(sampled.group.size());
  std::vector<double> grad(policy.logits.size(), 0.0);
  for (std::size_t g = 0; g < sampled.group.size(); ++g) {
    const auto& rollout = sampled.group.rollouts[g];
    const auto& ids = sampled.ids[g];
    const double scale = 1.0 / (G * static_cast<double>(ids.size()));
    for (std::size_t t = 0; t < ids.size(); ++t) {
      const double cur = policy.logprob(t, ids[t]);
      const double rho = std::exp(cur - rollout.old_logprobs[t]);
      const double a = adv[g][t];
      const bool active = (rho >= 1.0 - config.eps_clip && rho <= 1.0 + config.eps_clip) ||
                          (rho > 1.0 + config.eps_clip && a < 0.0) ||
                          (rho < 1.0 - config.eps_clip && a > 0.0);
      double coef = active ? a * rho : 0.0;
      const double r = std::exp(reference.logprob(t, ids[t]) - cur);
      coef -= config.beta * (1.0 - r);
      coef *= scale;
      if (coef == 0.0) continue;
      const auto p = policy.probs(t);
      double* row = &grad[t * V];
      for (std::size_t v = 0; v < V; ++v) row[v] -= coef * p[v];
      row[ids[t]] += coef;
    }
  }
  return grad;
}

EvalResult evaluate_policy(const ToyPolicy& policy, const SyntheticTask& task, std::size_t samples,
                           std::uint64_t seed, RewardScheme scheme) {
  EvalResult out;
  if (samples == 0) return out;
  std::mt19937_64 rng(seed);
  const auto reference = analyze_source(task.reference_source());
  std::vector<std::size_t> ids(policy.length);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t t = 0; t < policy.length; ++t) ids[t] = draw(policy.probs(t), rng);
    const auto scored = score_source(render(policy, ids), reference, scheme);
    for (std::size_t c = 0; c < kNumRewarded; ++c) out.mean_rewards[c] += scored.rewards.values[c];
    out.mean_global += scored.global.total;
  }
  for (double& v : out.mean_rewards) v /= static_cast<double>(samples);
  out.mean_global /= static_cast<double>(samples);
  return out;
}

TrainRun train(const TrainConfig& config, std::uint64_t seed) {
  config.cspo.validate();
  if (!(config.lr > 0.0)) throw Error(ErrorCode::kConfig, "lr must be > 0");
  const auto task = make_task(config.task);
  const ToyPolicy reference = initial_policy(task, config.error_prob);
  ToyPolicy policy = reference;

  TrainRun run;
  run.config = config;
  run.seed = seed;
  const std::uint64_t eval_seed = splitmix64(seed ^ 0x65766131ULL);
  run.initial = evaluate_policy(policy, task, config.eval_samples, eval_seed, config.scheme);

  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto sampled = sample_group(policy, task, config.cspo.group_size,
                                      splitmix64(seed * 0x100000001b3ULL + step), config.temperature,
                                      config.scheme);
    const auto result = cspo_objective(sampled.group, config.cspo, {},
                                       sequence_logprobs(reference, sampled.ids),
                                       advantage_mode(config.mode));

    StepRecord rec;
    rec.step = step;
    rec.objective = result.objective;
    rec.surrogate = result.surrogate;
    rec.kl = result.kl;
    const double G = static_cast<double>(sampled.group.size());
    for (std::size_t g = 0; g < sampled.group.size(); ++g) {
      for (std::size_t c = 0; c < kNumRewarded; ++c) rec.mean_rewards[c] += sampled.group.rollouts[g].rewards[c] / G;
      rec.mean_teds += sampled.globals[g].teds / G;
      rec.mean_cmp += sampled.globals[g].cmp / G;
      rec.mean_global += sampled.globals[g].total / G;
    }
    rec.advantage = stats_of(result.advantages.token);
    rec.dropped_spans = result.advantages.dropped.size();
    run.steps.push_back(rec);

    const auto grad = objective_gradient(policy, reference, sampled, config.cspo, config.mode);
    for (std::size_t i = 0; i < grad.size(); ++i) policy.logits[i] += config.lr * grad[i];
  }
  run.final = evaluate_policy(policy, task, config.eval_samples, eval_seed, config.scheme);
  return run;
}

ExperimentSummary run_experiment(const std::vector<SimMode>& modes, const TrainConfig& config,
                                 const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw Error(ErrorCode::kConfig, "run_experiment needs at least one seed");
  if (modes.empty()) throw Error(ErrorCode::kConfig, "run_experiment needs at least one mode");
  ExperimentSummary summary;
  summary.task = config.task;
  summary.seeds = seeds;
  const double top = config.scheme == RewardScheme::kGraded ? 3.0 : 1.0;
  for (SimMode mode : modes) {
    ModeSummary ms;
    ms.mode = mode;
    TrainConfig c = config;
    c.mode = mode;
    for (std::uint64_t seed : seeds) ms.runs.push_back(train(c, seed));
    const double n = static_cast<double>(seeds.size());
    for (const auto& run : ms.runs) {
      for (std::size_t k = 0; k < kNumRewarded; ++k) {
        ms.final_rewards[k] += run.final.mean_rewards[k] / n;
        ms.initial_rewards[k] += run.initial.mean_rewards[k] / n;
      }
      ms.final_global += run.final.mean_global / n;
      ms.initial_global += run.initial.mean_global / n;
    }
    for (std::size_t k = 0; k < kNumRewarded; ++k) {
      for (std::size_t step = 0; step < c.steps; ++step) {
        double mean = 0.0;
        for (const auto& run : ms.runs) mean += run.steps[step].mean_rewards[k] / n;
        if (mean >= 0.95 * top) {
          ms.convergence_step[k] = step;
          break;
        }
      }
    }
    summary.modes.push_back(std::move(ms));
  }
  return summary;
}

std::string config_snapshot_json(const TrainConfig& config) {
  ordered_json j;
  j["mode"] = std::string(sim_mode_name(config.mode));
  j["task"] = std::string(task_name(config.task));
  j["scheme"] = std::string(scheme_name(config.scheme));
  j["steps"] = config.steps;
  j["lr"] = config.lr;
  j["temperature"] = config.temperature;
  j["error_prob"] = config.error_prob;
  j["eval_samples"] = config.eval_samples;
  j["group_size"] = config.cspo.group_size;
  j["w_global"] = config.cspo.global_weight;
  j["weights"] = per_component_json(config.cspo.component_weights);
  j["eps_norm"] = config.cspo.eps_norm;
  j["eps_clip"] = config.cspo.eps_clip;
  j["beta"] = config.cspo.beta;
  return j.dump();
}

std::string run_records_jsonl(const TrainRun& run) {
  std::string out;
  for (const auto& s : run.steps) {
    ordered_json j;
    j["seed"] = run.seed;
    j["step"] = s.step;
    j["objective"] = s.objective;
    j["surrogate"] = s.surrogate;
    j["kl"] = s.kl;
    j["rewards"] = per_component_json(s.mean_rewards);
    j["teds"] = s.mean_teds;
    j["cmp"] = s.mean_cmp;
    j["global"] = s.mean_global;
    j["advantage"] = {{"mean", s.advantage.mean},
                      {"std", s.advantage.stddev},
                      {"min", s.advantage.min},
                      {"max", s.advantage.max}};
    j["dropped_spans"] = s.dropped_spans;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::string run_records_csv(const std::vector<TrainRun>& runs) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mode,seed,step,objective,kl";
  for (ComponentKind k : kRewardedComponents) out << ',' << component_name(k);
  out << ",teds,cmp,global\n";
  for (const auto& run : runs) {
    for (const auto& s : run.steps) {
      out << sim_mode_name(run.config.mode) << ',' << run.seed << ',' << s.step << ',' << s.objective
          << ',' << s.kl;
      for (double v : s.mean_rewards) out << ',' << v;
      out << ',' << s.mean_teds << ',' << s.mean_cmp << ',' << s.mean_global << '\n';
    }
  }
  return out.str();
}

std::string experiment_summary_json(const ExperimentSummary& summary) {
  ordered_json j;
  j["task"] = std::string(task_name(summary.task));
  j["seeds"] = summary.seeds;
  auto modes = ordered_json::array();
  for (const auto& ms : summary.modes) {
    ordered_json m;
    m["mode"] = std::string(sim_mode_name(ms.mode));
    if (!ms.runs.empty()) m["config"] = ordered_json::parse(config_snapshot_json(ms.runs.front().config));
    m["initial_rewards"] = per_component_json(ms.initial_rewards);
    m["final_rewards"] = per_component_json(ms.final_rewards);
    m["initial_global"] = ms.initial_global;
    m["final_global"] = ms.final_global;
    ordered_json conv = ordered_json::object();
    for (ComponentKind k : kRewardedComponents) {
      const auto& v = ms.convergence_step[index_of(k)];
      conv[std::string(component_name(k))] = v ? ordered_json(*v) : ordered_json(nullptr);
    }
    m["convergence_step"] = std::move(conv);
    auto per_seed = ordered_json::array();
    for (const auto& run : ms.runs) {
      per_seed.push_back({{"seed", run.seed},
                          {"final_rewards", per_component_json(run.final.mean_rewards)},
                          {"final_global", run.final.mean_global}});
    }
    m["per_seed"] = std::move(per_seed);
    modes.push_back(std::move(m));
  }
  j["modes"] = std::move(modes);
  return j.dump();
}

}  // namespace cspo
