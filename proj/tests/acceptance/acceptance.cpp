// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cspo/metrics.hpp"
#include "cspo/objective.hpp"
#include "cspo/rewards.hpp"
#include "cspo/teds.hpp"
#include "cspo/train_sim.hpp"
#include "oracles/objective_oracle.hpp"
#include "oracles/ted_bruteforce.hpp"
#include "support/table_fixtures.hpp"

using namespace cspo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

const std::vector<std::string> kAlphabet = {"a", "b", "c"};

Outcome ted_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240611);
  int mismatches = 0;
  const int cases = 1000;
  for (int i = 0; i < cases; ++i) {
    const TableTree a{oracle::random_tree(rng, 1 + rng() % 6, kAlphabet)};
    const TableTree b{oracle::random_tree(rng, 1 + rng() % 6, kAlphabet)};
    if (tree_edit_distance(a, b) != oracle::brute_force_ted(a.root, b.root)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0, fmt("%d cases, %d mismatches, %.2fs (limit 60s)", cases, mismatches, secs)};
}

Outcome teds_axioms() {
  std::mt19937_64 rng(7);
  bool identity = true;
  double max_asym = 0.0;
  bool in_range = true;
  for (int i = 0; i < 500; ++i) {
    const TableTree a{oracle::random_tree(rng, 1 + rng() % 12, kAlphabet)};
    const TableTree b{oracle::random_tree(rng, 1 + rng() % 12, kAlphabet)};
    identity = identity && teds(a, a) == 1.0;
    const double ab = teds(a, b);
    max_asym = std::max(max_asym, std::abs(ab - teds(b, a)));
    in_range = in_range && ab >= 0.0 && ab <= 1.0;
  }
  fixtures::TableGenerator gen(8);
  for (int i = 0; i < 100; ++i) {
    const auto t = tree_of(analyze_source(gen.table()));
    const auto u = tree_of(analyze_source(gen.table()));
    identity = identity && teds(t, t) == 1.0;
    const double tu = teds(t, u);
    max_asym = std::max(max_asym, std::abs(tu - teds(u, t)));
    in_range = in_range && tu >= 0.0 && tu <= 1.0;
  }
  TableTree seven{TreeNode{"table",
                           {TreeNode{"tabular", {TreeNode{"l", {}}, TreeNode{"c", {}}}},
                            TreeNode{"row", {TreeNode{"a", {}}, TreeNode{"b", {}}}}}}};
  auto relabeled = seven;
  relabeled.root.children[1].children[1].label = "z";
  const double fixture = teds(seven, relabeled);
  const double fixture_err = std::abs(fixture - (1.0 - 1.0 / 7.0));
  const bool ok = identity && max_asym <= 1e-12 && in_range && seven.size() == 7 && fixture_err <= 1e-12;
  return {ok, fmt("identity exact=%s, max asymmetry %.1e (<=1e-12), range ok=%s, 7-node fixture %.15f err %.1e (<=1e-12)",
                  identity ? "yes" : "no", max_asym, in_range ? "yes" : "no", fixture, fixture_err)};
}

Outcome normalization() {
  const auto alt = normalize_group(std::vector<double>{1, 0, 1, 0, 1, 0, 1, 0}, 1e-4);
  const auto seven = normalize_group(std::vector<double>{1, 1, 1, 1, 1, 1, 1, 0}, 1e-4);
  double err = 0.0;
  for (std::size_t i = 0; i < 8; ++i) err = std::max(err, std::abs(alt[i] - (i % 2 ? -0.99980 : 0.99980)));
  for (std::size_t i = 0; i < 7; ++i) err = std::max(err, std::abs(seven[i] - 0.37785));
  err = std::max(err, std::abs(seven[7] + 2.64497));
  return {err <= 1e-4, fmt("alternating %+.6f/%+.6f, seven-one %+.6f/%+.6f, max abs err %.2e (<=1e-4)", alt[0], alt[1],
                           seven[0], seven[7], err)};
}

// Random instance where each rollout may lack some components, so that the
// per-component sums do not cancel to zero across the group.
oracle::Instance sparse_instance(std::mt19937_64& rng, std::size_t G, bool default_weights) {
  auto in = oracle::random_instance(rng, G, true);
  for (auto& ro : in.group.rollouts) {
    for (auto& k : ro.membership) {
      if (is_rewarded(k) && rng() % 3 == 0) k = ComponentKind::kOther;
    }
  }
  if (!default_weights) {
    std::uniform_real_distribution<double> w(0.0, 3.0);
    for (auto& v : in.config.component_weights) v = w(rng);
    in.config.global_weight = w(rng);
  }
  return in;
}

// Sum of |w_c A_c| over the terms that enter either form; the scale against
// which rounding in a cancelling sum is measured.
double term_magnitude(const oracle::Instance& in, const AdvantageSet& adv) {
  double s = 0.0;
  for (std::size_t g = 0; g < in.group.size(); ++g) {
    const auto& ro = in.group.rollouts[g];
    for (auto c : kRewardedComponents) {
      if (ro.count(c) > 0) s += in.config.component_weights[index_of(c)] * std::abs(adv.of(c, g));
    }
    s += in.config.global_weight * std::abs(adv.of(ComponentKind::kGlobal, g));
  }
  return s / static_cast<double>(in.group.size());
}

Outcome appendix_identity() {
  std::mt19937_64 rng(4242);
  const std::size_t sizes[] = {2, 3, 8};
  double max_scaled = 0.0;
  double max_oracle = 0.0;
  int instances = 0;
  int defaults = 0;
  for (int i = 0; i < 200; ++i) {
    const bool default_weights = i % 2 == 0;
    const auto in = sparse_instance(rng, sizes[i % 3], default_weights);
    const auto adv = compute_advantages(in.group, in.config);
    const double aggregated = clipped_surrogate(in.ratios, adv.token, in.config.eps_clip);
    const double summed = component_sum_loss(in.group, adv, in.ratios, in.config);
    // Normalized advantages have zero group mean, so both forms are sums that
    // cancel; error is measured against the size of the summed terms.
    const double scale = std::max({term_magnitude(in, adv), std::abs(aggregated), std::abs(summed)});
    max_scaled = std::max(max_scaled, std::abs(aggregated - summed) / scale);
    max_oracle = std::max({max_oracle, std::abs(summed - oracle::sum_of_component_losses(in)) / scale,
                           std::abs(aggregated - oracle::aggregated_loss(in)) / scale});
    ++instances;
    defaults += default_weights;
  }
  // Arbitrary (unnormalized) component advantages: the identity is linear
  // algebra at rho = 1 and must hold for any values.
  std::normal_distribution<double> n(0.0, 1.5);
  double max_rel_free = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto in = sparse_instance(rng, sizes[i % 3], i % 2 == 0);
    AdvantageSet adv;
    for (auto& col : adv.component) col.resize(in.group.size());
    for (std::size_t g = 0; g < in.group.size(); ++g) {
      std::array<double, kNumKinds> a{};
      for (std::size_t c = 0; c < kNumKinds; ++c) {
        if (c != index_of(ComponentKind::kOther)) a[c] = n(rng);
        adv.component[c][g] = a[c];
      }
      std::vector<ComponentKind> dropped;
      adv.token.push_back(aggregate_token_advantage(in.group.rollouts[g].membership, a, in.config, &dropped));
    }
    max_rel_free = std::max(max_rel_free, rel(clipped_surrogate(in.ratios, adv.token, in.config.eps_clip),
                                              component_sum_loss(in.group, adv, in.ratios, in.config)));
  }
  const bool ok = max_scaled <= 1e-12 && max_oracle <= 1e-12 && max_rel_free <= 1e-12;
  return {ok, fmt("%d normalized instances (G in {2,3,8}, %d default-weighted): max err/term-magnitude %.1e, "
                  "vs direct oracle %.1e; 200 free-advantage instances max rel %.1e (limit 1e-12)",
                  instances, defaults, max_scaled, max_oracle, max_rel_free)};
}

Outcome grpo_reduction() {
  std::mt19937_64 rng(99);
  int objective_mismatch = 0;
  for (int i = 0; i < 100; ++i) {
    auto in = oracle::random_instance(rng, 2 + i % 7, false);
    std::vector<std::vector<double>> cur, ref;
    for (std::size_t g = 0; g < in.group.size(); ++g) {
      auto& ro = in.group.rollouts[g];
      ro.old_logprobs.assign(ro.length(), -0.7);
      cur.emplace_back();
      ref.emplace_back();
      for (std::size_t t = 0; t < ro.length(); ++t) {
        cur.back().push_back(-0.7 + std::log(in.ratios[g][t]));
        ref.back().push_back(-0.9);
      }
    }
    const auto a = cspo_objective(in.group, in.config.global_only(), cur, ref, AdvantageMode::kCspo);
    const auto b = cspo_objective(in.group, in.config, cur, ref, AdvantageMode::kGrpo);
    if (a.objective != b.objective || a.advantages.token != b.advantages.token) ++objective_mismatch;
  }
  int trajectory_mismatch = 0;
  TrainConfig config;
  config.task = TaskKind::kMixed;
  config.steps = 20;
  config.lr = 1.0;
  config.eval_samples = 32;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    config.mode = SimMode::kGrpo;
    config.cspo = CspoConfig{};
    const auto grpo = train(config, seed);
    config.mode = SimMode::kCspo;
    config.cspo = CspoConfig{}.global_only();
    const auto cspo = train(config, seed);
    if (run_records_jsonl(grpo) != run_records_jsonl(cspo) || grpo.final.mean_rewards != cspo.final.mean_rewards ||
        grpo.final.mean_global != cspo.final.mean_global) {
      ++trajectory_mismatch;
    }
  }
  return {objective_mismatch == 0 && trajectory_mismatch == 0,
          fmt("100 objectives: %d not bit-identical; 3 seeded 20-step runs: %d trajectories differ", objective_mismatch,
              trajectory_mismatch)};
}

double gradient_rel_error(ToyPolicy policy, const ToyPolicy& reference, const SampledGroup& sampled,
                          const CspoConfig& config, SimMode mode, std::mt19937_64& rng) {
  const auto analytic = objective_gradient(policy, reference, sampled, config, mode);
  double diff2 = 0.0, a2 = 0.0, f2 = 0.0;
  const double h = 1e-6;
  for (int k = 0; k < 300; ++k) {
    const std::size_t i = rng() % policy.logits.size();
    const double saved = policy.logits[i];
    policy.logits[i] = saved + h;
    const double up = objective_value(policy, reference, sampled, config, mode);
    policy.logits[i] = saved - h;
    const double down = objective_value(policy, reference, sampled, config, mode);
    policy.logits[i] = saved;
    const double fd = (up - down) / (2 * h);
    diff2 += (analytic[i] - fd) * (analytic[i] - fd);
    a2 += analytic[i] * analytic[i];
    f2 += fd * fd;
  }
  return std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(f2), 1e-12});
}

Outcome gradient_check() {
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> noise(0.0, 0.4);
  int instances = 0, active = 0, inactive = 0;
  double worst = 0.0;
  for (auto kind : {TaskKind::kStructure, TaskKind::kMixed}) {
    for (SimMode mode : {SimMode::kCspo, SimMode::kGrpo, SimMode::kCompSum}) {
      for (double beta : {0.0, 0.01}) {
        const auto task = make_task(kind);
        const auto old = initial_policy(task, 0.4, 2.0);
        const auto sampled = sample_group(old, task, 6, rng());
        auto reference = old;
        for (auto& v : reference.logits) v += noise(rng);
        auto current = old;
        for (auto& v : current.logits) v += noise(rng);
        CspoConfig config;
        config.beta = beta;

        // At the sampling policy every ratio is 1: clipping inactive.
        worst = std::max(worst, gradient_rel_error(old, reference, sampled, config, mode, rng));
        ++inactive;
        ++instances;

        const auto lp = sequence_logprobs(current, sampled.ids);
        bool clipped = false;
        for (std::size_t g = 0; g < lp.size() && !clipped; ++g) {
          for (std::size_t t = 0; t < lp[g].size(); ++t) {
            const double rho = std::exp(lp[g][t] - sampled.group.rollouts[g].old_logprobs[t]);
            if (std::abs(rho - 1.0) > config.eps_clip) clipped = true;
          }
        }
        worst = std::max(worst, gradient_rel_error(current, reference, sampled, config, mode, rng));
        active += clipped;
        ++instances;
      }
    }
  }
  const bool ok = instances >= 20 && active > 0 && inactive > 0 && worst < 1e-4;
  return {ok, fmt("%d instances (%d with clipped tokens, %d at rho=1), beta in {0,0.01}, worst rel err %.2e (<1e-4)",
                  instances, active, inactive, worst)};
}

Outcome ambiguity_witness() {
  const std::string& ref = fixtures::kRichTable;
  const auto& family = fixtures::mutation_family();
  auto find = [&](const char* name) {
    return *std::find_if(family.begin(), family.end(), [&](const auto& m) { return m.name == name; });
  };
  // Perfect, right content with wrong structure, and two content errors.
  const std::vector<std::string> sources = {ref, fixtures::apply(ref, find("span")), fixtures::apply(ref, find("cell_text")),
                                            fixtures::apply(ref, find("caption"))};
  const auto reference = analyze_source(ref);
  RolloutGroup group;
  std::vector<AnalyzedSource> analyzed;
  for (const auto& s : sources) {
    const auto scored = score_source(s, reference);
    const auto a = analyze_source(s);
    Rollout r;
    r.membership = a.map.assignment;
    for (std::size_t c = 0; c < kNumRewarded; ++c) r.rewards[c] = scored.rewards.values[c];
    r.global_reward = scored.global.total;
    group.rollouts.push_back(r);
    analyzed.push_back(a);
  }
  const CspoConfig config;
  const auto grpo = compute_grpo_advantages(group, config);
  const auto cspo = compute_advantages(group, config);
  const std::size_t witness = 1;
  const auto& ro = group.rollouts[witness];
  const double len = static_cast<double>(ro.length());
  const double n_cell = static_cast<double>(ro.count(ComponentKind::kCellApp));
  const double content_contribution =
      len / n_cell * config.component_weights[index_of(ComponentKind::kCellApp)] *
      cspo.of(ComponentKind::kCellApp, witness);
  double max_grpo = -1e300;
  for (std::size_t t = 0; t < ro.length(); ++t) {
    if (ro.membership[t] == ComponentKind::kCellApp) max_grpo = std::max(max_grpo, grpo.token[witness][t]);
  }
  const bool pattern = ro.rewards[index_of(ComponentKind::kCellApp)] == 1 && ro.rewards[index_of(ComponentKind::kStruct)] == 0;
  const bool ok = pattern && n_cell > 0 && max_grpo < 0.0 && content_contribution > 0.0;
  return {ok, fmt("witness rollout (struct=0, cell_app=1, global %.4f vs group %.4f/%.4f/%.4f): GRPO content-token "
                  "advantage max %+.4f (<0), CSPO content contribution %+.4f (>0)",
                  ro.global_reward, group.rollouts[0].global_reward, group.rollouts[2].global_reward,
                  group.rollouts[3].global_reward, max_grpo, content_contribution)};
}

Outcome sign_test() {
  const auto t0 = Clock::now();
  TrainConfig config;
  config.task = TaskKind::kStructure;
  config.steps = 50;
  config.lr = 1.0;
  config.eval_samples = 256;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  const auto summary = run_experiment({SimMode::kCspo, SimMode::kGrpo}, config, seeds);
  const auto& cspo = summary.modes[0];
  const auto& grpo = summary.modes[1];
  const std::size_t k = index_of(ComponentKind::kStruct);
  int wins = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    wins += cspo.runs[i].final.mean_rewards[k] > grpo.runs[i].final.mean_rewards[k];
  }
  // One-sided sign test; ties count against CSPO.
  double p = 0.0;
  for (int j = wins; j <= 10; ++j) p += std::tgamma(11.0) / (std::tgamma(j + 1.0) * std::tgamma(11.0 - j)) / 1024.0;
  const double secs = seconds_since(t0);
  auto conv = [&](const ModeSummary& m) { return m.convergence_step[k] ? static_cast<long>(*m.convergence_step[k]) : -1L; };
  return {p < 0.05 && secs < 600.0,
          fmt("structure task, 10 seeds x 50 steps: mean final struct CSPO %.3f vs GRPO %.3f (initial %.3f), wins %d/10, "
              "p=%.4f (<0.05), 0.95-convergence step CSPO %ld GRPO %ld, %.1fs (limit 600s)",
              cspo.final_rewards[k], grpo.final_rewards[k], cspo.initial_rewards[k], wins, p, conv(cspo), conv(grpo), secs)};
}

Outcome metrics_logic() {
  int invariant_violations = 0;
  int wrong_flips = 0;
  std::string detail;
  auto check = [&](const SampleMetrics& m) {
    if (m.y != (m.y_line & m.y_align & m.y_cell) || m.of != (m.s & m.c & m.y & m.r)) ++invariant_violations;
  };
  const auto identity = evaluate_sample(fixtures::kRichTable, fixtures::kRichTable);
  check(identity);
  const bool identity_ok = identity.of == 1 && identity.teds == 1.0;
  for (const auto& mut : fixtures::mutation_family()) {
    const auto m = evaluate_sample(fixtures::apply(fixtures::kRichTable, mut), fixtures::kRichTable);
    check(m);
    // Which of (s, c, y_line, y_align, y_cell, r) must be zero.
    std::array<int, 6> expect{1, 1, 1, 1, 1, 1};
    if (mut.name == "caption" || mut.name == "cell_text") expect[1] = 0;
    if (mut.name == "span") expect[0] = 0;
    if (mut.name == "vline" || mut.name == "hline") expect[2] = 0;
    if (mut.name == "align") expect[3] = 0;
    if (mut.name == "bold") expect[4] = 0;
    const std::array<int, 6> got{m.s, m.c, m.y_line, m.y_align, m.y_cell, m.r};
    if (got != expect) {
      ++wrong_flips;
      detail += " " + mut.name;
    }
  }
  fixtures::TableGenerator gen(77);
  for (int i = 0; i < 100; ++i) {
    const auto ref = gen.table();
    check(evaluate_sample(gen.malformed(ref), ref));
    check(evaluate_sample(gen.table(), ref));
  }
  const bool ok = identity_ok && invariant_violations == 0 && wrong_flips == 0;
  return {ok, fmt("%zu mutations, %d wrong flips%s; invariants violated %d times over 209 samples; identity OF=%d",
                  fixtures::mutation_family().size(), wrong_flips, detail.c_str(), invariant_violations, identity.of)};
}

Outcome parser_totality() {
  fixtures::TableGenerator gen(2025);
  int inputs = 0, roundtrip_fail = 0, partition_fail = 0, throws = 0;
  auto check = [&](const std::string& src) {
    ++inputs;
    try {
      const auto tokens = tokenize(src);
      if (tokens.reconstruct() != src) ++roundtrip_fail;
      const auto map = decompose(tokens);
      bool ok = map.assignment.size() == tokens.size();
      std::size_t total = 0;
      for (std::size_t k = 0; k < kNumTokenKinds; ++k) {
        total += map.counts[k];
        std::size_t covered = 0;
        for (const auto& [a, b] : map.spans[k]) {
          for (std::size_t i = a; i < b; ++i) ok = ok && map.assignment[i] == static_cast<ComponentKind>(k);
          covered += b - a;
        }
        ok = ok && covered == map.counts[k];
      }
      ok = ok && total == tokens.size();
      for (auto kind : map.assignment) ok = ok && kind != ComponentKind::kGlobal;
      if (!ok) ++partition_fail;
      analyze_source(src);
    } catch (const std::exception&) {
      ++throws;
    }
  };
  for (int i = 0; i < 200; ++i) {
    const auto t = gen.table();
    check(t);
    check(gen.malformed(t));
    check(gen.malformed(t));
  }
  const bool ok = roundtrip_fail == 0 && partition_fail == 0 && throws == 0;
  return {ok, fmt("%d inputs (200 generated + 400 malformed): %d round-trip failures, %d partition failures, %d throws",
                  inputs, roundtrip_fail, partition_fail, throws)};
}

}  // namespace

int main() {
  report("tree-edit oracle", ted_oracle);
  report("TEDS axioms", teds_axioms);
  report("normalization fixtures", normalization);
  report("per-component / aggregated loss identity at rho=1", appendix_identity);
  report("GRPO reduction", grpo_reduction);
  report("gradient check", gradient_check);
  report("reward-ambiguity witness", ambiguity_witness);
  report("directional trend sign test", sign_test);
  report("metrics logic", metrics_logic);
  report("parser totality and round-trip", parser_totality);
  std::printf("%s: %d failed\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failures);
  return failures ? 1 : 0;
}
