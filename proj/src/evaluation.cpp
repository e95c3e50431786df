#include "coirl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "coirl/environments.hpp"
#include "coirl/error.hpp"

namespace coirl {

namespace {

constexpr double kDegenerateGap = 1e-12;

}  // namespace

Holdout::Holdout(const Expert& expert, const std::vector<Context>& contexts, kernels::Backend backend)
    : expert_(&expert), backend_(backend) {
  if (contexts.empty()) throw InvalidArgument("holdout needs at least one context");
  entries_ = kernels::map(backend, contexts.size(), [&](std::size_t i) {
    HoldoutEntry e{contexts[i], expert.solve(contexts[i]), 0.0, {}};
    const Vector w = reward_weights(expert.w_star(), e.context);
    e.v_rand = w.dot(uniform_policy_feature_expectations(e.expert->mdp, *e.expert->mdp.xi));
    e.occupancy = discounted_occupancy(e.expert->mdp, e.expert->plan.policy, *e.expert->mdp.xi);
    return e;
  });
}

Holdout Holdout::sample(const Expert& expert, std::size_t n, std::uint64_t seed, kernels::Backend backend) {
  Rng rng(seed);
  std::vector<Context> contexts;
  contexts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) contexts.push_back(sample_context(rng, expert.cmdp().d()));
  return Holdout(expert, contexts, backend);
}

Holdout::Score Holdout::score(std::size_t i, const DeterministicPolicy& policy, const Matrix* W) const {
  const auto& e = entries_[i];
  const auto& mdp = e.expert->mdp;
  const Vector mu = feature_expectations(mdp, policy);
  const double v = reward_weights(expert_->w_star(), e.context).dot(mu);
  Score s{};
  s.loss = W ? reward_weights(*W, e.context).dot(mu - e.expert->mu) : 0.0;
  const double gap = e.expert->value - e.v_rand;
  s.degenerate = !(gap > kDegenerateGap);
  s.rel = s.degenerate ? 0.0 : std::clamp((v - e.v_rand) / gap, 0.0, 1.0);
  const auto& expert_pi = e.expert->plan.policy;
  double acc = 0.0, uni = 0.0;
  for (std::size_t st = 0; st < policy.size(); ++st) {
    if (policy[st] != expert_pi[st]) continue;
    acc += e.occupancy[static_cast<Eigen::Index>(st)];
    uni += 1.0;
  }
  s.acc = std::clamp(acc, 0.0, 1.0);
  s.acc_uniform = uni / static_cast<double>(policy.size());
  return s;
}

double Holdout::rel_value(std::size_t i, const DeterministicPolicy& policy) const {
  const Score s = score(i, policy, nullptr);
  return s.degenerate ? std::numeric_limits<double>::quiet_NaN() : s.rel;
}

EvalResult Holdout::reduce(const std::vector<Score>& scores, bool with_loss) const {
  EvalResult r;
  double loss = 0.0, rel = 0.0, acc = 0.0, uni = 0.0;
  std::size_t used = 0;
  for (const auto& s : scores) {
    loss += s.loss;
    acc += s.acc;
    uni += s.acc_uniform;
    if (s.degenerate) {
      ++r.skipped;
      continue;
    }
    rel += s.rel;
    ++used;
  }
  if (r.skipped > 0) {
    std::cerr << "warning: " << r.skipped << " holdout context(s) skipped, optimal and random values coincide\n";
  }
  const double n = static_cast<double>(scores.size());
  if (with_loss) r.loss = loss / n;
  r.rel_value = used > 0 ? rel / static_cast<double>(used) : 0.0;
  r.accuracy = acc / n;
  r.accuracy_uniform = uni / n;
  return r;
}

EvalResult Holdout::evaluate(const Matrix& W) const {
  const PlannerConfig& cfg = expert_->planner();
  const auto scores = kernels::map(backend_, entries_.size(), [&](std::size_t i) {
    const auto& e = entries_[i];
    const auto plan = value_iteration(e.expert->mdp.with_weights(reward_weights(W, e.context)), cfg);
    return score(i, plan.policy, &W);
  });
  return reduce(scores, true);
}

EvalResult Holdout::evaluate(const PolicySource& policy) const {
  const auto scores = kernels::map(backend_, entries_.size(), [&](std::size_t i) {
    return score(i, policy(i, entries_[i].context), nullptr);
  });
  return reduce(scores, false);
}

}  // namespace coirl
