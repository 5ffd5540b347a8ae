#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convrl/policy.hpp"
#include "convrl/reward.hpp"

namespace convrl {

struct PPOConfig {
  double epsilon = 0.2;  // clip range, in (0, 1)
  double gamma = 1.0;
  double lambda = 1.0;
  double kl_beta = 1e-3;
  double actor_lr = 0.5;
  double critic_lr = 0.2;
  std::size_t rollouts_per_step = 8;
  std::size_t update_epochs = 2;
  bool normalize_advantages = false;

  void validate() const;  // throws std::invalid_argument
};

// One macro-token position. Environment-injected positions are masked: they
// carry no action distribution and contribute nothing to the actor loss.
struct PositionRecord {
  bool masked = false;
  FeatureMatrix candidates;  // |vocabulary| x d, empty when masked
  std::size_t chosen = 0;
  double old_log_prob = 0.0;  // under the behavior snapshot; 0 when masked
  double value = 0.0;         // V_psi at collection time
  FeatureVector critic_feats;
};

struct TrajectoryRecord {
  std::vector<PositionRecord> positions;
  double reward = 0.0;  // terminal R(tau)
  RewardBreakdown breakdown;
  int hit3 = 0;  // hit@3 of the issued queries, for diagnostics
};

struct RolloutBatch {
  std::vector<TrajectoryRecord> trajectories;

  void validate() const;  // throws std::invalid_argument on shape violations
};

// delta_i = gamma * V_{i+1} - V_i with V_T := terminal_reward;
// A_i = sum_{j >= i} (gamma * lambda)^{j-i} delta_j.
// At gamma = lambda = 1 this reduces to A_i = R - V_i.
std::vector<double> compute_gae(const std::vector<double>& values, double terminal_reward,
                                double gamma, double lambda);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Negative clipped objective averaged over unmasked positions, so that
// minimizing the loss maximizes the objective. `advantages` is aligned with
// the batch (one vector per trajectory).
LossGrad clipped_surrogate(const RolloutBatch& batch, const LinearSoftmaxPolicy& policy,
                           const std::vector<std::vector<double>>& advantages,
                           double epsilon);

// Exact categorical KL(policy || reference) over each unmasked position's
// vocabulary, averaged, scaled by beta.
LossGrad kl_penalty(const RolloutBatch& batch, const LinearSoftmaxPolicy& policy,
                    const LinearSoftmaxPolicy& reference, double beta);

// 1/2 mean (V_i - R)^2 over the given positions.
double critic_value_loss(const std::vector<double>& values, double terminal_reward);

// Same loss over every position of the batch with values recomputed from the
// current critic; gradient with respect to the critic weights.
LossGrad critic_loss(const RolloutBatch& batch, const LinearCritic& critic);

struct StepDiagnostics {
  std::uint64_t step = 0;
  double mean_total_reward = 0.0;
  double mean_answer_f1 = 0.0;
  double mean_intent = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_ratio = 1.0;
  double frac_nonzero_intent = 0.0;
  double frac_nonzero_hit = 0.0;
  bool aborted = false;  // non-finite gradient, parameters left untouched
};

// Full-batch analytic gradient update: the actor ascends the clipped objective
// minus the KL penalty, the critic descends its regression loss. Atomic: a
// non-finite gradient aborts the whole step and restores the inputs.
StepDiagnostics update_step(LinearSoftmaxPolicy& policy, LinearCritic& critic,
                            const LinearSoftmaxPolicy& reference, const RolloutBatch& batch,
                            const PPOConfig& config);

}  // namespace convrl
