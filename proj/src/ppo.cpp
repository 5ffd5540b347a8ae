#include "convrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace convrl {

void PPOConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (actor_lr <= 0.0 || critic_lr <= 0.0)
    throw std::invalid_argument("step sizes must be > 0");
  if (kl_beta < 0.0) throw std::invalid_argument("kl_beta must be >= 0");
  if (rollouts_per_step < 1) throw std::invalid_argument("rollouts_per_step must be >= 1");
  if (update_epochs < 1) throw std::invalid_argument("update_epochs must be >= 1");
}

void RolloutBatch::validate() const {
  for (const TrajectoryRecord& traj : trajectories) {
    if (traj.positions.empty())
      throw std::invalid_argument("trajectory record has no positions");
    for (const PositionRecord& pos : traj.positions) {
      if (pos.masked) {
        if (!pos.candidates.empty())
          throw std::invalid_argument("masked position carries a candidate set");
      } else {
        if (pos.candidates.empty())
          throw std::invalid_argument("unmasked position lacks a candidate set");
        if (pos.chosen >= pos.candidates.size())
          throw std::invalid_argument("chosen action outside the candidate set");
      }
    }
  }
}

std::vector<double> compute_gae(const std::vector<double>& values, double terminal_reward,
                                double gamma, double lambda) {
  if (values.empty()) throw std::invalid_argument("compute_gae: empty value sequence");
  const std::size_t n = values.size();
  std::vector<double> deltas(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double next = i + 1 < n ? values[i + 1] : terminal_reward;
    deltas[i] = gamma * next - values[i];
  }
  std::vector<double> advantages(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc = deltas[i] + gamma * lambda * acc;
    advantages[i] = acc;
  }
  return advantages;
}

LossGrad clipped_surrogate(const RolloutBatch& batch, const LinearSoftmaxPolicy& policy,
                           const std::vector<std::vector<double>>& advantages,
                           double epsilon) {
  batch.validate();
  if (advantages.size() != batch.trajectories.size())
    throw std::invalid_argument("advantages are not aligned with the batch");

  LossGrad out;
  out.grad.assign(kPolicyFeatureDim, 0.0);
  double objective = 0.0;
  std::size_t unmasked = 0;

  for (std::size_t t = 0; t < batch.trajectories.size(); ++t) {
    const TrajectoryRecord& traj = batch.trajectories[t];
    if (advantages[t].size() != traj.positions.size())
      throw std::invalid_argument("advantage sequence length mismatch");
    for (std::size_t i = 0; i < traj.positions.size(); ++i) {
      const PositionRecord& pos = traj.positions[i];
      if (pos.masked) continue;
      ++unmasked;
      const double adv = advantages[t][i];
      const double logp = policy.log_prob(pos.candidates, pos.chosen);
      const double ratio = std::exp(logp - pos.old_log_prob);
      const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
      const double unclipped_term = ratio * adv;
      const double clipped_term = clipped * adv;
      objective += std::min(unclipped_term, clipped_term);

      // Gradient of the active branch; zero once the clip saturates.
      const bool unclipped_active = unclipped_term <= clipped_term;
      const bool inside = ratio > 1.0 - epsilon && ratio < 1.0 + epsilon;
      if (unclipped_active || inside) {
        const auto score = policy.grad_log_prob(pos.candidates, pos.chosen);
        const double coeff = ratio * adv;
        for (std::size_t j = 0; j < out.grad.size(); ++j)
          out.grad[j] -= coeff * score[j];  // negative: loss = -objective
      }
    }
  }

  if (unmasked == 0) return out;
  const double scale = 1.0 / static_cast<double>(unmasked);
  out.loss = -objective * scale;
  for (double& g : out.grad) g *= scale;
  return out;
}

LossGrad kl_penalty(const RolloutBatch& batch, const LinearSoftmaxPolicy& policy,
                    const LinearSoftmaxPolicy& reference, double beta) {
  batch.validate();
  LossGrad out;
  out.grad.assign(kPolicyFeatureDim, 0.0);
  if (beta == 0.0) return out;

  double total_kl = 0.0;
  std::size_t unmasked = 0;
  for (const TrajectoryRecord& traj : batch.trajectories) {
    for (const PositionRecord& pos : traj.positions) {
      if (pos.masked) continue;
      ++unmasked;
      const auto p = policy.distribution(pos.candidates);
      const auto q = reference.distribution(pos.candidates);
      // Expected feature vector under the current policy.
      std::vector<double> mean_phi(kPolicyFeatureDim, 0.0);
      for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t j = 0; j < mean_phi.size(); ++j)
          mean_phi[j] += p[a] * pos.candidates[a][j];
      for (std::size_t a = 0; a < p.size(); ++a) {
        const double log_ratio = std::log(p[a]) - std::log(q[a]);
        total_kl += p[a] * log_ratio;
        for (std::size_t j = 0; j < out.grad.size(); ++j)
          out.grad[j] += p[a] * (pos.candidates[a][j] - mean_phi[j]) * log_ratio;
      }
    }
  }

  if (unmasked == 0) return out;
  const double scale = beta / static_cast<double>(unmasked);
  out.loss = total_kl * scale;
  for (double& g : out.grad) g *= scale;
  return out;
}

double critic_value_loss(const std::vector<double>& values, double terminal_reward) {
  if (values.empty()) throw std::invalid_argument("critic_value_loss: empty value sequence");
  double total = 0.0;
  for (double v : values) {
    const double err = v - terminal_reward;
    total += err * err;
  }
  return 0.5 * total / static_cast<double>(values.size());
}

LossGrad critic_loss(const RolloutBatch& batch, const LinearCritic& critic) {
  batch.validate();
  LossGrad out;
  out.grad.assign(kCriticFeatureDim, 0.0);
  double total = 0.0;
  std::size_t positions = 0;
  for (const TrajectoryRecord& traj : batch.trajectories) {
    for (const PositionRecord& pos : traj.positions) {
      ++positions;
      const double err = critic.value(pos.critic_feats) - traj.reward;
      total += err * err;
      for (std::size_t j = 0; j < out.grad.size(); ++j)
        out.grad[j] += err * pos.critic_feats[j];
    }
  }
  if (positions == 0) return out;
  const double scale = 1.0 / static_cast<double>(positions);
  out.loss = 0.5 * total * scale;
  for (double& g : out.grad) g *= scale;
  return out;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

StepDiagnostics update_step(LinearSoftmaxPolicy& policy, LinearCritic& critic,
                            const LinearSoftmaxPolicy& reference, const RolloutBatch& batch,
                            const PPOConfig& config) {
  config.validate();
  batch.validate();

  StepDiagnostics diag;
  const std::size_t n_traj = batch.trajectories.size();
  if (n_traj == 0) return diag;

  std::size_t nonzero_intent = 0, nonzero_hit = 0;
  for (const TrajectoryRecord& traj : batch.trajectories) {
    diag.mean_total_reward += traj.reward;
    diag.mean_answer_f1 += traj.breakdown.answer_f1;
    diag.mean_intent += traj.breakdown.intent;
    if (traj.breakdown.intent > 0.0) ++nonzero_intent;
    if (traj.hit3 > 0) ++nonzero_hit;
  }
  diag.mean_total_reward /= static_cast<double>(n_traj);
  diag.mean_answer_f1 /= static_cast<double>(n_traj);
  diag.mean_intent /= static_cast<double>(n_traj);
  diag.frac_nonzero_intent = static_cast<double>(nonzero_intent) / static_cast<double>(n_traj);
  diag.frac_nonzero_hit = static_cast<double>(nonzero_hit) / static_cast<double>(n_traj);

  std::vector<std::vector<double>> advantages;
  advantages.reserve(n_traj);
  for (const TrajectoryRecord& traj : batch.trajectories) {
    std::vector<double> values;
    values.reserve(traj.positions.size());
    for (const PositionRecord& pos : traj.positions) values.push_back(pos.value);
    advantages.push_back(compute_gae(values, traj.reward, config.gamma, config.lambda));
  }
  if (config.normalize_advantages) {
    double mean = 0.0, count = 0.0;
    for (std::size_t t = 0; t < advantages.size(); ++t)
      for (std::size_t i = 0; i < advantages[t].size(); ++i)
        if (!batch.trajectories[t].positions[i].masked) {
          mean += advantages[t][i];
          count += 1.0;
        }
    if (count > 0.0) {
      mean /= count;
      double var = 0.0;
      for (std::size_t t = 0; t < advantages.size(); ++t)
        for (std::size_t i = 0; i < advantages[t].size(); ++i)
          if (!batch.trajectories[t].positions[i].masked)
            var += (advantages[t][i] - mean) * (advantages[t][i] - mean);
      const double stddev = std::sqrt(var / count) + 1e-8;
      for (auto& traj_adv : advantages)
        for (double& a : traj_adv) a = (a - mean) / stddev;
    }
  }

  const auto policy_backup = policy.weights();
  const auto critic_backup = critic.weights();

  for (std::size_t epoch = 0; epoch < config.update_epochs; ++epoch) {
    const LossGrad surrogate = clipped_surrogate(batch, policy, advantages, config.epsilon);
    const LossGrad kl_unit = kl_penalty(batch, policy, reference, 1.0);
    const LossGrad critic_lg = critic_loss(batch, critic);

    std::vector<double> actor_grad(kPolicyFeatureDim, 0.0);
    for (std::size_t j = 0; j < actor_grad.size(); ++j)
      actor_grad[j] = surrogate.grad[j] + config.kl_beta * kl_unit.grad[j];

    if (!all_finite(actor_grad) || !all_finite(critic_lg.grad) ||
        !std::isfinite(surrogate.loss) || !std::isfinite(critic_lg.loss)) {
      policy.weights() = policy_backup;
      critic.weights() = critic_backup;
      diag.aborted = true;
      return diag;
    }

    for (std::size_t j = 0; j < kPolicyFeatureDim; ++j)
      policy.weights()[j] -= config.actor_lr * actor_grad[j];
    for (std::size_t j = 0; j < kCriticFeatureDim; ++j)
      critic.weights()[j] -= config.critic_lr * critic_lg.grad[j];

    diag.actor_loss = surrogate.loss + config.kl_beta * kl_unit.loss;
    diag.critic_loss = critic_lg.loss;
    diag.kl = kl_unit.loss;
  }

  // Ratio statistics under the final parameters.
  double ratio_sum = 0.0;
  std::size_t unmasked = 0, clipped_count = 0;
  for (std::size_t t = 0; t < batch.trajectories.size(); ++t) {
    const TrajectoryRecord& traj = batch.trajectories[t];
    for (std::size_t i = 0; i < traj.positions.size(); ++i) {
      const PositionRecord& pos = traj.positions[i];
      if (pos.masked) continue;
      ++unmasked;
      const double ratio =
          std::exp(policy.log_prob(pos.candidates, pos.chosen) - pos.old_log_prob);
      ratio_sum += ratio;
      const double adv = advantages[t][i];
      const double clipped = std::clamp(ratio, 1.0 - config.epsilon, 1.0 + config.epsilon);
      if (ratio * adv > clipped * adv) ++clipped_count;
    }
  }
  if (unmasked > 0) {
    diag.mean_ratio = ratio_sum / static_cast<double>(unmasked);
    diag.clip_fraction = static_cast<double>(clipped_count) / static_cast<double>(unmasked);
  }
  return diag;
}

}  // namespace convrl
