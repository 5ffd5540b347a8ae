#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convrl/client.hpp"
#include "convrl/environment.hpp"
#include "convrl/policy.hpp"
#include "convrl/ppo.hpp"
#include "convrl/reward.hpp"

namespace convrl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Paper-scale hyperparameters kept as documented configuration keys; they are
// not consumed by the desk-scale trainer.
struct PaperScaleConfig {
  std::size_t batch_size = 512;
  std::size_t micro_batch_size = 64;
  double actor_learning_rate = 1e-6;
};

struct RunConfig {
  std::string dataset_path;
  std::string corpus_path;
  std::string qrels_path;  // optional
  std::string output_dir;

  EnvConfig env;
  RewardConfig reward;
  PPOConfig ppo;
  PaperScaleConfig paper_scale;
  ClientConfig judge_client;    // endpoint optional
  ClientConfig rewrite_client;  // endpoint optional

  std::uint64_t total_steps = 500;
  std::uint64_t checkpoint_interval = 50;
  std::uint64_t seed = 7;

  // Flat key/value sections; throws ConfigError naming the offending field.
  static RunConfig from_string(const std::string& text);
  static RunConfig from_file(const std::string& path);
  void validate(bool check_paths) const;
};

// One greedy- or sample-decoded episode turned into a PPO trajectory record.
TrajectoryRecord collect_episode(const SearchEnvironment& env, const Conversation& conversation,
                                 int turn_index, const LinearSoftmaxPolicy& policy,
                                 const LinearCritic& critic, const RewardConfig& reward_config,
                                 const Qrels* qrels, Rng& rng, bool greedy);

struct TrainResult {
  std::string selected_checkpoint_path;
  std::uint64_t selected_step = 0;
  bool collapse_detected = false;
  std::vector<StepDiagnostics> diagnostics;
  std::string diagnostics_path;
  std::vector<std::string> checkpoint_paths;
};

// Checkpoint selection: last checkpoint unless the final window's mean reward
// fell below half of the best window's mean.
struct CheckpointChoice {
  std::uint64_t step = 0;
  bool collapse_detected = false;
};
CheckpointChoice select_checkpoint(const std::vector<StepDiagnostics>& diagnostics,
                                   std::uint64_t checkpoint_interval);

TrainResult run_training(const RunConfig& config);

// ---- Evaluation ----

struct PerTurnEval {
  std::string conversation_id;
  int turn_index = 0;
  std::string question;
  std::string gold_answer;
  std::string predicted_answer;
  double answer_f1 = 0.0;
  double intent_f1 = 0.0;
  int searches_used = 0;
  int reasoning_tokens = 0;
  std::optional<std::string> first_query;
  std::optional<double> ndcg3;
  std::optional<double> recall10;
  std::optional<double> mrr_score;
  std::optional<int> hit3;
};

struct EvalReport {
  double alpha = 0.0;
  std::string intent_mode;
  std::uint64_t checkpoint_step = 0;
  std::string label;
  std::vector<PerTurnEval> per_turn;

  double mean_answer_f1() const;
  double mean_intent_f1() const;
  double mean_reasoning_tokens() const;
  std::map<int, std::size_t> searches_histogram() const;
  // Turns grouped by first-query hit@3 (no-search turns land in bin 0);
  // the two bins partition all turns.
  struct HitBin {
    std::size_t count = 0;
    double mean_answer_f1 = 0.0;
  };
  std::map<int, HitBin> hit_bins() const;
};

// A policy for evaluation drivers: the next emission given the episode state.
using EmissionFn = std::function<std::string(const Episode&)>;

EvalReport evaluate_episodes(const std::vector<Conversation>& conversations,
                             const SearchEnvironment& env, const RewardConfig& reward_config,
                             const Qrels* qrels, const EmissionFn& emit);

// Greedy (argmax) decoding of a checkpointed macro policy.
EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<Conversation>& conversations,
                    const SearchEnvironment& env, const RewardConfig& reward_config,
                    const Qrels* qrels);

std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);
void save_eval_report(const EvalReport& report, const std::string& path);
EvalReport load_eval_report(const std::string& path);

// ---- Comparison reports ----

struct ReportBundle {
  std::string json;  // machine-readable tables
  std::string text;  // plain-text tables
};

// (a) reasoning-length distribution per run, (b) searches-used vs answer-F1,
// (c) alpha-keyed comparison of the runs.
ReportBundle build_report(const std::vector<EvalReport>& reports);

// ---- Judged evaluation ----

struct JudgeSummary {
  std::size_t judged_true = 0;
  std::size_t judged_false = 0;
  std::size_t invalid = 0;  // excluded from the accuracy denominator
  double accuracy = 0.0;
  std::vector<std::string> warnings;
};

JudgeSummary judge_report(const EvalReport& report, RemoteClient& client);

}  // namespace convrl
