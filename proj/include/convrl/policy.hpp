#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convrl/dialogue.hpp"
#include "convrl/environment.hpp"
#include "convrl/util.hpp"

namespace convrl {

// Bump when the feature maps change; checkpoints are tied to it.
inline constexpr const char* kFeatureRegistryVersion = "fr1";
inline constexpr std::size_t kPolicyFeatureDim = 16;
inline constexpr std::size_t kCriticFeatureDim = 8;

struct MacroAction {
  enum class Kind { kSearch, kAnswer, kThink, kTerminate };

  Kind kind = Kind::kThink;
  std::string payload;    // query / answer / think text
  std::string emission;   // full policy emission
  double provenance = 0;  // answers: 1/(1+rank of source passage entry)
};

// Per-step ordered action set; deterministic given the episode state.
struct MacroVocabulary {
  std::vector<MacroAction> actions;

  std::size_t size() const { return actions.size(); }
};

// Capitalized non-stopword tokens from the history and current question,
// deduplicated; at most the eight most recent are kept.
std::vector<std::string> extract_entities(const Conversation& conversation, int turn_index);

// Search-query candidates composed from the last utterance, history entities,
// pronoun substitution, and concatenation.
std::vector<std::string> compose_search_candidates(const Conversation& conversation,
                                                   int turn_index);

MacroVocabulary build_vocabulary(const Episode& episode);

// Fraction of turns whose gold rewrite is matched exactly (word-level F1 == 1)
// by some composed search candidate. Turns without a rewrite count as
// unreachable.
double rewrite_reachability(const std::vector<Conversation>& conversations);

using FeatureVector = std::vector<double>;
using FeatureMatrix = std::vector<FeatureVector>;  // |vocabulary| x d

FeatureVector policy_features(const Episode& episode, const MacroAction& action);
FeatureMatrix policy_feature_matrix(const Episode& episode, const MacroVocabulary& vocab);

// Observation-prefix features for the critic at the episode's current state.
FeatureVector critic_features(const Episode& episode);

class LinearSoftmaxPolicy {
 public:
  LinearSoftmaxPolicy() : weights_(kPolicyFeatureDim, 0.0) {}
  explicit LinearSoftmaxPolicy(std::vector<double> weights);

  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& weights() { return weights_; }

  std::vector<double> logits(const FeatureMatrix& features) const;
  // Softmax over the vocabulary; sums to 1.
  std::vector<double> distribution(const FeatureMatrix& features) const;
  double log_prob(const FeatureMatrix& features, std::size_t action) const;
  // Softmax score function: phi(o, a) - E_{a' ~ pi}[phi(o, a')].
  std::vector<double> grad_log_prob(const FeatureMatrix& features, std::size_t action) const;
  std::size_t sample(const FeatureMatrix& features, Rng& rng) const;
  std::size_t greedy(const FeatureMatrix& features) const;  // ties -> lowest index

  // Frozen copy, unaffected by later updates.
  LinearSoftmaxPolicy snapshot() const { return *this; }

 private:
  std::vector<double> weights_;
};

class LinearCritic {
 public:
  LinearCritic() : weights_(kCriticFeatureDim, 0.0) {}
  explicit LinearCritic(std::vector<double> weights);

  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& weights() { return weights_; }

  double value(const FeatureVector& features) const;
  // d value / d weights = features.
  FeatureVector grad_value(const FeatureVector& features) const { return features; }

  LinearCritic snapshot() const { return *this; }

 private:
  std::vector<double> weights_;
};

// Replays a fixed emission script regardless of observations.
class ScriptedPolicy {
 public:
  explicit ScriptedPolicy(std::vector<std::string> emissions);

  // Throws std::runtime_error when the script is exhausted.
  const std::string& next();
  bool exhausted() const { return next_ >= emissions_.size(); }

 private:
  std::vector<std::string> emissions_;
  std::size_t next_ = 0;
};

struct Checkpoint {
  std::string feature_registry = kFeatureRegistryVersion;
  std::uint64_t step = 0;
  std::vector<double> policy_weights;
  std::vector<double> critic_weights;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
// Throws on a missing file, malformed record, or feature-registry mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace convrl
