#pragma once

#include <set>
#include <string>
#include <vector>

#include "convrl/corpus.hpp"
#include "convrl/dialogue.hpp"
#include "convrl/trajectory.hpp"

namespace convrl {

enum class IntentMode { kQueryF1, kHitAtN, kOff };

struct RewardConfig {
  double alpha = 0.2;  // weight of the intent component, >= 0
  IntentMode intent_mode = IntentMode::kQueryF1;
  int hit_n = 3;  // N for hit mode, >= 1
};

struct RewardBreakdown {
  double answer_f1 = 0.0;
  double intent = 0.0;  // max of per_query (0 when no queries)
  double total = 0.0;   // answer_f1 + alpha * intent
  std::vector<double> per_query;
};

// Word-level normalization: lowercase, strip punctuation, drop the articles
// "a"/"an"/"the", split on whitespace.
std::vector<std::string> normalize(const std::string& text);

// Multiset-overlap precision/recall over normalized tokens, F1 = 2PR/(P+R).
// 0 when either side normalizes to empty.
double f1(const std::string& a, const std::string& b);

double answer_reward(const std::string& prediction, const std::string& gold);

// Max over queries of f1(query, rewrite); 0 for an empty query list.
double intent_reward(const std::vector<std::string>& queries, const std::string& rewrite);

// 1 iff any query's top-n result contains a relevant id.
int hit_reward(const std::vector<RetrievalResult>& per_query_results,
               const std::set<std::string>& relevant, int n);

// Composite reward for a terminal trajectory. A missing answer scores 0 on the
// answer component; the intent component is paid regardless of how the episode
// ended.
RewardBreakdown total_reward(const Trajectory& trajectory, const Turn& turn,
                             const std::vector<RetrievalResult>& per_query_results,
                             const RewardConfig& config);

}  // namespace convrl
