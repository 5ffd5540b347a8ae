#include "convrl/reward.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

#include "convrl/util.hpp"

namespace convrl {

std::vector<std::string> normalize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;  // removed, not replaced: "don't" -> "dont"
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  std::vector<std::string> tokens;
  for (auto& t : split_whitespace(cleaned)) {
    if (t == "a" || t == "an" || t == "the") continue;
    tokens.push_back(std::move(t));
  }
  return tokens;
}

double f1(const std::string& a, const std::string& b) {
  const auto ta = normalize(a);
  const auto tb = normalize(b);
  if (ta.empty() || tb.empty()) return 0.0;

  std::map<std::string, std::size_t> counts;
  for (const auto& t : ta) ++counts[t];
  std::size_t overlap = 0;
  for (const auto& t : tb) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(ta.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(tb.size());
  return 2.0 * precision * recall / (precision + recall);
}

double answer_reward(const std::string& prediction, const std::string& gold) {
  return f1(prediction, gold);
}

double intent_reward(const std::vector<std::string>& queries, const std::string& rewrite) {
  double best = 0.0;
  for (const auto& q : queries) best = std::max(best, f1(q, rewrite));
  return best;
}

int hit_reward(const std::vector<RetrievalResult>& per_query_results,
               const std::set<std::string>& relevant, int n) {
  if (n < 1) throw std::invalid_argument("hit_reward: n must be >= 1");
  for (const auto& result : per_query_results)
    if (hit_at(result, relevant, static_cast<std::size_t>(n))) return 1;
  return 0;
}

RewardBreakdown total_reward(const Trajectory& trajectory, const Turn& turn,
                             const std::vector<RetrievalResult>& per_query_results,
                             const RewardConfig& config) {
  if (!trajectory.terminal)
    throw std::invalid_argument("total_reward requires a terminal trajectory");
  if (config.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");

  RewardBreakdown breakdown;
  if (auto answer = trajectory.answer_text())
    breakdown.answer_f1 = answer_reward(*answer, turn.answer);

  const auto queries = trajectory.queries();
  switch (config.intent_mode) {
    case IntentMode::kQueryF1: {
      if (turn.rewrite) {
        for (const auto& q : queries)
          breakdown.per_query.push_back(f1(q, *turn.rewrite));
      } else {
        breakdown.per_query.assign(queries.size(), 0.0);
      }
      break;
    }
    case IntentMode::kHitAtN: {
      const std::set<std::string> relevant =
          turn.relevant_ids ? *turn.relevant_ids : std::set<std::string>{};
      for (const auto& result : per_query_results)
        breakdown.per_query.push_back(static_cast<double>(
            hit_at(result, relevant, static_cast<std::size_t>(config.hit_n))));
      break;
    }
    case IntentMode::kOff:
      break;
  }
  for (double s : breakdown.per_query) breakdown.intent = std::max(breakdown.intent, s);

  const double alpha = config.intent_mode == IntentMode::kOff ? 0.0 : config.alpha;
  breakdown.total = breakdown.answer_f1 + alpha * breakdown.intent;
  return breakdown;
}

}  // namespace convrl
