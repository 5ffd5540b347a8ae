#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "convrl/corpus.hpp"

namespace convrl {

struct Turn {
  std::string question;                              // current user query q
  std::string answer;                                // gold answer y*
  std::optional<std::string> rewrite;                // gold rewrite q^rw
  std::optional<std::set<std::string>> relevant_ids; // labeled relevant passages
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;  // at least one; history at turn t = turns [0, t)
};

struct SyntheticSpec {
  std::size_t conversations = 100;
  std::size_t turns_per_conversation = 4;
  std::size_t entity_pool = 40;
  double anaphora_rate = 0.65;
  std::size_t distractors_per_conversation = 1;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  std::vector<Conversation> conversations;
  std::vector<Passage> corpus;
  Qrels qrels;
};

struct DatasetStats {
  std::size_t conversation_count = 0;
  std::size_t turn_count = 0;
  double mean_answer_words = 0.0;  // total answer words / turns
};

// One JSON object per conversation per line:
//   {"id": str, "turns": [{"question", "answer", "rewrite"?, "relevant_ids"?}]}
// Missing optional fields stay absent. Errors carry the offending line number
// or field name.
std::vector<Conversation> load_dataset(const std::string& path);
void save_dataset(const std::vector<Conversation>& conversations, const std::string& path);

DatasetStats dataset_stats(const std::vector<Conversation>& conversations);

// Deterministic given the seed. Every turn gets a gold rewrite that resolves
// anaphora and exactly one labeled relevant passage containing the gold answer
// verbatim; distractor passages share surface terms with the dialogue but
// never contain an answer.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace convrl
