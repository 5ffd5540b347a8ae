#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convrl/corpus.hpp"
#include "convrl/dialogue.hpp"
#include "convrl/trajectory.hpp"

namespace convrl {

struct EnvConfig {
  std::size_t top_k = 3;              // passages injected per search
  std::size_t max_searches = 2;       // search-call budget per episode
  std::size_t max_invalid_actions = 3;  // then forced termination, empty answer
  std::size_t max_prompt_tokens = 3500;   // word-token budget of the prompt
  std::size_t max_emission_tokens = 512;  // per-step policy emission budget
};

// Recovery text injected after a malformed action.
extern const std::string kInvalidActionNotice;
// Recovery text for a search attempt beyond the budget; {max_searches} is
// substituted with the configured limit.
std::string search_limit_notice(std::size_t max_searches);

// Prior turns as alternating "User:"/"Assistant:" lines.
std::string render_context_block(const Conversation& conversation, int turn_index);

// Instantiates the instruction template. History beyond max_prompt_tokens is
// truncated oldest-first at turn boundaries.
std::string build_prompt(const Conversation& conversation, int turn_index,
                         std::size_t max_prompt_tokens);

// Single-line rendering of a retrieved passage inside <information>.
std::string render_information_entry(const Passage& passage);

struct Observation {
  std::string prompt;           // immutable within an episode
  std::string trajectory_text;  // rendered trajectory so far

  std::string full() const { return prompt + trajectory_text; }
};

enum class InjectionKind { kNone, kInformation, kInvalidActionNotice };

struct EnvStep {
  Observation observation;
  InjectionKind injection = InjectionKind::kNone;
  bool terminal = false;
  std::size_t searches_used = 0;
};

// Single-owner per-episode state.
class Episode {
 public:
  Episode(const Conversation& conversation, int turn_index, std::string prompt);

  const Conversation& conversation() const { return *conversation_; }
  const Turn& turn() const { return conversation_->turns[static_cast<std::size_t>(turn_index_)]; }
  int turn_index() const { return turn_index_; }
  const std::string& prompt() const { return prompt_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const std::vector<RetrievalResult>& query_results() const { return query_results_; }
  std::size_t searches_used() const { return searches_used_; }
  std::size_t invalid_actions() const { return invalid_actions_; }
  bool terminal() const { return terminal_; }
  Observation observation() const;

 private:
  friend class SearchEnvironment;

  const Conversation* conversation_;
  int turn_index_;
  std::string prompt_;
  Trajectory trajectory_;
  std::vector<RetrievalResult> query_results_;
  std::size_t searches_used_ = 0;
  std::size_t invalid_actions_ = 0;
  bool terminal_ = false;
};

// Episode mechanics over a shared read-only index. Stateless apart from the
// index reference; episodes are independent.
class SearchEnvironment {
 public:
  SearchEnvironment(const Index& index, EnvConfig config = {});

  const EnvConfig& config() const { return config_; }

  // Throws std::out_of_range on a bad turn index.
  Episode reset(const Conversation& conversation, int turn_index) const;

  // Advances one policy emission. Throws std::logic_error on a terminal
  // episode.
  EnvStep step(Episode& episode, const std::string& emission) const;

 private:
  const Index* index_;
  EnvConfig config_;
};

}  // namespace convrl
