#include "convrl/environment.hpp"

#include <stdexcept>

#include "convrl/prompts.hpp"
#include "convrl/util.hpp"

namespace convrl {

const std::string kInvalidActionNotice =
    "My previous action is invalid. If I want to search, I should put the query "
    "between <search> and </search>. If I want to give the final answer, I should "
    "put the answer between <answer> and </answer>.";

std::string search_limit_notice(std::size_t max_searches) {
  return "My previous action is invalid. I have already reached the limit of " +
         std::to_string(max_searches) +
         " search calls. If I want to give the final answer, I should put the "
         "answer between <answer> and </answer>.";
}

std::string render_context_block(const Conversation& conversation, int turn_index) {
  std::vector<std::string> lines;
  for (int t = 0; t < turn_index; ++t) {
    const Turn& turn = conversation.turns[static_cast<std::size_t>(t)];
    lines.push_back("User: " + turn.question);
    lines.push_back("Assistant: " + turn.answer);
  }
  return join(lines, "\n");
}

std::string build_prompt(const Conversation& conversation, int turn_index,
                         std::size_t max_prompt_tokens) {
  const Turn& turn = conversation.turns[static_cast<std::size_t>(turn_index)];
  auto instantiate = [&](int history_from) {
    std::vector<std::string> lines;
    for (int t = history_from; t < turn_index; ++t) {
      const Turn& h = conversation.turns[static_cast<std::size_t>(t)];
      lines.push_back("User: " + h.question);
      lines.push_back("Assistant: " + h.answer);
    }
    std::string prompt = policy_prompt_template();
    prompt = fill_placeholder(prompt, "{context_block}", join(lines, "\n"));
    prompt = fill_placeholder(prompt, "{last_user_utterance}", turn.question);
    return prompt;
  };

  // Drop oldest turns until the prompt fits the budget.
  int history_from = 0;
  std::string prompt = instantiate(history_from);
  while (word_count(prompt) > max_prompt_tokens && history_from < turn_index) {
    ++history_from;
    prompt = instantiate(history_from);
  }
  return prompt;
}

std::string render_information_entry(const Passage& passage) {
  std::string entry = passage.title.empty() ? passage.text : passage.title + ". " + passage.text;
  return to_single_line(entry);
}

Episode::Episode(const Conversation& conversation, int turn_index, std::string prompt)
    : conversation_(&conversation), turn_index_(turn_index), prompt_(std::move(prompt)) {}

Observation Episode::observation() const {
  return Observation{prompt_, render(trajectory_)};
}

SearchEnvironment::SearchEnvironment(const Index& index, EnvConfig config)
    : index_(&index), config_(config) {}

Episode SearchEnvironment::reset(const Conversation& conversation, int turn_index) const {
  if (turn_index < 0 || static_cast<std::size_t>(turn_index) >= conversation.turns.size())
    throw std::out_of_range("turn index " + std::to_string(turn_index) +
                            " out of range for conversation " + conversation.id + " with " +
                            std::to_string(conversation.turns.size()) + " turns");
  return Episode(conversation, turn_index,
                 build_prompt(conversation, turn_index, config_.max_prompt_tokens));
}

namespace {

// Classification of one policy emission.
enum class ActionKind { kSearch, kAnswer, kThinkOnly, kMalformed };

struct ParsedEmission {
  ActionKind kind = ActionKind::kMalformed;
  std::vector<Segment> segments;
};

ParsedEmission classify_emission(const std::string& emission) {
  ParsedEmission out;
  ParseResult parsed;
  try {
    ParseOptions opts;
    opts.max_searches = 1'000'000;  // episode budget is checked separately
    parsed = parse(emission, opts);
  } catch (const TrajectoryError&) {
    return out;
  }
  const auto& segs = parsed.trajectory.segments;
  if (segs.empty()) return out;

  std::size_t thinks = 0, searches = 0, answers = 0, others = 0;
  for (const Segment& s : segs) {
    switch (s.kind) {
      case SegmentKind::kThink: ++thinks; break;
      case SegmentKind::kSearch: ++searches; break;
      case SegmentKind::kAnswer: ++answers; break;
      default: ++others; break;
    }
  }
  if (others > 0) return out;  // e.g. a forged <information> block
  if (searches == 1 && answers == 0 && segs.back().kind == SegmentKind::kSearch)
    out.kind = ActionKind::kSearch;
  else if (searches == 0 && answers == 1)  // parse guarantees the answer is last
    out.kind = ActionKind::kAnswer;
  else if (searches == 0 && answers == 0)
    out.kind = ActionKind::kThinkOnly;
  else
    return out;
  out.segments = segs;
  return out;
}

}  // namespace

EnvStep SearchEnvironment::step(Episode& episode, const std::string& emission) const {
  if (episode.terminal_) throw std::logic_error("step on a terminal episode");

  EnvStep result;
  std::string effective = emission;
  bool truncated = false;
  if (word_count(emission) > config_.max_emission_tokens) {
    auto words = split_whitespace(emission);
    words.resize(config_.max_emission_tokens);
    effective = join(words, " ");
    truncated = true;
  }

  auto inject_notice = [&](const std::string& text) {
    episode.trajectory_.segments.push_back(Segment::notice(text));
    ++episode.invalid_actions_;
    result.injection = InjectionKind::kInvalidActionNotice;
    if (episode.invalid_actions_ >= config_.max_invalid_actions) {
      // Forced termination with no answer; the reward falls through to 0 on
      // the answer component.
      episode.terminal_ = true;
    }
  };

  const ParsedEmission action =
      truncated ? ParsedEmission{} : classify_emission(effective);

  switch (action.kind) {
    case ActionKind::kSearch: {
      if (episode.searches_used_ >= config_.max_searches) {
        // Refused attempts stay in the stream verbatim but never reach the
        // search engine and do not count as search calls.
        episode.trajectory_.segments.push_back(Segment::raw(effective));
        inject_notice(search_limit_notice(config_.max_searches));
        break;
      }
      for (const Segment& s : action.segments) episode.trajectory_.segments.push_back(s);
      ++episode.searches_used_;
      const std::string query = action.segments.back().query();
      RetrievalResult retrieved = index_->search(query, config_.top_k);
      std::vector<std::string> entries;
      for (const RetrievalHit& hit : retrieved.hits)
        entries.push_back(render_information_entry(*index_->find(hit.passage_id)));
      episode.query_results_.push_back(std::move(retrieved));
      episode.trajectory_.segments.push_back(Segment::information(std::move(entries)));
      result.injection = InjectionKind::kInformation;
      break;
    }
    case ActionKind::kAnswer: {
      for (const Segment& s : action.segments) episode.trajectory_.segments.push_back(s);
      episode.terminal_ = true;
      episode.trajectory_.terminal = true;
      break;
    }
    case ActionKind::kThinkOnly: {
      for (const Segment& s : action.segments) episode.trajectory_.segments.push_back(s);
      inject_notice(kInvalidActionNotice);
      break;
    }
    case ActionKind::kMalformed: {
      episode.trajectory_.segments.push_back(Segment::raw(effective));
      inject_notice(kInvalidActionNotice);
      break;
    }
  }

  episode.trajectory_.terminal = episode.terminal_;
  result.observation = episode.observation();
  result.terminal = episode.terminal_;
  result.searches_used = episode.searches_used_;
  return result;
}

}  // namespace convrl
