#include "convrl/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "convrl/reward.hpp"

namespace convrl {

using json = nlohmann::json;

namespace {

const std::set<std::string>& filler_words() {
  static const std::set<std::string> words = {
      "what",  "the",   "a",     "an",    "and",  "is",    "are",  "was",  "were",
      "how",   "why",   "when",  "where", "who",  "which", "i",    "you",  "of",
      "in",    "on",    "at",    "to",    "for",  "do",    "does", "did",  "my",
      "your",  "his",   "her",   "their", "our",  "let",   "me",   "now",  "okay",
      "ok",    "yes",   "no",    "tell",  "about", "since", "many", "some", "any"};
  return words;
}

const std::set<std::string>& pronoun_words() {
  static const std::set<std::string> words = {"it",   "its",  "this",  "that", "these",
                                              "those", "they", "them", "there", "one"};
  return words;
}

std::string strip_token_punct(const std::string& token) {
  std::string out;
  for (unsigned char c : token)
    if (!std::ispunct(c)) out.push_back(static_cast<char>(c));
  return out;
}

bool is_pronoun_token(const std::string& token) {
  return pronoun_words().count(to_lower(strip_token_punct(token))) > 0;
}

bool is_entity_token(const std::string& token) {
  const std::string clean = strip_token_punct(token);
  if (clean.size() < 3) return false;
  if (!std::isupper(static_cast<unsigned char>(clean[0]))) return false;
  return filler_words().count(to_lower(clean)) == 0 &&
         pronoun_words().count(to_lower(clean)) == 0;
}

// Normalized-token F1 between two strings; shared with the reward engine.
double token_f1(const std::string& a, const std::string& b) { return f1(a, b); }

std::vector<std::string> sentences_of(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    current.push_back(c);
    if (c == '.') {
      std::string s = trim(current);
      if (word_count(s) >= 2) out.push_back(s);
      current.clear();
    }
  }
  std::string tail = trim(current);
  if (word_count(tail) >= 2) out.push_back(tail);
  return out;
}

std::string make_search_emission(const std::string& query) {
  return std::string("<think>I need more information to answer. I will search for: ") +
         query + ".</think>\n<search>" + query + "</search>";
}

std::string make_answer_emission(const std::string& answer) {
  return std::string(
             "<think>I have gathered enough information to answer the question "
             "now.</think>\n<answer>") +
         answer + "</answer>";
}

}  // namespace

std::vector<std::string> extract_entities(const Conversation& conversation, int turn_index) {
  std::vector<std::string> entities;
  auto scan = [&](const std::string& text) {
    for (const auto& token : split_whitespace(text)) {
      if (!is_entity_token(token)) continue;
      std::string clean = strip_token_punct(token);
      auto it = std::find(entities.begin(), entities.end(), clean);
      if (it != entities.end()) entities.erase(it);  // re-insert at the back (recency)
      entities.push_back(std::move(clean));
    }
  };
  for (int t = 0; t < turn_index; ++t) {
    const Turn& turn = conversation.turns[static_cast<std::size_t>(t)];
    scan(turn.question);
    scan(turn.answer);
  }
  scan(conversation.turns[static_cast<std::size_t>(turn_index)].question);
  if (entities.size() > 8)
    entities.erase(entities.begin(), entities.end() - 8);
  return entities;
}

std::vector<std::string> compose_search_candidates(const Conversation& conversation,
                                                   int turn_index) {
  const std::string utterance =
      trim(conversation.turns[static_cast<std::size_t>(turn_index)].question);
  const auto entities = extract_entities(conversation, turn_index);
  const auto tokens = split_whitespace(utterance);

  std::vector<std::string> candidates;
  auto add = [&](std::string candidate) {
    candidate = trim(candidate);
    if (candidate.empty()) return;
    if (!contains_token(candidates, candidate)) candidates.push_back(std::move(candidate));
  };

  add(utterance);

  // Pronoun substitution: replace a pronoun token (or a "that/this <noun>"
  // pair) with a known entity; "there" becomes "in <entity>".
  std::size_t pronoun_positions = 0;
  for (std::size_t i = 0; i < tokens.size() && pronoun_positions < 2; ++i) {
    if (!is_pronoun_token(tokens[i])) continue;
    ++pronoun_positions;
    const std::string low = to_lower(strip_token_punct(tokens[i]));
    for (const auto& entity : entities) {
      auto substituted = [&](std::size_t span) {
        std::vector<std::string> out;
        for (std::size_t j = 0; j < tokens.size(); ++j) {
          if (j == i) {
            out.push_back(low == "there" ? "in " + entity : entity);
            j += span - 1;
          } else {
            out.push_back(tokens[j]);
          }
        }
        return join(out, " ");
      };
      add(substituted(1));
      if ((low == "that" || low == "this") && i + 1 < tokens.size()) add(substituted(2));
    }
  }

  for (const auto& entity : entities) add(utterance + " " + entity);

  // Content span: utterance minus filler and pronoun tokens.
  std::vector<std::string> content;
  for (const auto& token : tokens) {
    const std::string clean = strip_token_punct(token);
    if (clean.empty()) continue;
    if (filler_words().count(to_lower(clean)) || is_pronoun_token(token)) continue;
    content.push_back(clean);
  }
  if (!content.empty()) {
    add(join(content, " "));
    for (const auto& entity : entities) add(join(content, " ") + " " + entity);
  }

  return candidates;
}

MacroVocabulary build_vocabulary(const Episode& episode) {
  MacroVocabulary vocab;
  const std::string utterance = trim(episode.turn().question);

  for (auto& query : compose_search_candidates(episode.conversation(), episode.turn_index())) {
    MacroAction action;
    action.kind = MacroAction::Kind::kSearch;
    action.payload = query;
    action.emission = make_search_emission(query);
    vocab.actions.push_back(std::move(action));
  }

  // Answer candidates: sentences copied from retrieved passages, rank order.
  std::size_t entry_rank = 0;
  std::size_t answer_count = 0;
  for (const Segment& seg : episode.trajectory().segments) {
    if (seg.kind != SegmentKind::kInformation) continue;
    for (const std::string& entry : seg.passages) {
      for (const std::string& sentence : sentences_of(entry)) {
        if (answer_count >= 12) break;
        bool duplicate = false;
        for (const auto& a : vocab.actions)
          if (a.kind == MacroAction::Kind::kAnswer && a.payload == sentence) duplicate = true;
        if (duplicate) continue;
        MacroAction action;
        action.kind = MacroAction::Kind::kAnswer;
        action.payload = sentence;
        action.emission = make_answer_emission(sentence);
        action.provenance = 1.0 / static_cast<double>(1 + entry_rank);
        vocab.actions.push_back(std::move(action));
        ++answer_count;
      }
      ++entry_rank;
    }
  }

  {
    MacroAction abstain;
    abstain.kind = MacroAction::Kind::kAnswer;
    abstain.payload = "I don't know.";
    abstain.emission = make_answer_emission(abstain.payload);
    abstain.provenance = 0.0;
    vocab.actions.push_back(std::move(abstain));
  }
  {
    MacroAction think;
    think.kind = MacroAction::Kind::kThink;
    think.payload = "The user is asking: " + utterance +
                    " Let me consider the conversation context.";
    think.emission = "<think>" + think.payload + "</think>";
    vocab.actions.push_back(std::move(think));
  }
  {
    MacroAction terminate;
    terminate.kind = MacroAction::Kind::kTerminate;
    terminate.emission = "<answer></answer>";
    vocab.actions.push_back(std::move(terminate));
  }
  return vocab;
}

double rewrite_reachability(const std::vector<Conversation>& conversations) {
  std::size_t turns = 0, reachable = 0;
  for (const Conversation& conv : conversations) {
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
      ++turns;
      if (!conv.turns[t].rewrite) continue;
      for (const auto& candidate : compose_search_candidates(conv, static_cast<int>(t))) {
        if (token_f1(candidate, *conv.turns[t].rewrite) == 1.0) {
          ++reachable;
          break;
        }
      }
    }
  }
  if (turns == 0) throw std::invalid_argument("rewrite_reachability: no turns");
  return static_cast<double>(reachable) / static_cast<double>(turns);
}

namespace {

bool contains_any_entity(const std::string& text, const std::vector<std::string>& entities) {
  const auto tokens = split_whitespace(text);
  for (const auto& token : tokens) {
    const std::string clean = strip_token_punct(token);
    for (const auto& entity : entities)
      if (clean == entity) return true;
  }
  return false;
}

bool contains_pronoun(const std::string& text) {
  for (const auto& token : split_whitespace(text))
    if (is_pronoun_token(token)) return true;
  return false;
}

}  // namespace

FeatureVector policy_features(const Episode& episode, const MacroAction& action) {
  const std::string utterance = trim(episode.turn().question);
  const auto entities = extract_entities(episode.conversation(), episode.turn_index());

  bool has_info = false;
  std::vector<const std::string*> info_entries;
  for (const Segment& seg : episode.trajectory().segments) {
    if (seg.kind != SegmentKind::kInformation) continue;
    has_info = true;
    for (const auto& entry : seg.passages) info_entries.push_back(&entry);
  }

  const bool is_search = action.kind == MacroAction::Kind::kSearch;
  const bool is_answer = action.kind == MacroAction::Kind::kAnswer;
  const bool is_think = action.kind == MacroAction::Kind::kThink;
  const bool is_terminate = action.kind == MacroAction::Kind::kTerminate;
  const bool is_abstain = is_answer && action.provenance == 0.0;

  const double searches_norm =
      static_cast<double>(episode.searches_used()) /
      std::max<double>(1.0, 2.0);

  FeatureVector f(kPolicyFeatureDim, 0.0);
  if (is_search) {
    f[0] = 1.0;
    f[1] = token_f1(action.payload, utterance);
    f[2] = contains_any_entity(action.payload, entities) ? 1.0 : 0.0;
    f[3] = contains_pronoun(action.payload) ? 1.0 : 0.0;
    f[4] = has_info ? 1.0 : 0.0;
    f[5] = std::min<double>(12.0, static_cast<double>(word_count(action.payload))) / 12.0;
  }
  if (is_answer) {
    f[6] = 1.0;
    f[7] = has_info ? 1.0 : 0.0;
    double best_info = 0.0;
    for (const std::string* entry : info_entries)
      best_info = std::max(best_info, token_f1(action.payload, *entry));
    f[8] = best_info;
    f[9] = action.provenance;
    f[10] = token_f1(action.payload, utterance);
    f[11] = is_abstain ? 1.0 : 0.0;
    f[14] = searches_norm;
    f[15] = contains_any_entity(action.payload, entities) ? 1.0 : 0.0;
  }
  if (is_think) f[12] = 1.0;
  if (is_terminate) f[13] = 1.0;
  return f;
}

FeatureMatrix policy_feature_matrix(const Episode& episode, const MacroVocabulary& vocab) {
  FeatureMatrix matrix;
  matrix.reserve(vocab.actions.size());
  for (const MacroAction& action : vocab.actions)
    matrix.push_back(policy_features(episode, action));
  return matrix;
}

FeatureVector critic_features(const Episode& episode) {
  const std::string utterance = trim(episode.turn().question);
  const auto entities = extract_entities(episode.conversation(), episode.turn_index());

  FeatureVector f(kCriticFeatureDim, 0.0);
  f[0] = 1.0;
  f[1] = static_cast<double>(episode.searches_used()) / 2.0;
  f[2] = static_cast<double>(episode.invalid_actions()) / 3.0;

  double best_query_f1 = 0.0;
  bool any_entity_query = false;
  for (const auto& query : episode.trajectory().queries()) {
    best_query_f1 = std::max(best_query_f1, token_f1(query, utterance));
    if (contains_any_entity(query, entities)) any_entity_query = true;
  }
  double best_info = 0.0;
  bool has_info = false;
  std::size_t positions = 0;
  for (const Segment& seg : episode.trajectory().segments) {
    ++positions;
    if (seg.kind != SegmentKind::kInformation) continue;
    has_info = true;
    for (const auto& entry : seg.passages)
      best_info = std::max(best_info, token_f1(entry, utterance));
  }
  f[3] = has_info ? 1.0 : 0.0;
  f[4] = any_entity_query ? 1.0 : 0.0;
  f[5] = best_query_f1;
  f[6] = best_info;
  f[7] = std::min<double>(8.0, static_cast<double>(positions)) / 8.0;
  return f;
}

LinearSoftmaxPolicy::LinearSoftmaxPolicy(std::vector<double> weights)
    : weights_(std::move(weights)) {
  if (weights_.size() != kPolicyFeatureDim)
    throw std::invalid_argument("policy weight vector has wrong dimension");
}

std::vector<double> LinearSoftmaxPolicy::logits(const FeatureMatrix& features) const {
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto& row : features) {
    if (row.size() != weights_.size())
      throw std::invalid_argument("feature row has wrong dimension");
    double dot = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) dot += weights_[j] * row[j];
    out.push_back(dot);
  }
  return out;
}

std::vector<double> LinearSoftmaxPolicy::distribution(const FeatureMatrix& features) const {
  auto l = logits(features);
  if (l.empty()) throw std::invalid_argument("empty vocabulary");
  const double m = *std::max_element(l.begin(), l.end());
  double z = 0.0;
  for (double& v : l) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : l) v /= z;
  return l;
}

double LinearSoftmaxPolicy::log_prob(const FeatureMatrix& features, std::size_t action) const {
  if (action >= features.size())
    throw std::invalid_argument("action index outside the vocabulary");
  auto l = logits(features);
  const double m = *std::max_element(l.begin(), l.end());
  double z = 0.0;
  for (double v : l) z += std::exp(v - m);
  return l[action] - m - std::log(z);
}

std::vector<double> LinearSoftmaxPolicy::grad_log_prob(const FeatureMatrix& features,
                                                       std::size_t action) const {
  if (action >= features.size())
    throw std::invalid_argument("action index outside the vocabulary");
  const auto probs = distribution(features);
  std::vector<double> grad(weights_.size(), 0.0);
  for (std::size_t a = 0; a < features.size(); ++a) {
    const double coeff = (a == action ? 1.0 : 0.0) - probs[a];
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += coeff * features[a][j];
  }
  return grad;
}

std::size_t LinearSoftmaxPolicy::sample(const FeatureMatrix& features, Rng& rng) const {
  const auto probs = distribution(features);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double acc = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    acc += probs[a];
    if (u < acc) return a;
  }
  return probs.size() - 1;
}

std::size_t LinearSoftmaxPolicy::greedy(const FeatureMatrix& features) const {
  const auto l = logits(features);
  std::size_t best = 0;
  for (std::size_t a = 1; a < l.size(); ++a)
    if (l[a] > l[best]) best = a;
  return best;
}

LinearCritic::LinearCritic(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.size() != kCriticFeatureDim)
    throw std::invalid_argument("critic weight vector has wrong dimension");
}

double LinearCritic::value(const FeatureVector& features) const {
  if (features.size() != weights_.size())
    throw std::invalid_argument("critic feature vector has wrong dimension");
  double dot = 0.0;
  for (std::size_t j = 0; j < features.size(); ++j) dot += weights_[j] * features[j];
  return dot;
}

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> emissions)
    : emissions_(std::move(emissions)) {}

const std::string& ScriptedPolicy::next() {
  if (next_ >= emissions_.size())
    throw std::runtime_error("scripted policy exhausted before the episode terminated");
  return emissions_[next_++];
}

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  json record{{"format", "convrl-checkpoint"},
              {"feature_registry", checkpoint.feature_registry},
              {"step", checkpoint.step},
              {"policy_weights", checkpoint.policy_weights},
              {"critic_weights", checkpoint.critic_weights}};
  return record.dump(2) + "\n";
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  write_file(path, checkpoint_to_json(checkpoint));
}

Checkpoint load_checkpoint(const std::string& path) {
  json record;
  try {
    record = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint " + path + " is malformed: " + e.what());
  }
  Checkpoint checkpoint;
  checkpoint.feature_registry = record.at("feature_registry").get<std::string>();
  if (checkpoint.feature_registry != kFeatureRegistryVersion)
    throw std::runtime_error("checkpoint " + path + " uses feature registry '" +
                             checkpoint.feature_registry + "', this build expects '" +
                             kFeatureRegistryVersion + "'");
  checkpoint.step = record.at("step").get<std::uint64_t>();
  checkpoint.policy_weights = record.at("policy_weights").get<std::vector<double>>();
  checkpoint.critic_weights = record.at("critic_weights").get<std::vector<double>>();
  if (checkpoint.policy_weights.size() != kPolicyFeatureDim ||
      checkpoint.critic_weights.size() != kCriticFeatureDim)
    throw std::runtime_error("checkpoint " + path + " has wrong weight dimensions");
  return checkpoint;
}

}  // namespace convrl
