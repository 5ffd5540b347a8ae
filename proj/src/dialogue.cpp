#include "convrl/dialogue.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "convrl/util.hpp"

namespace convrl {

using json = nlohmann::json;

std::vector<Conversation> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<Conversation> conversations;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = "dataset line " + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(where + ": malformed JSON: " + e.what());
    }
    if (!record.contains("id")) throw std::runtime_error(where + ": missing field 'id'");
    if (!record.contains("turns") || !record["turns"].is_array() || record["turns"].empty())
      throw std::runtime_error(where + ": missing or empty field 'turns'");

    Conversation conv;
    conv.id = record.at("id").get<std::string>();
    for (const json& jt : record.at("turns")) {
      Turn turn;
      if (!jt.contains("question"))
        throw std::runtime_error(where + ": turn missing field 'question'");
      if (!jt.contains("answer"))
        throw std::runtime_error(where + ": turn missing field 'answer'");
      turn.question = jt.at("question").get<std::string>();
      if (trim(turn.question).empty())
        throw std::runtime_error(where + ": turn has empty 'question'");
      turn.answer = jt.at("answer").get<std::string>();
      if (jt.contains("rewrite")) {
        turn.rewrite = jt.at("rewrite").get<std::string>();
        if (trim(*turn.rewrite).empty())
          throw std::runtime_error(where + ": turn has empty 'rewrite'");
      }
      if (jt.contains("relevant_ids")) {
        std::set<std::string> ids;
        for (const json& jid : jt.at("relevant_ids")) ids.insert(jid.get<std::string>());
        turn.relevant_ids = std::move(ids);
      }
      conv.turns.push_back(std::move(turn));
    }
    conversations.push_back(std::move(conv));
  }
  return conversations;
}

void save_dataset(const std::vector<Conversation>& conversations, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const Conversation& conv : conversations) {
    json turns = json::array();
    for (const Turn& t : conv.turns) {
      json jt{{"question", t.question}, {"answer", t.answer}};
      if (t.rewrite) jt["rewrite"] = *t.rewrite;
      if (t.relevant_ids) jt["relevant_ids"] = *t.relevant_ids;
      turns.push_back(std::move(jt));
    }
    out << json{{"id", conv.id}, {"turns", std::move(turns)}}.dump() << "\n";
  }
}

DatasetStats dataset_stats(const std::vector<Conversation>& conversations) {
  if (conversations.empty()) throw std::invalid_argument("dataset_stats: empty input");
  DatasetStats stats;
  stats.conversation_count = conversations.size();
  std::size_t total_words = 0;
  for (const Conversation& conv : conversations) {
    stats.turn_count += conv.turns.size();
    for (const Turn& t : conv.turns) total_words += word_count(t.answer);
  }
  stats.mean_answer_words =
      static_cast<double>(total_words) / static_cast<double>(stats.turn_count);
  return stats;
}

namespace {

const std::vector<std::string> kAttributes = {
    "capital",       "currency",       "anthem",      "motto",
    "highest mountain", "longest river", "national dish", "national flower",
    "founder",       "main export",    "oldest city", "national bird"};

// Value template per attribute; {W}/{w} is a unique generated word.
std::string attribute_value(std::size_t att, const std::string& cap_word,
                            const std::string& low_word) {
  switch (att) {
    case 0: return cap_word + " City";
    case 1: return low_word + " crown";
    case 2: return "Song of " + cap_word;
    case 3: return "Unity Through " + cap_word;
    case 4: return "Mount " + cap_word;
    case 5: return cap_word + " River";
    case 6: return low_word + " stew";
    case 7: return low_word + " lily";
    case 8: return cap_word + " the Elder";
    case 9: return low_word + " ore";
    case 10: return "Old " + cap_word;
    default: return low_word + " heron";
  }
}

const std::vector<std::string> kSyllables = {"ra", "ve", "lo", "mi", "ta", "su",
                                             "ne", "ko", "za", "du", "pa", "li"};

std::string syllable_word(std::size_t idx) {
  std::string w = kSyllables[idx % 12] + kSyllables[(idx / 12) % 12] +
                  kSyllables[(idx / 144) % 12];
  return w;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::vector<std::string> make_entity_names(std::size_t pool) {
  static const std::vector<std::string> prefixes = {
      "Vel", "Dor", "Mar", "Tal", "Bren", "Cas", "Fen",  "Gal", "Hol", "Jas",
      "Kel", "Lor", "Nor", "Osk", "Pel",  "Quin", "Ras", "Sol", "Tor", "Ulm"};
  static const std::vector<std::string> suffixes = {
      "donia", "mark", "landia", "via", "tania", "gora",
      "heim",  "vania", "stria", "mora", "dalia", "bruk"};
  if (pool > prefixes.size() * suffixes.size())
    throw std::invalid_argument("entity pool too large (max 240)");
  std::vector<std::string> names;
  names.reserve(pool);
  for (std::size_t i = 0; i < pool; ++i)
    names.push_back(prefixes[i % prefixes.size()] + suffixes[i / prefixes.size()]);
  return names;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.conversations < 1 || spec.turns_per_conversation < 1 || spec.entity_pool < 1 ||
      spec.distractors_per_conversation < 1)
    throw std::invalid_argument("synthetic spec counts must be >= 1");
  if (spec.anaphora_rate < 0.0 || spec.anaphora_rate > 1.0)
    throw std::invalid_argument("anaphora rate must lie in [0, 1]");

  Rng rng(spec.seed);
  const auto entities = make_entity_names(spec.entity_pool);
  // Attributes already asked per entity, across all conversations; reuse is a
  // fallback when the pool is exhausted.
  std::vector<std::set<std::size_t>> used(entities.size());

  auto has_unused = [&](std::size_t e) { return used[e].size() < kAttributes.size(); };
  auto pick_entity = [&](std::size_t avoid) -> std::size_t {
    std::vector<std::size_t> eligible;
    for (std::size_t e = 0; e < entities.size(); ++e)
      if (e != avoid && has_unused(e)) eligible.push_back(e);
    if (eligible.empty()) {
      std::uniform_int_distribution<std::size_t> any(0, entities.size() - 1);
      return any(rng);
    }
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    return eligible[pick(rng)];
  };
  auto pick_attribute = [&](std::size_t e) -> std::size_t {
    std::vector<std::size_t> eligible;
    for (std::size_t a = 0; a < kAttributes.size(); ++a)
      if (!used[e].count(a)) eligible.push_back(a);
    if (eligible.empty()) {
      std::uniform_int_distribution<std::size_t> any(0, kAttributes.size() - 1);
      return any(rng);
    }
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    std::size_t a = eligible[pick(rng)];
    used[e].insert(a);
    return a;
  };

  SyntheticData data;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> style(0, 2);

  for (std::size_t c = 0; c < spec.conversations; ++c) {
    Conversation conv;
    {
      std::ostringstream id;
      id << "conv-" << std::setw(4) << std::setfill('0') << (c + 1);
      conv.id = id.str();
    }
    std::size_t cur_entity = entities.size();  // none yet
    std::vector<std::pair<std::size_t, std::size_t>> asked;  // (entity, attribute) per turn

    for (std::size_t t = 0; t < spec.turns_per_conversation; ++t) {
      const bool want_anaphora = t > 0 && coin(rng) < spec.anaphora_rate;
      const bool anaphoric =
          want_anaphora && cur_entity < entities.size() && has_unused(cur_entity);
      if (!anaphoric) cur_entity = pick_entity(cur_entity);
      const std::size_t att = pick_attribute(cur_entity);
      const std::string& entity = entities[cur_entity];
      const std::string& att_name = kAttributes[att];
      asked.emplace_back(cur_entity, att);

      const std::size_t value_idx = cur_entity * kAttributes.size() + att;
      const std::string low_word = syllable_word(value_idx);
      const std::string value = attribute_value(att, capitalize(low_word), low_word);

      Turn turn;
      if (!anaphoric) {
        turn.question = "What is the " + att_name + " of " + entity + "?";
        turn.rewrite = turn.question;
      } else {
        switch (style(rng)) {
          case 0:
            turn.question = "What is the " + att_name + " there?";
            turn.rewrite = "What is the " + att_name + " in " + entity + "?";
            break;
          case 1:
            turn.question = "What is the " + att_name + " of it?";
            turn.rewrite = "What is the " + att_name + " of " + entity + "?";
            break;
          default:
            turn.question = "And what is the " + att_name + " of that country?";
            turn.rewrite = "And what is the " + att_name + " of " + entity + "?";
            break;
        }
      }
      turn.answer = "The " + att_name + " of " + entity + " is " + value + ".";

      Passage passage;
      {
        std::ostringstream pid;
        pid << "p-" << std::setw(4) << std::setfill('0') << (c + 1) << "-" << t;
        passage.id = pid.str();
      }
      passage.title = entity;
      passage.text = turn.answer + " " + entity + " is a country in the " +
                     syllable_word(720 + cur_entity) + " region.";
      turn.relevant_ids = std::set<std::string>{passage.id};
      data.qrels.add(conv.id, static_cast<int>(t), passage.id);
      data.corpus.push_back(std::move(passage));
      conv.turns.push_back(std::move(turn));
    }

    for (std::size_t k = 0; k < spec.distractors_per_conversation; ++k) {
      Passage distractor;
      {
        std::ostringstream pid;
        pid << "d-" << std::setw(4) << std::setfill('0') << (c + 1) << "-" << k;
        distractor.id = pid.str();
      }
      const auto& [ent_idx, att_idx] = asked[k % asked.size()];
      const std::string& entity = entities[ent_idx];
      const std::string& att_name = kAttributes[att_idx];
      distractor.title = entity + " travel notes";
      distractor.text = "Many travelers ask about " + entity + " and its " + att_name +
                        ". A typical travel guide covers the " + att_name + " of " +
                        entity + " and of nearby countries, but the details vary from "
                        "source to source.";
      data.corpus.push_back(std::move(distractor));
    }

    data.conversations.push_back(std::move(conv));
  }
  return data;
}

}  // namespace convrl
