#include "convrl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "convrl/util.hpp"

namespace convrl {

using json = nlohmann::json;

std::vector<std::string> Index::tokenize(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  return split_whitespace(cleaned);
}

Index Index::build(const std::vector<Passage>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("corpus is empty");

  Index index;
  index.passages_ = corpus;
  // Sort by id so that retrieval is independent of input order.
  std::sort(index.passages_.begin(), index.passages_.end(),
            [](const Passage& a, const Passage& b) { return a.id < b.id; });
  for (std::size_t i = 0; i + 1 < index.passages_.size(); ++i) {
    if (index.passages_[i].id == index.passages_[i + 1].id)
      throw std::invalid_argument("duplicate passage id: " + index.passages_[i].id);
  }

  double total_len = 0.0;
  for (std::uint32_t doc = 0; doc < index.passages_.size(); ++doc) {
    const Passage& p = index.passages_[doc];
    if (trim(p.text).empty())
      throw std::invalid_argument("passage has empty text: " + p.id);
    index.id_to_doc_[p.id] = doc;

    auto terms = tokenize(p.title.empty() ? p.text : p.title + " " + p.text);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : terms) ++tf[t];
    for (const auto& [term, count] : tf)
      index.postings_[term].push_back({doc, count});
    index.doc_len_.push_back(terms.size());
    total_len += static_cast<double>(terms.size());
  }
  index.avg_len_ = total_len / static_cast<double>(index.passages_.size());
  return index;
}

double Index::idf(const std::string& term) const {
  auto it = postings_.find(term);
  const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  const double n = static_cast<double>(passages_.size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Index::bm25_term(double idf_t, double tf, double doc_len) const {
  const double norm = kK1 * (1.0 - kB + kB * doc_len / avg_len_);
  return idf_t * tf * (kK1 + 1.0) / (tf + norm);
}

RetrievalResult Index::search(const std::string& query, std::size_t k) const {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  RetrievalResult result;
  result.query = query;

  auto raw_terms = tokenize(query);
  // Deduplicate preserving first occurrence; each distinct term scores once.
  std::vector<std::string> terms;
  for (auto& t : raw_terms)
    if (!contains_token(terms, t)) terms.push_back(std::move(t));
  if (terms.empty()) return result;

  std::vector<double> scores(passages_.size(), 0.0);
  std::vector<bool> touched(passages_.size(), false);
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double idf_t = idf(term);
    for (const Posting& post : it->second) {
      scores[post.doc] += bm25_term(idf_t, post.tf, static_cast<double>(doc_len_[post.doc]));
      touched[post.doc] = true;
    }
  }

  std::vector<std::uint32_t> docs;
  for (std::uint32_t d = 0; d < passages_.size(); ++d)
    if (touched[d]) docs.push_back(d);
  std::sort(docs.begin(), docs.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return passages_[a].id < passages_[b].id;
  });
  if (docs.size() > k) docs.resize(k);
  for (std::uint32_t d : docs) result.hits.push_back({passages_[d].id, scores[d]});
  return result;
}

double Index::score(const std::string& passage_id,
                    const std::vector<std::string>& query_terms) const {
  auto it = id_to_doc_.find(passage_id);
  if (it == id_to_doc_.end()) throw std::invalid_argument("unknown passage id: " + passage_id);
  std::vector<std::string> terms;
  for (const auto& t : query_terms)
    if (!contains_token(terms, t)) terms.push_back(t);
  double s = 0.0;
  for (const auto& term : terms) {
    auto pit = postings_.find(term);
    if (pit == postings_.end()) continue;
    for (const Posting& post : pit->second) {
      if (post.doc != it->second) continue;
      s += bm25_term(idf(term), post.tf, static_cast<double>(doc_len_[post.doc]));
      break;
    }
  }
  return s;
}

const Passage* Index::find(const std::string& id) const {
  auto it = id_to_doc_.find(id);
  return it == id_to_doc_.end() ? nullptr : &passages_[it->second];
}

double ndcg_at(const RetrievalResult& result, const std::set<std::string>& relevant,
               std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  const std::size_t depth = std::min(k, result.hits.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (relevant.count(result.hits[r].passage_id))
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, relevant.size());
  for (std::size_t r = 0; r < ideal; ++r)
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

double recall_at(const RetrievalResult& result, const std::set<std::string>& relevant,
                 std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (relevant.empty()) return 0.0;
  std::size_t found = 0;
  const std::size_t depth = std::min(k, result.hits.size());
  for (std::size_t r = 0; r < depth; ++r)
    if (relevant.count(result.hits[r].passage_id)) ++found;
  return static_cast<double>(found) / static_cast<double>(relevant.size());
}

double mrr(const RetrievalResult& result, const std::set<std::string>& relevant) {
  if (relevant.empty()) return 0.0;
  for (std::size_t r = 0; r < result.hits.size(); ++r)
    if (relevant.count(result.hits[r].passage_id))
      return 1.0 / static_cast<double>(r + 1);
  return 0.0;
}

int hit_at(const RetrievalResult& result, const std::set<std::string>& relevant,
           std::size_t n) {
  if (n == 0) throw std::invalid_argument("n must be >= 1");
  const std::size_t depth = std::min(n, result.hits.size());
  for (std::size_t r = 0; r < depth; ++r)
    if (relevant.count(result.hits[r].passage_id)) return 1;
  return 0;
}

const std::set<std::string>* Qrels::find(const std::string& conversation_id,
                                         int turn_index) const {
  auto it = labels.find({conversation_id, turn_index});
  return it == labels.end() ? nullptr : &it->second;
}

void Qrels::add(const std::string& conversation_id, int turn_index,
                const std::string& passage_id) {
  labels[{conversation_id, turn_index}].insert(passage_id);
}

std::vector<Passage> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<Passage> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) +
                               ": malformed JSON: " + e.what());
    }
    for (const char* field : {"id", "text"}) {
      if (!record.contains(field))
        throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                 ": missing field '" + field + "'");
    }
    Passage p;
    p.id = record.at("id").get<std::string>();
    p.title = record.value("title", std::string{});
    p.text = record.at("text").get<std::string>();
    corpus.push_back(std::move(p));
  }
  return corpus;
}

void save_corpus_jsonl(const std::vector<Passage>& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const Passage& p : corpus) {
    json record{{"id", p.id}, {"title", p.title}, {"text", p.text}};
    out << record.dump() << "\n";
  }
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open qrels file: " + path);
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string conv_id, pid;
    int turn = -1, rel = -1;
    if (!(ss >> conv_id >> turn >> pid >> rel))
      throw std::runtime_error("qrels line " + std::to_string(line_no) +
                               ": expected 'conversation_id turn_index passage_id relevance'");
    if (rel > 0) qrels.add(conv_id, turn, pid);
  }
  return qrels;
}

void save_qrels(const Qrels& qrels, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write qrels file: " + path);
  for (const auto& [key, ids] : qrels.labels)
    for (const auto& pid : ids)
      out << key.first << "\t" << key.second << "\t" << pid << "\t1\n";
}

void validate_qrels(const Qrels& qrels, const Index& index) {
  for (const auto& [key, ids] : qrels.labels) {
    for (const auto& pid : ids) {
      if (!index.contains(pid))
        throw std::runtime_error("qrels references unknown passage id '" + pid +
                                 "' for conversation " + key.first + " turn " +
                                 std::to_string(key.second));
    }
  }
}

}  // namespace convrl
