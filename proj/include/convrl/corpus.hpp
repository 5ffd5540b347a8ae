#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace convrl {

struct Passage {
  std::string id;
  std::string title;  // may be empty
  std::string text;   // non-empty after trim
};

struct RetrievalHit {
  std::string passage_id;
  double score = 0.0;
};

// Ranked search output: scores non-increasing, ids unique, size <= requested k.
struct RetrievalResult {
  std::string query;
  std::vector<RetrievalHit> hits;
};

// Immutable BM25 inverted index. Safe for concurrent read-only searches.
class Index {
 public:
  static constexpr double kK1 = 1.2;
  static constexpr double kB = 0.75;

  // Lowercase, punctuation-strip tokenization; no stemming or stopwords.
  static std::vector<std::string> tokenize(std::string_view text);

  // Throws std::invalid_argument on an empty corpus or a duplicate id.
  static Index build(const std::vector<Passage>& corpus);

  // Top-k by BM25, ties broken by ascending passage id. A query that
  // normalizes to zero terms yields an empty result.
  RetrievalResult search(const std::string& query, std::size_t k) const;

  double score(const std::string& passage_id, const std::vector<std::string>& query_terms) const;

  std::size_t doc_count() const { return passages_.size(); }
  double avg_doc_len() const { return avg_len_; }
  const std::vector<Passage>& passages() const { return passages_; }  // sorted by id
  const Passage* find(const std::string& id) const;
  bool contains(const std::string& id) const { return find(id) != nullptr; }

 private:
  struct Posting {
    std::uint32_t doc = 0;  // index into passages_
    std::uint32_t tf = 0;
  };

  double idf(const std::string& term) const;
  double bm25_term(double idf_t, double tf, double doc_len) const;

  std::vector<Passage> passages_;
  std::vector<std::size_t> doc_len_;
  double avg_len_ = 0.0;
  std::map<std::string, std::vector<Posting>> postings_;
  std::map<std::string, std::uint32_t> id_to_doc_;
};

// ---- IR metrics (binary gain). All return values in [0, 1]. ----

// Binary-gain DCG@k / ideal DCG@k; 0 when the relevant set is empty.
double ndcg_at(const RetrievalResult& result, const std::set<std::string>& relevant,
               std::size_t k);
double recall_at(const RetrievalResult& result, const std::set<std::string>& relevant,
                 std::size_t k);
// 1 / rank of first relevant hit; 0 when none retrieved.
double mrr(const RetrievalResult& result, const std::set<std::string>& relevant);
// 1 iff any relevant id appears in the top n hits.
int hit_at(const RetrievalResult& result, const std::set<std::string>& relevant,
           std::size_t n);

// ---- Relevance judgments ----

struct Qrels {
  // (conversation id, turn index) -> relevant passage ids
  std::map<std::pair<std::string, int>, std::set<std::string>> labels;

  const std::set<std::string>* find(const std::string& conversation_id, int turn_index) const;
  void add(const std::string& conversation_id, int turn_index, const std::string& passage_id);
};

// ---- File formats ----

// One JSON object per line with fields `id`, `title`, `text`.
std::vector<Passage> load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const std::vector<Passage>& corpus, const std::string& path);

// Tab-separated: conversation_id  turn_index  passage_id  relevance(0/1).
Qrels load_qrels(const std::string& path);
void save_qrels(const Qrels& qrels, const std::string& path);

// Throws if any judged passage id is missing from the corpus.
void validate_qrels(const Qrels& qrels, const Index& index);

}  // namespace convrl
