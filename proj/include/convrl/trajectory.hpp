#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace convrl {

// Tag vocabulary of the interaction protocol (bit-exact).
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kSearchOpen = "<search>";
inline constexpr std::string_view kSearchClose = "</search>";
inline constexpr std::string_view kInformationOpen = "<information>";
inline constexpr std::string_view kInformationClose = "</information>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

enum class SegmentKind { kThink, kSearch, kInformation, kAnswer, kRaw, kNotice };
enum class Origin { kPolicy, kEnvironment };

// One trajectory element. Raw holds an unstructured policy emission (a
// malformed action kept verbatim in the stream); Notice holds environment
// recovery text. Both render without tags and are never produced by parse().
struct Segment {
  SegmentKind kind = SegmentKind::kThink;
  Origin origin = Origin::kPolicy;
  std::string text;                   // think/search/answer content, raw/notice text
  std::vector<std::string> passages;  // information entries, single non-empty lines

  static Segment think(std::string text);
  static Segment search(std::string query);
  static Segment information(std::vector<std::string> passages);
  static Segment answer(std::string text);
  static Segment raw(std::string text);
  static Segment notice(std::string text);

  // Trimmed query of a search segment.
  std::string query() const;
};

struct Trajectory {
  std::vector<Segment> segments;
  bool terminal = false;

  bool has_answer() const;
  std::optional<std::string> answer_text() const;
  std::vector<std::string> queries() const;  // trimmed search queries, in order
  std::size_t search_count() const;
  std::size_t think_word_count() const;  // reasoning length in word tokens
};

class TrajectoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public TrajectoryError {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

class StructureError : public TrajectoryError {
 public:
  using TrajectoryError::TrajectoryError;
};

class LimitError : public TrajectoryError {
 public:
  using TrajectoryError::TrajectoryError;
};

struct ParseOptions {
  std::size_t max_searches = 2;
};

struct ParseResult {
  Trajectory trajectory;
  std::vector<std::string> warnings;  // e.g. ignored free text after </answer>
};

// Total over all inputs: returns a trajectory or throws a typed error
// (ParseError with byte offset, StructureError, LimitError). Inside a tag
// block, everything up to that block's own closing tag is content, so stray
// tag-like text inside <think> stays think text.
ParseResult parse(std::string_view text, const ParseOptions& options = {});

// Canonical rendering: segments joined by a single newline. Inverse of parse
// on canonical strings. Throws StructureError when trajectory invariants are
// violated.
std::string render(const Trajectory& trajectory);

// Throws StructureError on invariant violations (information placement and
// origin, answer position/terminal flag, empty queries, origin consistency).
void validate(const Trajectory& trajectory);

// Macro word tokenization of the rendered stream: tags are single tokens,
// everything else splits on whitespace.
std::vector<std::string> token_stream(const Trajectory& trajectory);

struct LossMask {
  std::vector<std::uint8_t> weights;  // aligned with token_stream

  std::size_t size() const { return weights.size(); }
  std::size_t masked_count() const;
  std::size_t unmasked_count() const { return size() - masked_count(); }
};

// Weight 0 for every token of environment-injected segments (content and tag
// tokens alike), weight 1 for all policy-emitted tokens.
LossMask loss_mask(const Trajectory& trajectory);

}  // namespace convrl
