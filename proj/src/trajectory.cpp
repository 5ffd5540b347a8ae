#include "convrl/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "convrl/util.hpp"

namespace convrl {

Segment Segment::think(std::string text) {
  Segment s;
  s.kind = SegmentKind::kThink;
  s.text = std::move(text);
  return s;
}

Segment Segment::search(std::string query) {
  Segment s;
  s.kind = SegmentKind::kSearch;
  s.text = std::move(query);
  return s;
}

Segment Segment::information(std::vector<std::string> passages) {
  Segment s;
  s.kind = SegmentKind::kInformation;
  s.origin = Origin::kEnvironment;
  s.passages = std::move(passages);
  return s;
}

Segment Segment::answer(std::string text) {
  Segment s;
  s.kind = SegmentKind::kAnswer;
  s.text = std::move(text);
  return s;
}

Segment Segment::raw(std::string text) {
  Segment s;
  s.kind = SegmentKind::kRaw;
  s.text = std::move(text);
  return s;
}

Segment Segment::notice(std::string text) {
  Segment s;
  s.kind = SegmentKind::kNotice;
  s.origin = Origin::kEnvironment;
  s.text = std::move(text);
  return s;
}

std::string Segment::query() const { return trim(text); }

bool Trajectory::has_answer() const {
  return !segments.empty() && segments.back().kind == SegmentKind::kAnswer;
}

std::optional<std::string> Trajectory::answer_text() const {
  if (!has_answer()) return std::nullopt;
  return segments.back().text;
}

std::vector<std::string> Trajectory::queries() const {
  std::vector<std::string> out;
  for (const Segment& s : segments)
    if (s.kind == SegmentKind::kSearch) out.push_back(s.query());
  return out;
}

std::size_t Trajectory::search_count() const {
  std::size_t n = 0;
  for (const Segment& s : segments)
    if (s.kind == SegmentKind::kSearch) ++n;
  return n;
}

std::size_t Trajectory::think_word_count() const {
  std::size_t n = 0;
  for (const Segment& s : segments)
    if (s.kind == SegmentKind::kThink) n += word_count(s.text);
  return n;
}

ParseError::ParseError(const std::string& what, std::size_t offset)
    : TrajectoryError(what + " (byte offset " + std::to_string(offset) + ")"),
      offset_(offset) {}

namespace {

struct TagSpec {
  SegmentKind kind;
  std::string_view open;
  std::string_view close;
};

constexpr std::array<TagSpec, 4> kTags = {{
    {SegmentKind::kThink, kThinkOpen, kThinkClose},
    {SegmentKind::kSearch, kSearchOpen, kSearchClose},
    {SegmentKind::kInformation, kInformationOpen, kInformationClose},
    {SegmentKind::kAnswer, kAnswerOpen, kAnswerClose},
}};

constexpr std::array<std::string_view, 8> kAllTags = {
    kThinkOpen,       kThinkClose,       kSearchOpen, kSearchClose,
    kInformationOpen, kInformationClose, kAnswerOpen, kAnswerClose,
};

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view prefix) {
  return text.substr(pos, prefix.size()) == prefix;
}

// Position of the next recognized tag at or after pos, npos if none.
std::size_t next_tag_pos(std::string_view text, std::size_t pos) {
  while (true) {
    pos = text.find('<', pos);
    if (pos == std::string_view::npos) return std::string_view::npos;
    for (std::string_view tag : kAllTags)
      if (starts_with_at(text, pos, tag)) return pos;
    ++pos;
  }
}

const char* kind_name(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kThink: return "think";
    case SegmentKind::kSearch: return "search";
    case SegmentKind::kInformation: return "information";
    case SegmentKind::kAnswer: return "answer";
    case SegmentKind::kRaw: return "raw";
    case SegmentKind::kNotice: return "notice";
  }
  return "?";
}

std::vector<std::string> split_information_entries(std::string_view content) {
  if (content.empty()) return {};
  return split_lines(content);
}

}  // namespace

ParseResult parse(std::string_view text, const ParseOptions& options) {
  ParseResult result;
  Trajectory& traj = result.trajectory;
  std::size_t pos = 0;
  bool saw_answer = false;

  while (pos < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[pos]))) {
      ++pos;
      continue;
    }

    const TagSpec* open_tag = nullptr;
    for (const TagSpec& spec : kTags)
      if (starts_with_at(text, pos, spec.open)) {
        open_tag = &spec;
        break;
      }

    if (open_tag != nullptr) {
      if (saw_answer)
        throw StructureError("answer segment must be final, found <" +
                             std::string(kind_name(open_tag->kind)) + "> after it");
      const std::size_t close_pos = text.find(open_tag->close, pos + open_tag->open.size());
      if (close_pos == std::string_view::npos)
        throw ParseError("unmatched opening tag " + std::string(open_tag->open), pos);
      std::string content(
          text.substr(pos + open_tag->open.size(), close_pos - pos - open_tag->open.size()));
      switch (open_tag->kind) {
        case SegmentKind::kThink:
          traj.segments.push_back(Segment::think(std::move(content)));
          break;
        case SegmentKind::kSearch: {
          if (trim(content).empty())
            throw StructureError("search query is empty");
          traj.segments.push_back(Segment::search(std::move(content)));
          break;
        }
        case SegmentKind::kInformation: {
          if (traj.segments.empty() ||
              traj.segments.back().kind != SegmentKind::kSearch)
            throw StructureError("information segment must immediately follow a search call");
          traj.segments.push_back(
              Segment::information(split_information_entries(content)));
          break;
        }
        case SegmentKind::kAnswer:
          traj.segments.push_back(Segment::answer(std::move(content)));
          saw_answer = true;
          break;
        default:
          break;
      }
      pos = close_pos + open_tag->close.size();
      continue;
    }

    // A closing tag with no opener.
    for (const TagSpec& spec : kTags)
      if (starts_with_at(text, pos, spec.close))
        throw ParseError("unmatched closing tag " + std::string(spec.close), pos);

    // Free text at the top level.
    if (saw_answer) {
      const std::size_t next = next_tag_pos(text, pos);
      result.warnings.push_back("ignored free text after </answer> at byte offset " +
                                std::to_string(pos));
      pos = next == std::string_view::npos ? text.size() : next;
      continue;
    }
    throw ParseError("text outside recognized tags", pos);
  }

  if (traj.search_count() > options.max_searches)
    throw LimitError("trajectory contains " + std::to_string(traj.search_count()) +
                     " search calls, limit is " + std::to_string(options.max_searches));

  traj.terminal = saw_answer;
  return result;
}

void validate(const Trajectory& trajectory) {
  const auto& segs = trajectory.segments;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const Segment& s = segs[i];
    const bool env_kind =
        s.kind == SegmentKind::kInformation || s.kind == SegmentKind::kNotice;
    if (env_kind && s.origin != Origin::kEnvironment)
      throw StructureError(std::string(kind_name(s.kind)) +
                           " segment must be environment-injected");
    if (!env_kind && s.origin != Origin::kPolicy)
      throw StructureError(std::string(kind_name(s.kind)) +
                           " segment must be policy-emitted");

    switch (s.kind) {
      case SegmentKind::kThink:
        if (s.text.find(kThinkClose) != std::string::npos)
          throw StructureError("think content contains </think>");
        break;
      case SegmentKind::kSearch:
        if (trim(s.text).empty()) throw StructureError("search query is empty");
        if (s.text.find(kSearchClose) != std::string::npos)
          throw StructureError("search content contains </search>");
        break;
      case SegmentKind::kInformation:
        if (i == 0 || segs[i - 1].kind != SegmentKind::kSearch)
          throw StructureError("information segment must immediately follow a search call");
        for (const std::string& entry : s.passages) {
          if (entry.empty())
            throw StructureError("information entry is empty");
          if (entry.find('\n') != std::string::npos)
            throw StructureError("information entry spans multiple lines");
          if (entry.find(kInformationClose) != std::string::npos)
            throw StructureError("information entry contains </information>");
        }
        break;
      case SegmentKind::kAnswer:
        if (i + 1 != segs.size())
          throw StructureError("answer segment must be final");
        if (!trajectory.terminal)
          throw StructureError("trajectory with an answer must be terminal");
        if (s.text.find(kAnswerClose) != std::string::npos)
          throw StructureError("answer content contains </answer>");
        break;
      default:
        break;
    }
  }
}

std::string render(const Trajectory& trajectory) {
  validate(trajectory);
  std::vector<std::string> parts;
  parts.reserve(trajectory.segments.size());
  for (const Segment& s : trajectory.segments) {
    switch (s.kind) {
      case SegmentKind::kThink:
        parts.push_back(std::string(kThinkOpen) + s.text + std::string(kThinkClose));
        break;
      case SegmentKind::kSearch:
        parts.push_back(std::string(kSearchOpen) + s.text + std::string(kSearchClose));
        break;
      case SegmentKind::kInformation:
        parts.push_back(std::string(kInformationOpen) + join(s.passages, "\n") +
                        std::string(kInformationClose));
        break;
      case SegmentKind::kAnswer:
        parts.push_back(std::string(kAnswerOpen) + s.text + std::string(kAnswerClose));
        break;
      case SegmentKind::kRaw:
      case SegmentKind::kNotice:
        parts.push_back(s.text);
        break;
    }
  }
  return join(parts, "\n");
}

std::vector<std::string> token_stream(const Trajectory& trajectory) {
  std::vector<std::string> tokens;
  for (const Segment& s : trajectory.segments) {
    auto push_block = [&](std::string_view open, const std::string& content,
                          std::string_view close) {
      tokens.emplace_back(open);
      for (auto& w : split_whitespace(content)) tokens.push_back(std::move(w));
      tokens.emplace_back(close);
    };
    switch (s.kind) {
      case SegmentKind::kThink:
        push_block(kThinkOpen, s.text, kThinkClose);
        break;
      case SegmentKind::kSearch:
        push_block(kSearchOpen, s.text, kSearchClose);
        break;
      case SegmentKind::kInformation:
        push_block(kInformationOpen, join(s.passages, "\n"), kInformationClose);
        break;
      case SegmentKind::kAnswer:
        push_block(kAnswerOpen, s.text, kAnswerClose);
        break;
      case SegmentKind::kRaw:
      case SegmentKind::kNotice:
        for (auto& w : split_whitespace(s.text)) tokens.push_back(std::move(w));
        break;
    }
  }
  return tokens;
}

std::size_t LossMask::masked_count() const {
  return static_cast<std::size_t>(
      std::count(weights.begin(), weights.end(), std::uint8_t{0}));
}

LossMask loss_mask(const Trajectory& trajectory) {
  LossMask mask;
  for (const Segment& s : trajectory.segments) {
    std::size_t count = 0;
    switch (s.kind) {
      case SegmentKind::kRaw:
      case SegmentKind::kNotice:
        count = word_count(s.text);
        break;
      case SegmentKind::kInformation:
        count = 2 + word_count(join(s.passages, "\n"));
        break;
      default:
        count = 2 + word_count(s.text);
        break;
    }
    const std::uint8_t weight = s.origin == Origin::kPolicy ? 1 : 0;
    mask.weights.insert(mask.weights.end(), count, weight);
  }
  return mask;
}

}  // namespace convrl
