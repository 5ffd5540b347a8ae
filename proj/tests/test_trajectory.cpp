#include <doctest.h>

#include <random>

#include "convrl/trajectory.hpp"

using namespace convrl;

namespace {

// The published self-correction trace: a malformed "=search>" attempt and the
// recovery notice, all inside one think block, followed by a clean search.
const char* kSelfCorrectionTrace =
    "<think> Let's find out if the group Paper Lace has any other hits. \n"
    "=search> does the group Paper Lace have other hits? </search>  \n"
    "My previous action is invalid. If I want to search, I should put the query between "
    "<search> and </search>.  \n"
    "If I want to give the final answer, I should put the answer between <answer> and "
    "</answer>.  \n"
    "Let me try again.\n"
    "</think>\n"
    "<search> does the group Paper Lace have other hits? </search>\n"
    "<information> Their first two singles, released in 1974, were both written by Murray "
    "and Callander: \"Billy Don't Be a Hero\" (No. 1 UK) and \"The Night Chicago Died\" "
    "(No. 1 US). [...]</information>\n"
    "<think> Paper Lace had a hit with \"Billy Don't Be a Hero\". </think>\n"
    "<answer> Paper Lace had a hit with \"Billy Don't Be a Hero\". </answer>";

const char* kHondurasTrace =
    "<search> Now I want to know the Christmas dinner tradition in Honduras? </search>\n"
    "<information> The traditional Honduran Christmas dinner is served around midnight on "
    "the 24th of December. [...]</information>\n"
    "<search> What kind of food is typically eaten during Christmas dinner in Honduras? "
    "</search>\n"
    "<information> In Honduras, tamales are traditionally eaten on Christmas Eve evening. "
    "[...]</information>\n"
    "<answer> In Honduras, the traditional Christmas dinner is served around midnight on "
    "the 24th of December and typically consists of tamales, roast pork leg, accompanied "
    "by \"torrejas,\" for dessert, and eggnog. </answer>";

}  // namespace

TEST_CASE("canonical four-segment trajectory parses in order") {
  const auto result = parse(
      "<think>x</think><search>q</search><information>p1</information><answer>a</answer>");
  const auto& segs = result.trajectory.segments;
  REQUIRE(segs.size() == 4);
  CHECK(segs[0].kind == SegmentKind::kThink);
  CHECK(segs[1].kind == SegmentKind::kSearch);
  CHECK(segs[2].kind == SegmentKind::kInformation);
  CHECK(segs[3].kind == SegmentKind::kAnswer);
  CHECK(result.trajectory.terminal);
  CHECK(segs[2].origin == Origin::kEnvironment);
  CHECK(segs[0].origin == Origin::kPolicy);
  CHECK(segs[1].query() == "q");
  CHECK(segs[2].passages == std::vector<std::string>{"p1"});
}

TEST_CASE("malformed =search> inside a think block stays think text") {
  const auto result = parse(kSelfCorrectionTrace);
  const auto& traj = result.trajectory;
  REQUIRE(traj.segments.size() == 5);
  CHECK(traj.segments[0].kind == SegmentKind::kThink);
  // The stray attempt and recovery text are content, not a search call.
  CHECK(traj.segments[0].text.find("=search>") != std::string::npos);
  CHECK(traj.segments[0].text.find("My previous action is invalid") != std::string::npos);
  CHECK(traj.search_count() == 1);
  CHECK(traj.segments[1].kind == SegmentKind::kSearch);
  CHECK(traj.terminal);
}

TEST_CASE("search calls beyond the limit raise LimitError") {
  CHECK_THROWS_AS(parse("<search>q</search><search>r</search><search>s</search>"),
                  LimitError);
  ParseOptions opts;
  opts.max_searches = 3;
  CHECK_NOTHROW(parse("<search>q</search><search>r</search><search>s</search>", opts));
}

TEST_CASE("parse errors carry byte offsets") {
  try {
    parse("<think>unclosed");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
  }
  try {
    parse("<think>a</think> stray </search>");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 17);  // the free text before the stray closing tag
  }
}

TEST_CASE("structural violations are typed") {
  CHECK_THROWS_AS(parse("<answer>a</answer><search>q</search>"), StructureError);
  CHECK_THROWS_AS(parse("<information>p</information>"), StructureError);
  CHECK_THROWS_AS(parse("<think>t</think><information>p</information>"), StructureError);
  CHECK_THROWS_AS(parse("<search>   </search>"), StructureError);
}

TEST_CASE("free text after the answer is ignored with a warning") {
  const auto result = parse("<answer>a</answer> trailing words");
  CHECK(result.trajectory.terminal);
  CHECK(result.trajectory.segments.size() == 1);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("after </answer>") != std::string::npos);
}

TEST_CASE("parser is total over adversarial tag soup") {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> pieces = {
      "<think>", "</think>", "<search>", "</search>", "<information>", "</information>",
      "<answer>", "</answer>", "word", " ", "\n", "<", ">", "=search>", "</s", "x y z"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> length(0, 24);
  for (int trial = 0; trial < 500; ++trial) {
    std::string soup;
    const int n = length(rng);
    for (int i = 0; i < n; ++i) soup += pieces[pick(rng)];
    try {
      parse(soup);
    } catch (const TrajectoryError&) {
      // typed failure is fine; anything else would escape and fail the test
    }
  }
}

TEST_CASE("render of an empty trajectory is the empty string") {
  CHECK(render(Trajectory{}) == "");
}

TEST_CASE("published traces round-trip exactly") {
  for (const char* trace : {kSelfCorrectionTrace, kHondurasTrace}) {
    const auto parsed = parse(trace);
    CHECK(render(parsed.trajectory) == trace);
  }
}

namespace {

Trajectory random_valid_trajectory(std::mt19937_64& rng) {
  const std::vector<std::string> words = {"alpha", "bravo", "delta", "echo",  "golf",
                                          "hotel", "india", "kilo",  "lima", "<think>",
                                          "=search>", "(no.", "1)"};
  std::uniform_int_distribution<std::size_t> word(0, words.size() - 1);
  auto text = [&](int min_words, int max_words) {
    std::uniform_int_distribution<int> count(min_words, max_words);
    const int n = count(rng);
    std::string out;
    for (int i = 0; i < n; ++i) {
      if (i) out += " ";
      out += words[word(rng)];
    }
    return out;
  };

  Trajectory traj;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> searches(0, 2);
  std::uniform_int_distribution<int> entries(0, 3);

  const int n_searches = searches(rng);
  for (int s = 0; s < n_searches; ++s) {
    if (coin(rng)) traj.segments.push_back(Segment::think(text(0, 6)));
    traj.segments.push_back(Segment::search(text(1, 5)));
    std::vector<std::string> passage_entries;
    const int n_entries = entries(rng);
    for (int e = 0; e < n_entries; ++e) passage_entries.push_back(text(1, 8));
    traj.segments.push_back(Segment::information(std::move(passage_entries)));
  }
  if (coin(rng)) traj.segments.push_back(Segment::think(text(0, 6)));
  if (coin(rng)) {
    traj.segments.push_back(Segment::answer(text(0, 8)));
    traj.terminal = true;
  }
  return traj;
}

bool segments_equal(const Segment& a, const Segment& b) {
  return a.kind == b.kind && a.origin == b.origin && a.text == b.text &&
         a.passages == b.passages;
}

}  // namespace

TEST_CASE("500 random valid trajectories round-trip exactly") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const Trajectory traj = random_valid_trajectory(rng);
    const std::string rendered = render(traj);
    const auto reparsed = parse(rendered);
    REQUIRE(reparsed.trajectory.segments.size() == traj.segments.size());
    for (std::size_t i = 0; i < traj.segments.size(); ++i)
      CHECK(segments_equal(reparsed.trajectory.segments[i], traj.segments[i]));
    CHECK(reparsed.trajectory.terminal == traj.terminal);
    CHECK(render(reparsed.trajectory) == rendered);
  }
}

TEST_CASE("loss mask is all ones without environment segments") {
  Trajectory traj;
  traj.segments.push_back(Segment::think("some reasoning here"));
  traj.segments.push_back(Segment::search("a query"));
  traj.segments.push_back(Segment::answer("the answer"));
  traj.terminal = true;
  const LossMask mask = loss_mask(traj);
  CHECK(mask.size() == token_stream(traj).size());
  CHECK(mask.masked_count() == 0);
}

TEST_CASE("loss mask zeroes exactly the injected tokens including their tags") {
  Trajectory traj;
  traj.segments.push_back(Segment::think("one two three"));
  traj.segments.push_back(Segment::search("four five"));
  traj.segments.push_back(
      Segment::information({"w1 w2 w3 w4 w5", "w6 w7 w8 w9 w10"}));  // 10 injected words
  traj.segments.push_back(Segment::answer("six seven eight nine"));
  traj.terminal = true;

  const auto tokens = token_stream(traj);
  const LossMask mask = loss_mask(traj);
  REQUIRE(mask.size() == tokens.size());
  CHECK(tokens.size() == (2 + 3) + (2 + 2) + (2 + 10) + (2 + 4));
  CHECK(mask.masked_count() == 12);  // 10 information words + its two tag tokens
  // The zeros sit exactly on the information block.
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool in_info = i >= 9 && i < 21;
    CHECK(mask.weights[i] == (in_info ? 0 : 1));
  }
}

TEST_CASE("notices are masked, raw policy emissions are not") {
  Trajectory traj;
  traj.segments.push_back(Segment::raw("=search> broken attempt </search>"));
  traj.segments.push_back(Segment::notice("My previous action is invalid."));
  const LossMask mask = loss_mask(traj);
  REQUIRE(mask.size() == 4 + 5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(mask.weights[i] == 1);
  for (std::size_t i = 4; i < 9; ++i) CHECK(mask.weights[i] == 0);
}

TEST_CASE("mask of concatenated trajectories equals concatenated masks") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory a = random_valid_trajectory(rng);
    Trajectory b = random_valid_trajectory(rng);
    Trajectory combined;
    combined.segments = a.segments;
    combined.segments.insert(combined.segments.end(), b.segments.begin(), b.segments.end());

    auto expected = loss_mask(a).weights;
    const auto tail = loss_mask(b).weights;
    expected.insert(expected.end(), tail.begin(), tail.end());
    CHECK(loss_mask(combined).weights == expected);
  }
}

TEST_CASE("render validates trajectory invariants") {
  Trajectory bad;
  bad.segments.push_back(Segment::information({"x"}));
  CHECK_THROWS_AS(render(bad), StructureError);

  Trajectory answer_not_last;
  answer_not_last.segments.push_back(Segment::answer("a"));
  answer_not_last.segments.push_back(Segment::think("t"));
  answer_not_last.terminal = true;
  CHECK_THROWS_AS(render(answer_not_last), StructureError);

  Trajectory empty_query;
  empty_query.segments.push_back(Segment::search("   "));
  CHECK_THROWS_AS(render(empty_query), StructureError);

  Trajectory forged_origin;
  forged_origin.segments.push_back(Segment::search("q"));
  Segment info = Segment::information({"x"});
  info.origin = Origin::kPolicy;
  forged_origin.segments.push_back(info);
  CHECK_THROWS_AS(render(forged_origin), StructureError);
}
