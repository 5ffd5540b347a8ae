#include <doctest.h>

#include <random>

#include "convrl/reward.hpp"
#include "oracles.hpp"

using namespace convrl;

TEST_CASE("normalize applies lowercase, punctuation strip and article removal") {
  CHECK(normalize("The Night Chicago Died!") ==
        std::vector<std::string>{"night", "chicago", "died"});
  CHECK(normalize("") == std::vector<std::string>{});
  CHECK(normalize("Billy Don't Be a Hero") ==
        std::vector<std::string>{"billy", "dont", "be", "hero"});
}

TEST_CASE("f1 identity and disjoint cases") {
  CHECK(f1("green color", "green color") == doctest::Approx(1.0));
  CHECK(f1("apples oranges", "bicycle wheel") == 0.0);
  CHECK(f1("", "anything") == 0.0);
  CHECK(f1("the a an", "word") == 0.0);  // left side normalizes to empty
}

TEST_CASE("f1 reproduces the published trace scores") {
  // Self-correction episode, predicted vs. golden answer.
  const std::string predicted_pl = "Paper Lace had a hit with \"Billy Don't Be a Hero\".";
  const std::string golden_pl =
      "Billy Don't Be a Hero is a 1974 pop song that was first a UK hit for Paper Lace.";
  CHECK(f1(predicted_pl, golden_pl) == doctest::Approx(0.56).epsilon(0.005 / 0.56));

  // Honduras Christmas dinner episode.
  const std::string predicted_hn =
      "In Honduras, the traditional Christmas dinner is served around midnight on the 24th of "
      "December and typically consists of tamales, roast pork leg, accompanied by \"torrejas,\" "
      "for dessert, and eggnog.";
  const std::string golden_hn =
      "Christmas dinner is served around midnight on the 24th of December, consisting of "
      "tamales, roast pork leg, accompanied by \"torrejas,\" for dessert, and eggnog.";
  CHECK(answer_reward(predicted_hn, golden_hn) == doctest::Approx(0.8627).epsilon(0.005 / 0.8627));
}

TEST_CASE("answer reward edge cases") {
  CHECK(answer_reward("", "gold") == 0.0);
  CHECK(answer_reward("exact same words", "exact same words") == doctest::Approx(1.0));
}

TEST_CASE("f1 matches the independent multiset oracle exactly") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::string a = oracles::random_words(rng, 0, 12);
    const std::string b = oracles::random_words(rng, 0, 12);
    CHECK(f1(a, b) == oracles::f1(a, b));
  }
}

TEST_CASE("f1 is symmetric and bounded") {
  std::mt19937_64 rng(321);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string a = oracles::random_words(rng, 0, 10);
    const std::string b = oracles::random_words(rng, 0, 10);
    const double ab = f1(a, b);
    CHECK(ab == f1(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (!normalize(a).empty()) CHECK(f1(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("intent reward takes the max over queries") {
  CHECK(intent_reward({"what makes the color green anyway"},
                      "what makes the color green anyway") == doctest::Approx(1.0));
  const double reward = intent_reward(
      {"what makes the color green", "why is green common in nature"},
      "what makes the color green anyway");
  CHECK(reward == doctest::Approx(0.889).epsilon(0.005 / 0.889));
  CHECK(intent_reward({}, "rewrite") == 0.0);
  CHECK(intent_reward({"query"}, "") == 0.0);
}

TEST_CASE("intent reward never decreases when a query is appended") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> queries;
    const std::string rewrite = oracles::random_words(rng, 2, 8);
    double previous = 0.0;
    for (int q = 0; q < 5; ++q) {
      queries.push_back(oracles::random_words(rng, 1, 8));
      const double current = intent_reward(queries, rewrite);
      CHECK(current >= previous);
      previous = current;
    }
  }
}

namespace {

RetrievalResult ranking_of(const std::vector<std::string>& ids) {
  RetrievalResult result;
  double score = static_cast<double>(ids.size());
  for (const auto& id : ids) result.hits.push_back({id, score--});
  return result;
}

}  // namespace

TEST_CASE("hit reward across queries") {
  const std::vector<RetrievalResult> results = {ranking_of({"a", "b", "c"}),
                                                ranking_of({"d", "e", "rel"})};
  CHECK(hit_reward(results, {"rel"}, 3) == 1);
  CHECK(hit_reward(results, {"zzz"}, 3) == 0);
  CHECK(hit_reward({}, {"rel"}, 3) == 0);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> id(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RetrievalResult> random_results;
    std::vector<std::vector<std::string>> raw;
    for (int q = 0; q < 2; ++q) {
      std::vector<std::string> ids;
      for (int i = 0; i < 4; ++i) {
        const std::string candidate = "d" + std::to_string(id(rng));
        if (std::find(ids.begin(), ids.end(), candidate) == ids.end()) ids.push_back(candidate);
      }
      raw.push_back(ids);
      random_results.push_back(ranking_of(ids));
    }
    std::set<std::string> relevant = {"d" + std::to_string(id(rng))};
    const int expected = std::max(oracles::hit(raw[0], relevant, 3),
                                  oracles::hit(raw[1], relevant, 3));
    CHECK(hit_reward(random_results, relevant, 3) == expected);
  }
}

namespace {

Trajectory terminal_trajectory(const std::vector<std::string>& queries,
                               const std::string& answer, bool with_answer = true) {
  Trajectory traj;
  for (const auto& q : queries) {
    traj.segments.push_back(Segment::search(q));
    traj.segments.push_back(Segment::information({}));
  }
  if (with_answer) traj.segments.push_back(Segment::answer(answer));
  traj.terminal = true;
  return traj;
}

}  // namespace

TEST_CASE("total reward composes answer and intent components") {
  Turn turn;
  turn.question = "Does the group have other hits?";
  turn.answer =
      "Billy Don't Be a Hero is a 1974 pop song that was first a UK hit for Paper Lace.";
  turn.rewrite = "what makes the color green anyway";

  const Trajectory traj = terminal_trajectory(
      {"what makes the color green", "why is green common in nature"},
      "Paper Lace had a hit with \"Billy Don't Be a Hero\".");

  RewardConfig config;
  config.alpha = 0.2;
  const RewardBreakdown breakdown = total_reward(traj, turn, {}, config);
  CHECK(breakdown.answer_f1 == doctest::Approx(0.56).epsilon(0.01));
  CHECK(breakdown.intent == doctest::Approx(0.889).epsilon(0.01));
  CHECK(breakdown.total == doctest::Approx(0.7378).epsilon(0.01));
  CHECK(breakdown.total == breakdown.answer_f1 + config.alpha * breakdown.intent);
  CHECK(breakdown.per_query.size() == 2);
  CHECK(breakdown.intent ==
        doctest::Approx(std::max(breakdown.per_query[0], breakdown.per_query[1])));
}

TEST_CASE("alpha zero recovers the answer-only reward") {
  Turn turn;
  turn.question = "q";
  turn.answer = "gold words here";
  turn.rewrite = "gold rewrite";
  const Trajectory traj = terminal_trajectory({"gold rewrite"}, "gold words here");
  RewardConfig config;
  config.alpha = 0.0;
  const RewardBreakdown breakdown = total_reward(traj, turn, {}, config);
  CHECK(breakdown.total == breakdown.answer_f1);
}

TEST_CASE("intent mode off with no answer scores zero") {
  Turn turn;
  turn.question = "q";
  turn.answer = "gold";
  const Trajectory traj = terminal_trajectory({"some query"}, "", /*with_answer=*/false);
  RewardConfig config;
  config.intent_mode = IntentMode::kOff;
  const RewardBreakdown breakdown = total_reward(traj, turn, {}, config);
  CHECK(breakdown.total == 0.0);
  CHECK(breakdown.answer_f1 == 0.0);
}

TEST_CASE("intent is paid when the episode ends without an answer") {
  Turn turn;
  turn.question = "q";
  turn.answer = "gold";
  turn.rewrite = "the gold rewrite";
  const Trajectory traj = terminal_trajectory({"the gold rewrite"}, "", /*with_answer=*/false);
  RewardConfig config;
  const RewardBreakdown breakdown = total_reward(traj, turn, {}, config);
  CHECK(breakdown.answer_f1 == 0.0);
  CHECK(breakdown.intent == doctest::Approx(1.0));
  CHECK(breakdown.total == doctest::Approx(0.2));
}

TEST_CASE("hit mode uses per-query retrieval results") {
  Turn turn;
  turn.question = "q";
  turn.answer = "gold";
  turn.relevant_ids = std::set<std::string>{"rel"};
  const Trajectory traj = terminal_trajectory({"query"}, "gold");
  RewardConfig config;
  config.intent_mode = IntentMode::kHitAtN;
  config.hit_n = 3;
  const std::vector<RetrievalResult> results = {ranking_of({"x", "rel", "y"})};
  const RewardBreakdown breakdown = total_reward(traj, turn, results, config);
  CHECK(breakdown.intent == 1.0);
  CHECK(breakdown.total == doctest::Approx(1.0 + 0.2));
}

TEST_CASE("total reward requires a terminal trajectory") {
  Trajectory traj;
  traj.segments.push_back(Segment::think("x"));
  Turn turn;
  turn.question = "q";
  turn.answer = "gold";
  CHECK_THROWS_AS(total_reward(traj, turn, {}, RewardConfig{}), std::invalid_argument);
}
