#include <doctest.h>

#include "convrl/environment.hpp"
#include "convrl/policy.hpp"
#include "convrl/prompts.hpp"
#include "convrl/util.hpp"

using namespace convrl;

namespace {

std::vector<Passage> fafsa_corpus() {
  return {
      {"f1", "", "When you fill out the FAFSA form, you are applying for aid for a specific year."},
      {"f2", "", "In order to receive aid the next year, you will need to submit that next year's FAFSA form."},
      {"f3", "", "If you filled out a FAFSA form last year and want to renew it, select LOG IN on the FAFSA home page."},
      {"f4", "", "Be sure to select FAFSA RENEWAL once given the option during the renewal process."},
      {"f5", "", "Roast turkey is the most common choice of meal in Lebanon."},
  };
}

Conversation wind_dialogue() {
  Conversation conv;
  conv.id = "wind";
  conv.turns.push_back({"Which European countries produce the most wind energy?",
                        "Denmark, Germany and Spain lead wind energy production in Europe.",
                        std::nullopt, std::nullopt});
  conv.turns.push_back({"Which one has grown fastest recently?",
                        "Spain has grown its wind capacity fastest in recent years.",
                        std::nullopt, std::nullopt});
  conv.turns.push_back({"Is wind cheaper there than solar?", "", std::nullopt, std::nullopt});
  return conv;
}

}  // namespace

TEST_CASE("prompt template asset carries the exact instruction wording") {
  const std::string& tmpl = policy_prompt_template();
  CHECK(tmpl.find("You are a helpful assistant tasked with answering a user query.") !=
        std::string::npos);
  CHECK(tmpl.find("- Always perform your reasoning inside <think>...</think>.") !=
        std::string::npos);
  CHECK(tmpl.find("- If external information is needed, use <search>your query</search>.") !=
        std::string::npos);
  CHECK(tmpl.find("- Retrieved documents will appear between <information>...</information>.") !=
        std::string::npos);
  CHECK(tmpl.find("- You may issue multiple search queries if needed.") != std::string::npos);
  CHECK(tmpl.find("provide a complete answer within <answer>...</answer>.") !=
        std::string::npos);
  CHECK(tmpl.find("Conversation context: {context_block}") != std::string::npos);
  CHECK(tmpl.find("User query: {last_user_utterance}") != std::string::npos);
}

TEST_CASE("reset at turn zero renders an empty context block") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  const Conversation conv = wind_dialogue();
  const Episode episode = env.reset(conv, 0);
  CHECK(episode.prompt().find("Conversation context: \n") != std::string::npos);
  CHECK(episode.prompt().find("User query: Which European countries produce the most wind "
                              "energy?") != std::string::npos);
  CHECK(episode.prompt().find("Assistant:") == std::string::npos);
}

TEST_CASE("reset at the final turn holds both prior exchanges verbatim") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  const Conversation conv = wind_dialogue();
  const Episode episode = env.reset(conv, 2);
  const std::string expected_context =
      "User: Which European countries produce the most wind energy?\n"
      "Assistant: Denmark, Germany and Spain lead wind energy production in Europe.\n"
      "User: Which one has grown fastest recently?\n"
      "Assistant: Spain has grown its wind capacity fastest in recent years.";
  CHECK(render_context_block(conv, 2) == expected_context);
  CHECK(episode.prompt().find(expected_context) != std::string::npos);
  CHECK(episode.prompt().find("User query: Is wind cheaper there than solar?") !=
        std::string::npos);
}

TEST_CASE("reset rejects an out-of-range turn index") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  const Conversation conv = wind_dialogue();
  CHECK_THROWS_AS(env.reset(conv, 3), std::out_of_range);
  CHECK_THROWS_AS(env.reset(conv, -1), std::out_of_range);
}

TEST_CASE("overlong history is truncated oldest-first at turn boundaries") {
  Conversation conv;
  conv.id = "long";
  for (int t = 0; t < 50; ++t)
    conv.turns.push_back({"question number q" + std::to_string(t) + " about topic",
                          "answer number a" + std::to_string(t) + " with several words",
                          std::nullopt, std::nullopt});
  const Index index = Index::build(fafsa_corpus());
  EnvConfig config;
  config.max_prompt_tokens = 260;
  const SearchEnvironment env(index, config);

  const Episode episode = env.reset(conv, 49);
  CHECK(word_count(episode.prompt()) <= 260);
  // Newest history retained, oldest dropped.
  CHECK(episode.prompt().find("q48") != std::string::npos);
  CHECK(episode.prompt().find("a48") != std::string::npos);
  CHECK(episode.prompt().find("q0 ") == std::string::npos);
  // Turn-boundary truncation: a retained turn keeps both its lines.
  const std::size_t q_pos = episode.prompt().find("User: question number q");
  REQUIRE(q_pos != std::string::npos);
  const std::string first_kept = episode.prompt().substr(q_pos);
  CHECK(first_kept.find("Assistant: answer number") != std::string::npos);
}

TEST_CASE("well-formed search emission injects top-k passages") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"How will I handle the renewal?", "Log in and select FAFSA renewal.",
                        std::nullopt, std::nullopt});
  Episode episode = env.reset(conv, 0);

  const EnvStep step = env.step(episode, "<search>FAFSA renewal process</search>");
  CHECK(step.injection == InjectionKind::kInformation);
  CHECK(!step.terminal);
  CHECK(step.searches_used == 1);
  REQUIRE(episode.trajectory().segments.size() == 2);
  const Segment& info = episode.trajectory().segments[1];
  CHECK(info.kind == SegmentKind::kInformation);
  CHECK(info.origin == Origin::kEnvironment);
  CHECK(info.passages.size() == 3);
  REQUIRE(episode.query_results().size() == 1);
  CHECK(episode.query_results()[0].query == "FAFSA renewal process");
}

TEST_CASE("answer emission terminates without injection") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"q?", "a", std::nullopt, std::nullopt});
  Episode episode = env.reset(conv, 0);

  const EnvStep step = env.step(episode, "<answer>done</answer>");
  CHECK(step.injection == InjectionKind::kNone);
  CHECK(step.terminal);
  CHECK(episode.trajectory().answer_text() == "done");
  CHECK_THROWS_AS(env.step(episode, "<answer>again</answer>"), std::logic_error);
}

TEST_CASE("malformed emission gets the exact recovery notice and keeps the episode alive") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"q?", "a", std::nullopt, std::nullopt});
  Episode episode = env.reset(conv, 0);

  const EnvStep step = env.step(episode, "=search> q </search>");
  CHECK(step.injection == InjectionKind::kInvalidActionNotice);
  CHECK(!step.terminal);
  CHECK(step.searches_used == 0);
  REQUIRE(episode.trajectory().segments.size() == 2);
  CHECK(episode.trajectory().segments[0].kind == SegmentKind::kRaw);
  CHECK(episode.trajectory().segments[0].text == "=search> q </search>");
  CHECK(episode.trajectory().segments[1].kind == SegmentKind::kNotice);
  CHECK(episode.trajectory().segments[1].text ==
        "My previous action is invalid. If I want to search, I should put the query between "
        "<search> and </search>. If I want to give the final answer, I should put the answer "
        "between <answer> and </answer>.");
  CHECK(episode.trajectory().segments[1].origin == Origin::kEnvironment);
}

TEST_CASE("think-only emissions do not act and draw the notice") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"q?", "a", std::nullopt, std::nullopt});
  Episode episode = env.reset(conv, 0);
  const EnvStep step = env.step(episode, "<think>just pondering</think>");
  CHECK(step.injection == InjectionKind::kInvalidActionNotice);
  CHECK(episode.trajectory().segments[0].kind == SegmentKind::kThink);
  CHECK(episode.invalid_actions() == 1);
}

TEST_CASE("third search attempt draws a limit notice and no retrieval") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"q?", "a", std::nullopt, std::nullopt});
  Episode episode = env.reset(conv, 0);

  env.step(episode, "<search>fafsa form</search>");
  env.step(episode, "<search>fafsa renewal</search>");
  CHECK(episode.searches_used() == 2);
  const EnvStep third = env.step(episode, "<search>fafsa login</search>");
  CHECK(third.injection == InjectionKind::kInvalidActionNotice);
  CHECK(third.searches_used == 2);
  CHECK(episode.query_results().size() == 2);
  CHECK(episode.trajectory().search_count() == 2);
  const Segment& notice = episode.trajectory().segments.back();
  CHECK(notice.kind == SegmentKind::kNotice);
  CHECK(notice.text.find("limit of 2 search calls") != std::string::npos);
}

TEST_CASE("invalid-action budget forces termination with no answer") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"q?", "a", std::nullopt, std::nullopt});
  Episode episode = env.reset(conv, 0);

  CHECK(!env.step(episode, "garbage one").terminal);
  CHECK(!env.step(episode, "garbage two").terminal);
  const EnvStep last = env.step(episode, "garbage three");
  CHECK(last.terminal);
  CHECK(episode.terminal());
  CHECK(!episode.trajectory().has_answer());
  CHECK(episode.trajectory().terminal);
}

TEST_CASE("episode length is bounded by searches plus invalid actions plus one") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"q?", "a", std::nullopt, std::nullopt});

  // Adversarial script: keeps searching, never answers.
  Episode episode = env.reset(conv, 0);
  std::size_t emissions = 0;
  while (!episode.terminal()) {
    env.step(episode, "<search>fafsa</search>");
    ++emissions;
    REQUIRE(emissions <= 2 + 3 + 1);
  }
  CHECK(emissions <= 2 + 3 + 1);

  // Pure garbage script.
  Episode episode2 = env.reset(conv, 0);
  emissions = 0;
  while (!episode2.terminal()) {
    env.step(episode2, "????");
    ++emissions;
    REQUIRE(emissions <= 2 + 3 + 1);
  }
  CHECK(emissions == 3);
}

TEST_CASE("emissions beyond the token budget are truncated and flagged") {
  const Index index = Index::build(fafsa_corpus());
  EnvConfig config;
  config.max_emission_tokens = 8;
  const SearchEnvironment env(index, config);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"q?", "a", std::nullopt, std::nullopt});
  Episode episode = env.reset(conv, 0);

  std::string overlong = "<search>";
  for (int i = 0; i < 30; ++i) overlong += " word" + std::to_string(i);
  overlong += "</search>";
  const EnvStep step = env.step(episode, overlong);
  CHECK(step.injection == InjectionKind::kInvalidActionNotice);
  CHECK(episode.trajectory().segments[0].kind == SegmentKind::kRaw);
  CHECK(word_count(episode.trajectory().segments[0].text) == 8);
}

TEST_CASE("replaying a scripted episode reproduces the trajectory byte for byte") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"How will I handle the renewal?", "Log in.", std::nullopt, std::nullopt});

  auto run = [&]() {
    ScriptedPolicy script({"<think>need info</think>\n<search>FAFSA renewal process</search>",
                           "<search>select FAFSA RENEWAL option</search>",
                           "<answer>Log in and select FAFSA RENEWAL.</answer>"});
    Episode episode = env.reset(conv, 0);
    while (!episode.terminal()) env.step(episode, script.next());
    return render(episode.trajectory());
  };
  const std::string first = run();
  const std::string second = run();
  CHECK(first == second);
  CHECK(first.find("<information>") != std::string::npos);
}

TEST_CASE("injected segments are environment-origin and masked") {
  const Index index = Index::build(fafsa_corpus());
  const SearchEnvironment env(index);
  Conversation conv;
  conv.id = "c";
  conv.turns.push_back({"q?", "a", std::nullopt, std::nullopt});
  Episode episode = env.reset(conv, 0);
  env.step(episode, "<search>fafsa renewal</search>");
  env.step(episode, "nonsense");

  const LossMask mask = loss_mask(episode.trajectory());
  std::size_t env_tokens = 0;
  for (const Segment& seg : episode.trajectory().segments) {
    if (seg.origin != Origin::kEnvironment) continue;
    if (seg.kind == SegmentKind::kInformation)
      env_tokens += 2 + word_count(join(seg.passages, "\n"));
    else
      env_tokens += word_count(seg.text);
  }
  CHECK(mask.masked_count() == env_tokens);
  CHECK(mask.masked_count() > 0);
}
