#include "convrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "convrl/util.hpp"

namespace fs = std::filesystem;

namespace convrl {

using json = nlohmann::json;

namespace {

// ---- flat INI-style config ----

std::map<std::string, std::string> parse_flat_config(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::string section;
  std::size_t line_no = 0;
  for (const std::string& raw : split_lines(text)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    entries[section.empty() ? key : section + "." + key] = value;
  }
  return entries;
}

class ConfigReader {
 public:
  explicit ConfigReader(std::map<std::string, std::string> entries)
      : entries_(std::move(entries)) {}

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    seen_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    seen_.insert(key);
    try {
      std::size_t consumed = 0;
      const double value = std::stod(it->second, &consumed);
      if (consumed != it->second.size()) throw std::invalid_argument("trailing characters");
      return value;
    } catch (const std::exception&) {
      throw ConfigError("field '" + key + "': expected a number, got '" + it->second + "'");
    }
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    seen_.insert(key);
    try {
      std::size_t consumed = 0;
      const long long value = std::stoll(it->second, &consumed);
      if (consumed != it->second.size() || value < 0)
        throw std::invalid_argument("not a non-negative integer");
      return static_cast<std::uint64_t>(value);
    } catch (const std::exception&) {
      throw ConfigError("field '" + key + "': expected a non-negative integer, got '" +
                        it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    seen_.insert(key);
    const std::string v = to_lower(it->second);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("field '" + key + "': expected true/false, got '" + it->second + "'");
  }

  void check_all_consumed() const {
    for (const auto& [key, value] : entries_) {
      if (!seen_.count(key))
        throw ConfigError("unknown config field '" + key + "'");
    }
  }

 private:
  std::map<std::string, std::string> entries_;
  std::set<std::string> seen_;
};

IntentMode parse_intent_mode(const std::string& value) {
  if (value == "query_f1") return IntentMode::kQueryF1;
  if (value == "hit_at_n") return IntentMode::kHitAtN;
  if (value == "off") return IntentMode::kOff;
  throw ConfigError("field 'reward.intent_mode': expected query_f1|hit_at_n|off, got '" +
                    value + "'");
}

std::string intent_mode_name(IntentMode mode) {
  switch (mode) {
    case IntentMode::kQueryF1: return "query_f1";
    case IntentMode::kHitAtN: return "hit_at_n";
    case IntentMode::kOff: return "off";
  }
  return "?";
}

}  // namespace

RunConfig RunConfig::from_string(const std::string& text) {
  ConfigReader reader(parse_flat_config(text));
  RunConfig config;

  config.dataset_path = reader.get_string("data.dataset", "");
  config.corpus_path = reader.get_string("data.corpus", "");
  config.qrels_path = reader.get_string("data.qrels", "");
  config.output_dir = reader.get_string("train.output_dir", "");

  config.env.top_k = reader.get_uint("env.top_k", config.env.top_k);
  config.env.max_searches = reader.get_uint("env.max_searches", config.env.max_searches);
  config.env.max_invalid_actions =
      reader.get_uint("env.max_invalid_actions", config.env.max_invalid_actions);
  config.env.max_prompt_tokens =
      reader.get_uint("env.max_prompt_tokens", config.env.max_prompt_tokens);
  config.env.max_emission_tokens =
      reader.get_uint("env.max_emission_tokens", config.env.max_emission_tokens);

  config.reward.alpha = reader.get_double("reward.alpha", config.reward.alpha);
  config.reward.intent_mode =
      parse_intent_mode(reader.get_string("reward.intent_mode", "query_f1"));
  config.reward.hit_n = static_cast<int>(reader.get_uint("reward.hit_n", 3));

  config.ppo.epsilon = reader.get_double("ppo.epsilon", config.ppo.epsilon);
  config.ppo.gamma = reader.get_double("ppo.gamma", config.ppo.gamma);
  config.ppo.lambda = reader.get_double("ppo.lambda", config.ppo.lambda);
  config.ppo.kl_beta = reader.get_double("ppo.kl_beta", config.ppo.kl_beta);
  config.ppo.actor_lr = reader.get_double("ppo.actor_lr", config.ppo.actor_lr);
  config.ppo.critic_lr = reader.get_double("ppo.critic_lr", config.ppo.critic_lr);
  config.ppo.rollouts_per_step =
      reader.get_uint("ppo.rollouts_per_step", config.ppo.rollouts_per_step);
  config.ppo.update_epochs = reader.get_uint("ppo.update_epochs", config.ppo.update_epochs);
  config.ppo.normalize_advantages =
      reader.get_bool("ppo.normalize_advantages", config.ppo.normalize_advantages);

  config.paper_scale.batch_size =
      reader.get_uint("paper_scale.batch_size", config.paper_scale.batch_size);
  config.paper_scale.micro_batch_size =
      reader.get_uint("paper_scale.micro_batch_size", config.paper_scale.micro_batch_size);
  config.paper_scale.actor_learning_rate = reader.get_double(
      "paper_scale.actor_learning_rate", config.paper_scale.actor_learning_rate);

  config.total_steps = reader.get_uint("train.total_steps", config.total_steps);
  config.checkpoint_interval =
      reader.get_uint("train.checkpoint_interval", config.checkpoint_interval);
  config.seed = reader.get_uint("train.seed", config.seed);

  config.judge_client.endpoint = reader.get_string("client.judge_endpoint", "");
  config.rewrite_client.endpoint = reader.get_string("client.rewrite_endpoint", "");
  const int retries = static_cast<int>(reader.get_uint("client.max_retries", 3));
  const int backoff = static_cast<int>(reader.get_uint("client.backoff_ms", 200));
  config.judge_client.max_retries = config.rewrite_client.max_retries = retries;
  config.judge_client.backoff_ms = config.rewrite_client.backoff_ms = backoff;

  reader.check_all_consumed();
  config.validate(/*check_paths=*/false);
  return config;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig config = from_string(ss.str());
  config.validate(/*check_paths=*/true);
  return config;
}

void RunConfig::validate(bool check_paths) const {
  ppo.validate();
  if (reward.alpha < 0.0) throw ConfigError("field 'reward.alpha': must be >= 0");
  if (reward.hit_n < 1) throw ConfigError("field 'reward.hit_n': must be >= 1");
  if (env.top_k < 1) throw ConfigError("field 'env.top_k': must be >= 1");
  if (total_steps > 0 && checkpoint_interval == 0)
    throw ConfigError("field 'train.checkpoint_interval': must be >= 1");
  if (total_steps > 0 && total_steps % checkpoint_interval != 0)
    throw ConfigError("field 'train.checkpoint_interval': must divide train.total_steps (" +
                      std::to_string(checkpoint_interval) + " does not divide " +
                      std::to_string(total_steps) + ")");
  if (check_paths) {
    if (dataset_path.empty()) throw ConfigError("field 'data.dataset': required");
    if (corpus_path.empty()) throw ConfigError("field 'data.corpus': required");
    if (!fs::exists(dataset_path))
      throw ConfigError("field 'data.dataset': path does not exist: " + dataset_path);
    if (!fs::exists(corpus_path))
      throw ConfigError("field 'data.corpus': path does not exist: " + corpus_path);
    if (!qrels_path.empty() && !fs::exists(qrels_path))
      throw ConfigError("field 'data.qrels': path does not exist: " + qrels_path);
  }
}

namespace {

const std::set<std::string>* relevant_for(const Turn& turn, const Qrels* qrels,
                                          const std::string& conversation_id, int turn_index) {
  if (turn.relevant_ids) return &*turn.relevant_ids;
  if (qrels) return qrels->find(conversation_id, turn_index);
  return nullptr;
}

}  // namespace

TrajectoryRecord collect_episode(const SearchEnvironment& env, const Conversation& conversation,
                                 int turn_index, const LinearSoftmaxPolicy& policy,
                                 const LinearCritic& critic, const RewardConfig& reward_config,
                                 const Qrels* qrels, Rng& rng, bool greedy) {
  TrajectoryRecord record;
  Episode episode = env.reset(conversation, turn_index);

  while (!episode.terminal()) {
    const MacroVocabulary vocab = build_vocabulary(episode);
    FeatureMatrix features = policy_feature_matrix(episode, vocab);
    FeatureVector psi = critic_features(episode);

    PositionRecord pos;
    pos.masked = false;
    pos.chosen = greedy ? policy.greedy(features) : policy.sample(features, rng);
    pos.old_log_prob = policy.log_prob(features, pos.chosen);
    pos.value = critic.value(psi);
    pos.critic_feats = std::move(psi);
    const std::string emission = vocab.actions[pos.chosen].emission;
    pos.candidates = std::move(features);
    record.positions.push_back(std::move(pos));

    const EnvStep step = env.step(episode, emission);
    if (step.injection != InjectionKind::kNone) {
      PositionRecord injected;
      injected.masked = true;
      injected.critic_feats = critic_features(episode);
      injected.value = critic.value(injected.critic_feats);
      record.positions.push_back(std::move(injected));
    }
  }

  record.breakdown = total_reward(episode.trajectory(), episode.turn(),
                                  episode.query_results(), reward_config);
  record.reward = record.breakdown.total;
  const std::set<std::string>* relevant =
      relevant_for(episode.turn(), qrels, conversation.id, turn_index);
  record.hit3 = relevant && !episode.query_results().empty()
                    ? hit_reward(episode.query_results(), *relevant, 3)
                    : 0;
  return record;
}

CheckpointChoice select_checkpoint(const std::vector<StepDiagnostics>& diagnostics,
                                   std::uint64_t checkpoint_interval) {
  CheckpointChoice choice;
  if (diagnostics.empty() || checkpoint_interval == 0) return choice;
  const std::uint64_t total = diagnostics.back().step;

  double best_mean = -std::numeric_limits<double>::infinity();
  std::uint64_t best_step = 0;
  double last_mean = 0.0;
  for (std::uint64_t s = checkpoint_interval; s <= total; s += checkpoint_interval) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const StepDiagnostics& d : diagnostics) {
      if (d.step > s - checkpoint_interval && d.step <= s) {
        sum += d.mean_total_reward;
        ++count;
      }
    }
    const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    if (mean > best_mean) {
      best_mean = mean;
      best_step = s;
    }
    if (s + checkpoint_interval > total) last_mean = mean;
    choice.step = s;  // last checkpoint by default
  }
  if (last_mean < 0.5 * best_mean) {
    choice.step = best_step;
    choice.collapse_detected = true;
  }
  return choice;
}

namespace {

json diagnostics_to_json(const StepDiagnostics& d) {
  return json{{"step", d.step},
              {"mean_total_reward", d.mean_total_reward},
              {"mean_answer_f1", d.mean_answer_f1},
              {"mean_intent", d.mean_intent},
              {"clip_fraction", d.clip_fraction},
              {"kl", d.kl},
              {"actor_loss", d.actor_loss},
              {"critic_loss", d.critic_loss},
              {"mean_ratio", d.mean_ratio},
              {"frac_nonzero_intent", d.frac_nonzero_intent},
              {"frac_nonzero_hit", d.frac_nonzero_hit},
              {"aborted", d.aborted}};
}

std::string checkpoint_file_name(std::uint64_t step) {
  std::ostringstream name;
  name << "checkpoint_step_" << std::setw(6) << std::setfill('0') << step << ".json";
  return name.str();
}

}  // namespace

TrainResult run_training(const RunConfig& config) {
  config.validate(/*check_paths=*/true);
  if (config.output_dir.empty())
    throw ConfigError("field 'train.output_dir': required for training");
  fs::create_directories(config.output_dir);

  auto conversations = load_dataset(config.dataset_path);
  const auto corpus = load_corpus_jsonl(config.corpus_path);
  const Index index = Index::build(corpus);
  Qrels qrels;
  const Qrels* qrels_ptr = nullptr;
  if (!config.qrels_path.empty()) {
    qrels = load_qrels(config.qrels_path);
    validate_qrels(qrels, index);
    qrels_ptr = &qrels;
  }
  if (!config.rewrite_client.endpoint.empty()) {
    RemoteClient client(config.rewrite_client, std::make_shared<HttpTransport>());
    fill_missing_rewrites(conversations, client);
  }

  const SearchEnvironment env(index, config.env);
  LinearSoftmaxPolicy policy;
  LinearCritic critic;
  const LinearSoftmaxPolicy reference = policy.snapshot();
  Rng rng(config.seed);

  std::vector<std::pair<std::size_t, int>> turn_pool;
  for (std::size_t c = 0; c < conversations.size(); ++c)
    for (std::size_t t = 0; t < conversations[c].turns.size(); ++t)
      turn_pool.emplace_back(c, static_cast<int>(t));
  if (turn_pool.empty()) throw std::runtime_error("dataset has no turns");

  TrainResult result;
  result.diagnostics_path = (fs::path(config.output_dir) / "diagnostics.jsonl").string();
  std::ofstream diag_out(result.diagnostics_path, std::ios::trunc);
  if (!diag_out) throw std::runtime_error("cannot write " + result.diagnostics_path);

  std::uniform_int_distribution<std::size_t> pick_turn(0, turn_pool.size() - 1);
  for (std::uint64_t step = 1; step <= config.total_steps; ++step) {
    RolloutBatch batch;
    for (std::size_t r = 0; r < config.ppo.rollouts_per_step; ++r) {
      const auto& [c, t] = turn_pool[pick_turn(rng)];
      batch.trajectories.push_back(collect_episode(env, conversations[c], t, policy, critic,
                                                   config.reward, qrels_ptr, rng,
                                                   /*greedy=*/false));
    }
    StepDiagnostics diag = update_step(policy, critic, reference, batch, config.ppo);
    diag.step = step;
    result.diagnostics.push_back(diag);
    diag_out << diagnostics_to_json(diag).dump() << "\n";

    if (step % config.checkpoint_interval == 0) {
      Checkpoint checkpoint;
      checkpoint.step = step;
      checkpoint.policy_weights = policy.weights();
      checkpoint.critic_weights = critic.weights();
      const std::string path =
          (fs::path(config.output_dir) / checkpoint_file_name(step)).string();
      save_checkpoint(checkpoint, path);
      result.checkpoint_paths.push_back(path);
    }
  }
  diag_out.close();

  const CheckpointChoice choice = select_checkpoint(result.diagnostics, config.checkpoint_interval);
  result.selected_step = choice.step;
  result.collapse_detected = choice.collapse_detected;

  Checkpoint selected;
  if (choice.step == 0) {
    // 0-step training: the initial policy, unchanged.
    selected.step = 0;
    selected.policy_weights = policy.weights();
    selected.critic_weights = critic.weights();
  } else {
    selected = load_checkpoint(
        (fs::path(config.output_dir) / checkpoint_file_name(choice.step)).string());
  }
  result.selected_checkpoint_path =
      (fs::path(config.output_dir) / "checkpoint_selected.json").string();
  save_checkpoint(selected, result.selected_checkpoint_path);

  json summary{{"selected_step", result.selected_step},
               {"collapse_detected", result.collapse_detected},
               {"total_steps", config.total_steps},
               {"checkpoints", result.checkpoint_paths.size()}};
  write_file((fs::path(config.output_dir) / "training_summary.json").string(),
             summary.dump(2) + "\n");
  return result;
}

// ---- evaluation ----

EvalReport evaluate_episodes(const std::vector<Conversation>& conversations,
                             const SearchEnvironment& env, const RewardConfig& reward_config,
                             const Qrels* qrels, const EmissionFn& emit) {
  EvalReport report;
  report.alpha = reward_config.alpha;
  report.intent_mode = intent_mode_name(reward_config.intent_mode);

  for (const Conversation& conv : conversations) {
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
      Episode episode = env.reset(conv, static_cast<int>(t));
      while (!episode.terminal()) env.step(episode, emit(episode));

      const Turn& turn = episode.turn();
      const RewardBreakdown breakdown =
          total_reward(episode.trajectory(), turn, episode.query_results(), reward_config);

      PerTurnEval row;
      row.conversation_id = conv.id;
      row.turn_index = static_cast<int>(t);
      row.question = turn.question;
      row.gold_answer = turn.answer;
      row.predicted_answer = episode.trajectory().answer_text().value_or("");
      row.answer_f1 = breakdown.answer_f1;
      row.intent_f1 = turn.rewrite
                          ? intent_reward(episode.trajectory().queries(), *turn.rewrite)
                          : 0.0;
      row.searches_used = static_cast<int>(episode.searches_used());
      row.reasoning_tokens = static_cast<int>(episode.trajectory().think_word_count());

      if (!episode.query_results().empty()) {
        const RetrievalResult& first = episode.query_results().front();
        row.first_query = first.query;
        const std::set<std::string>* relevant =
            relevant_for(turn, qrels, conv.id, static_cast<int>(t));
        const std::set<std::string> empty;
        const std::set<std::string>& rel = relevant ? *relevant : empty;
        row.ndcg3 = rel.empty() ? 0.0 : ndcg_at(first, rel, 3);
        row.recall10 = rel.empty() ? 0.0 : recall_at(first, rel, 10);
        row.mrr_score = rel.empty() ? 0.0 : mrr(first, rel);
        row.hit3 = rel.empty() ? 0 : hit_at(first, rel, 3);
      }
      report.per_turn.push_back(std::move(row));
    }
  }
  return report;
}

EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<Conversation>& conversations,
                    const SearchEnvironment& env, const RewardConfig& reward_config,
                    const Qrels* qrels) {
  if (checkpoint.feature_registry != kFeatureRegistryVersion)
    throw std::runtime_error("checkpoint feature registry '" + checkpoint.feature_registry +
                             "' does not match this build ('" + kFeatureRegistryVersion + "')");
  const LinearSoftmaxPolicy policy(checkpoint.policy_weights);
  EvalReport report = evaluate_episodes(
      conversations, env, reward_config, qrels, [&policy](const Episode& episode) {
        const MacroVocabulary vocab = build_vocabulary(episode);
        const FeatureMatrix features = policy_feature_matrix(episode, vocab);
        return vocab.actions[policy.greedy(features)].emission;
      });
  report.checkpoint_step = checkpoint.step;
  return report;
}

double EvalReport::mean_answer_f1() const {
  if (per_turn.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& row : per_turn) sum += row.answer_f1;
  return sum / static_cast<double>(per_turn.size());
}

double EvalReport::mean_intent_f1() const {
  if (per_turn.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& row : per_turn) sum += row.intent_f1;
  return sum / static_cast<double>(per_turn.size());
}

double EvalReport::mean_reasoning_tokens() const {
  if (per_turn.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& row : per_turn) sum += row.reasoning_tokens;
  return sum / static_cast<double>(per_turn.size());
}

std::map<int, std::size_t> EvalReport::searches_histogram() const {
  std::map<int, std::size_t> hist;
  for (const auto& row : per_turn) ++hist[row.searches_used];
  return hist;
}

std::map<int, EvalReport::HitBin> EvalReport::hit_bins() const {
  std::map<int, HitBin> bins;
  bins[0] = {};
  bins[1] = {};
  for (const auto& row : per_turn) {
    const int bin = row.hit3.value_or(0);
    ++bins[bin].count;
    bins[bin].mean_answer_f1 += row.answer_f1;
  }
  for (auto& [bin, data] : bins)
    if (data.count > 0) data.mean_answer_f1 /= static_cast<double>(data.count);
  return bins;
}

namespace {

json per_turn_to_json(const PerTurnEval& row) {
  json j{{"conversation_id", row.conversation_id},
         {"turn_index", row.turn_index},
         {"question", row.question},
         {"gold_answer", row.gold_answer},
         {"predicted_answer", row.predicted_answer},
         {"answer_f1", row.answer_f1},
         {"intent_f1", row.intent_f1},
         {"searches_used", row.searches_used},
         {"reasoning_tokens", row.reasoning_tokens}};
  if (row.first_query) j["first_query"] = *row.first_query;
  if (row.ndcg3) j["ndcg3"] = *row.ndcg3;
  if (row.recall10) j["recall10"] = *row.recall10;
  if (row.mrr_score) j["mrr"] = *row.mrr_score;
  if (row.hit3) j["hit3"] = *row.hit3;
  return j;
}

PerTurnEval per_turn_from_json(const json& j) {
  PerTurnEval row;
  row.conversation_id = j.at("conversation_id").get<std::string>();
  row.turn_index = j.at("turn_index").get<int>();
  row.question = j.at("question").get<std::string>();
  row.gold_answer = j.at("gold_answer").get<std::string>();
  row.predicted_answer = j.at("predicted_answer").get<std::string>();
  row.answer_f1 = j.at("answer_f1").get<double>();
  row.intent_f1 = j.at("intent_f1").get<double>();
  row.searches_used = j.at("searches_used").get<int>();
  row.reasoning_tokens = j.at("reasoning_tokens").get<int>();
  if (j.contains("first_query")) row.first_query = j["first_query"].get<std::string>();
  if (j.contains("ndcg3")) row.ndcg3 = j["ndcg3"].get<double>();
  if (j.contains("recall10")) row.recall10 = j["recall10"].get<double>();
  if (j.contains("mrr")) row.mrr_score = j["mrr"].get<double>();
  if (j.contains("hit3")) row.hit3 = j["hit3"].get<int>();
  return row;
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  json per_turn = json::array();
  for (const auto& row : report.per_turn) per_turn.push_back(per_turn_to_json(row));

  json hist = json::object();
  for (const auto& [searches, count] : report.searches_histogram())
    hist[std::to_string(searches)] = count;
  json bins = json::object();
  for (const auto& [bin, data] : report.hit_bins())
    bins[std::to_string(bin)] = json{{"count", data.count},
                                     {"mean_answer_f1", data.mean_answer_f1}};

  json j{{"config",
          json{{"alpha", report.alpha},
               {"intent_mode", report.intent_mode},
               {"checkpoint_step", report.checkpoint_step},
               {"label", report.label}}},
         {"per_turn", std::move(per_turn)},
         {"aggregates",
          json{{"turns", report.per_turn.size()},
               {"mean_answer_f1", report.mean_answer_f1()},
               {"mean_intent_f1", report.mean_intent_f1()},
               {"mean_reasoning_tokens", report.mean_reasoning_tokens()},
               {"searches_histogram", std::move(hist)},
               {"hit_bins", std::move(bins)}}}};
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
  const json j = json::parse(text);
  EvalReport report;
  report.alpha = j.at("config").at("alpha").get<double>();
  report.intent_mode = j.at("config").at("intent_mode").get<std::string>();
  report.checkpoint_step = j.at("config").at("checkpoint_step").get<std::uint64_t>();
  report.label = j.at("config").value("label", std::string{});
  for (const json& row : j.at("per_turn")) report.per_turn.push_back(per_turn_from_json(row));
  return report;
}

void save_eval_report(const EvalReport& report, const std::string& path) {
  write_file(path, eval_report_to_json(report));
}

EvalReport load_eval_report(const std::string& path) {
  return eval_report_from_json(read_file(path));
}

ReportBundle build_report(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("build_report: at least one report required");

  json j;
  std::ostringstream text;
  text << std::fixed << std::setprecision(4);

  // (a) reasoning-length distribution per run
  json reasoning = json::array();
  text << "reasoning length (think tokens per turn)\n";
  text << "run                          mean    p50     max\n";
  for (const auto& report : reports) {
    std::vector<int> lengths;
    for (const auto& row : report.per_turn) lengths.push_back(row.reasoning_tokens);
    std::sort(lengths.begin(), lengths.end());
    const int p50 = lengths.empty() ? 0 : lengths[lengths.size() / 2];
    const int max = lengths.empty() ? 0 : lengths.back();
    const std::string name =
        report.label.empty() ? "alpha=" + std::to_string(report.alpha) : report.label;
    reasoning.push_back(json{{"run", name},
                             {"mean", report.mean_reasoning_tokens()},
                             {"p50", p50},
                             {"max", max}});
    text << std::left << std::setw(28) << name << std::right << std::setw(7)
         << report.mean_reasoning_tokens() << std::setw(7) << p50 << std::setw(8) << max
         << "\n";
  }
  j["reasoning_length"] = std::move(reasoning);

  // (b) searches-used vs answer F1
  json searches = json::array();
  text << "\nsearches used vs answer F1\n";
  text << "run                          searches  turns   mean_answer_f1\n";
  for (const auto& report : reports) {
    const std::string name =
        report.label.empty() ? "alpha=" + std::to_string(report.alpha) : report.label;
    std::map<int, std::pair<std::size_t, double>> by_searches;
    for (const auto& row : report.per_turn) {
      auto& cell = by_searches[row.searches_used];
      ++cell.first;
      cell.second += row.answer_f1;
    }
    for (const auto& [count, cell] : by_searches) {
      const double mean = cell.second / static_cast<double>(cell.first);
      searches.push_back(json{{"run", name},
                              {"searches", count},
                              {"turns", cell.first},
                              {"mean_answer_f1", mean}});
      text << std::left << std::setw(28) << name << std::right << std::setw(9) << count
           << std::setw(8) << cell.first << std::setw(17) << mean << "\n";
    }
  }
  j["searches_vs_f1"] = std::move(searches);

  // (c) alpha sweep
  json sweep = json::array();
  text << "\nalpha sweep\n";
  text << "alpha     mean_answer_f1  mean_intent_f1\n";
  for (const auto& report : reports) {
    sweep.push_back(json{{"alpha", report.alpha},
                         {"mean_answer_f1", report.mean_answer_f1()},
                         {"mean_intent_f1", report.mean_intent_f1()}});
    text << std::left << std::setw(10) << report.alpha << std::right << std::setw(14)
         << report.mean_answer_f1() << std::setw(16) << report.mean_intent_f1() << "\n";
  }
  j["alpha_sweep"] = std::move(sweep);

  return ReportBundle{j.dump(2) + "\n", text.str()};
}

JudgeSummary judge_report(const EvalReport& report, RemoteClient& client) {
  JudgeSummary summary;
  for (const auto& row : report.per_turn) {
    const JudgeVerdict verdict =
        client.judge(row.question, row.gold_answer, row.predicted_answer);
    switch (verdict) {
      case JudgeVerdict::kTrue: ++summary.judged_true; break;
      case JudgeVerdict::kFalse: ++summary.judged_false; break;
      case JudgeVerdict::kInvalid:
        ++summary.invalid;
        summary.warnings.push_back("invalid judge verdict for " + row.conversation_id +
                                   " turn " + std::to_string(row.turn_index));
        break;
    }
  }
  const std::size_t denominator = summary.judged_true + summary.judged_false;
  summary.accuracy = denominator == 0
                         ? 0.0
                         : static_cast<double>(summary.judged_true) /
                               static_cast<double>(denominator);
  return summary;
}

}  // namespace convrl
