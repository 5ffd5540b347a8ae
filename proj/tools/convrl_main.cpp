#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "convrl/client.hpp"
#include "convrl/corpus.hpp"
#include "convrl/dialogue.hpp"
#include "convrl/policy.hpp"
#include "convrl/trainer.hpp"
#include "convrl/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace convrl;

namespace {

int cmd_gen_data(const SyntheticSpec& spec, const std::string& out_dir) {
  const SyntheticData data = generate_synthetic(spec);
  fs::create_directories(out_dir);
  save_dataset(data.conversations, (fs::path(out_dir) / "dataset.jsonl").string());
  save_corpus_jsonl(data.corpus, (fs::path(out_dir) / "corpus.jsonl").string());
  save_qrels(data.qrels, (fs::path(out_dir) / "qrels.tsv").string());

  const DatasetStats stats = dataset_stats(data.conversations);
  const double reachability = rewrite_reachability(data.conversations);
  std::cout << "wrote " << stats.conversation_count << " conversations ("
            << stats.turn_count << " turns, mean answer length "
            << stats.mean_answer_words << " words), " << data.corpus.size()
            << " passages\n";
  std::cout << "rewrite reachability: " << reachability << "\n";
  return 0;
}

int cmd_index(const std::string& corpus_path, const std::string& out_path) {
  const auto corpus = load_corpus_jsonl(corpus_path);
  const Index index = Index::build(corpus);
  std::cout << "indexed " << index.doc_count() << " passages, average length "
            << index.avg_doc_len() << " tokens\n";
  if (!out_path.empty()) {
    json stats{{"doc_count", index.doc_count()}, {"avg_doc_len", index.avg_doc_len()}};
    write_file(out_path, stats.dump(2) + "\n");
    std::cout << "wrote index stats to " << out_path << "\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& output_override,
              double alpha_override, bool has_alpha) {
  RunConfig config = RunConfig::from_file(config_path);
  if (!output_override.empty()) config.output_dir = output_override;
  if (has_alpha) config.reward.alpha = alpha_override;
  const TrainResult result = run_training(config);
  std::cout << "trained " << config.total_steps << " steps; wrote "
            << result.checkpoint_paths.size() << " checkpoints to " << config.output_dir
            << "\n";
  std::cout << "selected checkpoint: step " << result.selected_step
            << (result.collapse_detected ? " (reward collapse, best window selected)" : "")
            << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
             const std::string& corpus_path, const std::string& qrels_path,
             const std::string& out_path, double alpha, const std::string& intent_mode) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const auto conversations = load_dataset(dataset_path);
  const auto corpus = load_corpus_jsonl(corpus_path);
  const Index index = Index::build(corpus);

  Qrels qrels;
  const Qrels* qrels_ptr = nullptr;
  if (!qrels_path.empty()) {
    qrels = load_qrels(qrels_path);
    validate_qrels(qrels, index);
    qrels_ptr = &qrels;
  }

  RewardConfig reward;
  reward.alpha = alpha;
  if (intent_mode == "query_f1") reward.intent_mode = IntentMode::kQueryF1;
  else if (intent_mode == "hit_at_n") reward.intent_mode = IntentMode::kHitAtN;
  else if (intent_mode == "off") reward.intent_mode = IntentMode::kOff;
  else throw ConfigError("unknown intent mode: " + intent_mode);

  const SearchEnvironment env(index);
  const EvalReport report = evaluate(checkpoint, conversations, env, reward, qrels_ptr);
  save_eval_report(report, out_path);
  std::cout << "evaluated " << report.per_turn.size() << " turns: mean answer F1 "
            << report.mean_answer_f1() << ", mean intent F1 " << report.mean_intent_f1()
            << "\n";
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& report_paths, const std::string& out_dir) {
  std::vector<EvalReport> reports;
  for (const auto& path : report_paths) reports.push_back(load_eval_report(path));
  const ReportBundle bundle = build_report(reports);
  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "report.json").string(), bundle.json);
  write_file((fs::path(out_dir) / "report.txt").string(), bundle.text);
  std::cout << bundle.text;
  return 0;
}

int cmd_judge(const std::string& report_path, const std::string& endpoint, int timeout_ms,
              int max_retries, const std::string& out_path) {
  const EvalReport report = load_eval_report(report_path);
  ClientConfig config;
  config.endpoint = endpoint;
  config.max_retries = max_retries;
  RemoteClient client(config, std::make_shared<HttpTransport>(timeout_ms));
  const JudgeSummary summary = judge_report(report, client);
  for (const auto& warning : summary.warnings) std::cerr << "warning: " << warning << "\n";

  json j{{"judged_true", summary.judged_true},
         {"judged_false", summary.judged_false},
         {"invalid", summary.invalid},
         {"accuracy", summary.accuracy}};
  if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conversational search RL trainer"};
  app.require_subcommand(1);

  // gen-data
  SyntheticSpec spec;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset, corpus and qrels");
  gen->add_option("--conversations", spec.conversations, "number of conversations");
  gen->add_option("--turns", spec.turns_per_conversation, "turns per conversation");
  gen->add_option("--entities", spec.entity_pool, "entity pool size");
  gen->add_option("--anaphora-rate", spec.anaphora_rate, "fraction of anaphoric turns");
  gen->add_option("--distractors", spec.distractors_per_conversation,
                  "distractor passages per conversation");
  gen->add_option("--seed", spec.seed, "random seed");
  gen->add_option("--out", gen_out, "output directory");

  // index
  std::string index_corpus, index_out;
  auto* index_cmd = app.add_subcommand("index", "build a BM25 index and report stats");
  index_cmd->add_option("--corpus", index_corpus, "corpus JSONL path")->required();
  index_cmd->add_option("--out", index_out, "stats output path");

  // train
  std::string train_config, train_out;
  double train_alpha = 0.0;
  auto* train = app.add_subcommand("train", "run PPO training from a config file");
  train->add_option("--config", train_config, "config file path")->required();
  train->add_option("--output-dir", train_out, "override train.output_dir");
  auto* alpha_opt = train->add_option("--alpha", train_alpha, "override reward.alpha");

  // eval
  std::string eval_ckpt, eval_dataset, eval_corpus, eval_qrels, eval_out = "eval_report.json";
  std::string eval_mode = "query_f1";
  double eval_alpha = 0.2;
  auto* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "dataset JSONL path")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "corpus JSONL path")->required();
  eval_cmd->add_option("--qrels", eval_qrels, "qrels TSV path");
  eval_cmd->add_option("--out", eval_out, "report output path");
  eval_cmd->add_option("--alpha", eval_alpha, "intent weight for reported rewards");
  eval_cmd->add_option("--intent-mode", eval_mode, "query_f1|hit_at_n|off");

  // report
  std::vector<std::string> report_paths;
  std::string report_out = "reports";
  auto* report_cmd = app.add_subcommand("report", "comparison tables from eval reports");
  report_cmd->add_option("--eval", report_paths, "eval report paths")->required();
  report_cmd->add_option("--out", report_out, "output directory");

  // judge
  std::string judge_report_path, judge_endpoint, judge_out;
  int judge_timeout = 10000, judge_retries = 3;
  auto* judge_cmd = app.add_subcommand("judge", "LLM-judge an eval report via an endpoint");
  judge_cmd->add_option("--report", judge_report_path, "eval report path")->required();
  judge_cmd->add_option("--endpoint", judge_endpoint, "judge endpoint URL")->required();
  judge_cmd->add_option("--timeout-ms", judge_timeout, "request timeout");
  judge_cmd->add_option("--max-retries", judge_retries, "retries after the first attempt");
  judge_cmd->add_option("--out", judge_out, "summary output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(spec, gen_out);
    if (index_cmd->parsed()) return cmd_index(index_corpus, index_out);
    if (train->parsed())
      return cmd_train(train_config, train_out, train_alpha, alpha_opt->count() > 0);
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_dataset, eval_corpus, eval_qrels, eval_out, eval_alpha,
                      eval_mode);
    if (report_cmd->parsed()) return cmd_report(report_paths, report_out);
    if (judge_cmd->parsed())
      return cmd_judge(judge_report_path, judge_endpoint, judge_timeout, judge_retries,
                       judge_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
