#include "convrl/client.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "convrl/environment.hpp"
#include "convrl/prompts.hpp"
#include "convrl/util.hpp"

namespace convrl {

using json = nlohmann::json;

std::string HttpTransport::post(const std::string& endpoint, const std::string& body,
                                const HeaderList& headers) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos)
    throw TransportError("endpoint is not a URL: " + endpoint);
  const std::size_t slash = endpoint.find('/', scheme + 3);
  const std::string base = slash == std::string::npos ? endpoint : endpoint.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : endpoint.substr(slash);

  httplib::Client client(base);
  client.set_connection_timeout(0, timeout_ms_ * 1000);
  client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
  client.set_write_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

  httplib::Headers hdrs;
  for (const auto& [key, value] : headers) hdrs.emplace(key, value);
  auto res = client.Post(path, hdrs, body, "application/json");
  if (!res) throw TransportError("request to " + endpoint + " failed: " +
                                 httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw TransportError("request to " + endpoint + " returned status " +
                         std::to_string(res->status));
  return res->body;
}

RemoteClient::RemoteClient(ClientConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (!transport_) throw std::invalid_argument("transport must not be null");
}

std::string RemoteClient::render_judge_prompt(const std::string& question,
                                              const std::string& golden_answer,
                                              const std::string& predicted_answer) {
  std::string prompt = judge_prompt_template();
  prompt = fill_placeholder(prompt, "{question}", question);
  prompt = fill_placeholder(prompt, "{golden_answer}", golden_answer);
  prompt = fill_placeholder(prompt, "{predicted_answer}", predicted_answer);
  return prompt;
}

std::string RemoteClient::render_rewrite_prompt(const Conversation& conversation,
                                                int turn_index) {
  std::string prompt = rewrite_prompt_template();
  prompt = fill_placeholder(prompt, "{ctx}", render_context_block(conversation, turn_index));
  prompt = fill_placeholder(
      prompt, "{user_utterance}",
      conversation.turns[static_cast<std::size_t>(turn_index)].question);
  return prompt;
}

std::string RemoteClient::call(const std::string& prompt) {
  const json body{{"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
  const std::string request = body.dump();

  HeaderList headers;
  if (const char* token = std::getenv(config_.token_env.c_str()); token && *token)
    headers.emplace_back("Authorization", std::string("Bearer ") + token);

  std::string response;
  int backoff = config_.backoff_ms;
  for (int attempt = 0;; ++attempt) {
    try {
      response = transport_->post(config_.endpoint, request, headers);
      break;
    } catch (const TransportError&) {
      if (attempt >= config_.max_retries) throw;
      if (backoff > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
  audit_log_.push_back({request, response});

  // Accept {"content": ...}, an OpenAI-style choices array, or raw text.
  try {
    const json parsed = json::parse(response);
    if (parsed.contains("content") && parsed["content"].is_string())
      return parsed["content"].get<std::string>();
    if (parsed.contains("choices") && parsed["choices"].is_array() &&
        !parsed["choices"].empty())
      return parsed["choices"][0].at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
  }
  return response;
}

JudgeVerdict RemoteClient::judge(const std::string& question, const std::string& golden_answer,
                                 const std::string& predicted_answer) {
  const std::string text =
      call(render_judge_prompt(question, golden_answer, predicted_answer));
  const auto tokens = split_whitespace(text);
  if (tokens.empty()) return JudgeVerdict::kInvalid;
  std::string first = to_lower(tokens.front());
  while (!first.empty() && std::ispunct(static_cast<unsigned char>(first.back())))
    first.pop_back();
  if (first == "true") return JudgeVerdict::kTrue;
  if (first == "false") return JudgeVerdict::kFalse;
  return JudgeVerdict::kInvalid;
}

std::string RemoteClient::rewrite(const Conversation& conversation, int turn_index) {
  return trim(call(render_rewrite_prompt(conversation, turn_index)));
}

void fill_missing_rewrites(std::vector<Conversation>& conversations, RemoteClient& client) {
  for (Conversation& conv : conversations) {
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
      if (conv.turns[t].rewrite) continue;
      const std::string rewrite = client.rewrite(conv, static_cast<int>(t));
      if (!rewrite.empty()) conv.turns[t].rewrite = rewrite;
    }
  }
}

}  // namespace convrl
