#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "convrl/dialogue.hpp"

namespace convrl {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

// POST transport behind the remote client; swap for a stub to run offline.
class Transport {
 public:
  virtual ~Transport() = default;
  // Returns the response body; throws TransportError on network failure,
  // timeout, or a non-2xx status.
  virtual std::string post(const std::string& endpoint, const std::string& body,
                           const HeaderList& headers) = 0;
};

// cpp-httplib backed transport.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(int timeout_ms = 10000) : timeout_ms_(timeout_ms) {}
  std::string post(const std::string& endpoint, const std::string& body,
                   const HeaderList& headers) override;

 private:
  int timeout_ms_;
};

struct ClientConfig {
  std::string endpoint;
  int max_retries = 3;   // additional attempts after the first
  int backoff_ms = 200;  // doubles per retry
  std::string token_env = "CONVRL_API_TOKEN";  // bearer token source
};

enum class JudgeVerdict { kTrue, kFalse, kInvalid };

struct ClientExchange {
  std::string request_body;
  std::string response_body;
};

// Judge / rewrite endpoint client. Sends a chat-style JSON body with a single
// user message; responses never feed the training reward.
class RemoteClient {
 public:
  RemoteClient(ClientConfig config, std::shared_ptr<Transport> transport);

  static std::string render_judge_prompt(const std::string& question,
                                         const std::string& golden_answer,
                                         const std::string& predicted_answer);
  static std::string render_rewrite_prompt(const Conversation& conversation, int turn_index);

  // Verdict parsed from the first response token, case-insensitive True/False;
  // anything else is kInvalid.
  JudgeVerdict judge(const std::string& question, const std::string& golden_answer,
                     const std::string& predicted_answer);

  // Model text returned verbatim (trimmed of surrounding whitespace).
  std::string rewrite(const Conversation& conversation, int turn_index);

  const std::vector<ClientExchange>& audit_log() const { return audit_log_; }

 private:
  std::string call(const std::string& prompt);

  ClientConfig config_;
  std::shared_ptr<Transport> transport_;
  std::vector<ClientExchange> audit_log_;
};

// Fills absent rewrites in place via the rewrite endpoint.
void fill_missing_rewrites(std::vector<Conversation>& conversations, RemoteClient& client);

}  // namespace convrl
