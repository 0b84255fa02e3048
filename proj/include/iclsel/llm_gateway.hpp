#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iclsel/error.hpp"
#include "iclsel/ideology.hpp"
#include "iclsel/prompting.hpp"

namespace iclsel {

struct LLMConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key;  // never serialized
  double temperature = 0.0;
  std::size_t max_in_flight = 4;
  int max_retries = 3;
  std::chrono::seconds timeout{60};
  std::chrono::milliseconds backoff_base{1000};
  PromptLayout layout = PromptLayout::flat;
  // Hard cap on the flat prompt length; 0 disables it.
  std::size_t max_prompt_chars = 0;

  // Fills base_url and api_key from LLM_BASE_URL / LLM_API_KEY when set.
  void apply_environment();
  void validate() const;
};

enum class ParseStatus { ok, ambiguous, empty, transport_error };

std::string_view parse_status_name(ParseStatus status);
std::optional<ParseStatus> parse_status_from_name(std::string_view name);

struct ParseResult {
  ParseStatus status = ParseStatus::empty;
  std::optional<Ideology> label;
};

// Case-insensitive whole-word search for the three label words. When the
// text has an "Answer:" marker only the part after the last marker counts.
// One distinct label -> ok; none -> empty; several -> ambiguous.
ParseResult parse_label(std::string_view text);

struct PredictionRecord {
  std::string query_id;
  std::optional<Ideology> gold;
  std::optional<Ideology> pred;  // present iff status == ok
  std::string raw_response;
  ParseStatus status = ParseStatus::empty;
  int attempts = 0;
  std::string config_hash;

  bool correct() const { return status == ParseStatus::ok && gold && pred == gold; }
};

std::string prediction_json(const PredictionRecord& record);
PredictionRecord prediction_from_json(std::string_view line);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

struct ChatRequest {
  std::string query_id;
  std::vector<ChatMessage> messages;
};

// Transient or permanent failure talking to the model endpoint.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retryable,
                 std::optional<std::chrono::milliseconds> retry_after = std::nullopt)
      : Error("transport", message), retryable_(retryable), retry_after_(retry_after) {}

  bool retryable() const { return retryable_; }
  std::optional<std::chrono::milliseconds> retry_after() const { return retry_after_; }

 private:
  bool retryable_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Returns the assistant text or throws TransportError. Must be safe to
  // call from several threads.
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string describe() const = 0;
};

// OpenAI-compatible POST {base_url}/v1/chat/completions.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(LLMConfig config);
  std::string complete(const ChatRequest& request) override;
  std::string describe() const override { return config_.model_name; }

  static std::string request_body(const LLMConfig& config, const ChatRequest& request);
  static std::string extract_content(std::string_view response_body);
  std::string endpoint_path() const;

 private:
  LLMConfig config_;
};

// Deterministic stand-ins that read the demonstration labels out of the
// prompt ("Ideology: <Label>" lines).
class MockLLM : public ChatBackend {
 public:
  enum class Kind { echo_majority, nearest_demo, fixed, scripted };

  static MockLLM echo_majority() { return MockLLM(Kind::echo_majority); }
  static MockLLM nearest_demo() { return MockLLM(Kind::nearest_demo); }
  static MockLLM fixed(std::string response);
  static MockLLM scripted(std::map<std::string, std::string> responses);
  // "echo_majority" | "nearest_demo" | "fixed:<label>"
  static MockLLM from_name(std::string_view spec);

  std::string complete(const ChatRequest& request) override;
  std::string describe() const override;

 private:
  explicit MockLLM(Kind kind) : kind_(kind) {}

  Kind kind_;
  std::string fixed_;
  std::map<std::string, std::string> scripted_;
};

// Demonstration labels in prompt order, as the mocks see them.
std::vector<Ideology> demo_labels_in(const std::vector<ChatMessage>& messages);

inline constexpr std::string_view kClarification =
    "Respond with exactly one word: liberal, neutral, or conservative.";

struct ClassifyRequest {
  std::string query_id;
  std::optional<Ideology> gold;
  RenderedPrompt prompt;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Sends prompts with retries and a single clarification reprompt on an
// ambiguous answer. Failures end up in the record's status, never thrown.
class Classifier {
 public:
  Classifier(ChatBackend& backend, LLMConfig config, std::string config_hash,
             Sleeper sleeper = nullptr);

  PredictionRecord classify(const ClassifyRequest& request);

  // Up to max_in_flight requests concurrently; output sorted by query_id.
  std::vector<PredictionRecord> classify_batch(const std::vector<ClassifyRequest>& requests);

  std::size_t requests_sent() const { return requests_sent_.load(); }

 private:
  // Returns the response text, or nullopt after exhausting retries.
  std::optional<std::string> send(const ChatRequest& request, int& attempts, std::string& error);

  ChatBackend& backend_;
  LLMConfig config_;
  std::string config_hash_;
  Sleeper sleeper_;
  std::atomic<std::size_t> requests_sent_{0};
};

}  // namespace iclsel
