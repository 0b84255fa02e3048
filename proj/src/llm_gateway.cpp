#include "iclsel/llm_gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "iclsel/digest.hpp"
#include "iclsel/http_util.hpp"
#include "iclsel/rng.hpp"

namespace iclsel {

using nlohmann::json;

void LLMConfig::apply_environment() {
  if (const char* url = std::getenv("LLM_BASE_URL"); url && *url) base_url = url;
  if (const char* key = std::getenv("LLM_API_KEY"); key && *key) api_key = key;
}

void LLMConfig::validate() const {
  if (temperature < 0.0) throw Error("config", "temperature must be >= 0");
  if (max_in_flight < 1) throw Error("config", "max_in_flight must be >= 1");
  if (max_retries < 0) throw Error("config", "max_retries must be >= 0");
}

std::string_view parse_status_name(ParseStatus status) {
  switch (status) {
    case ParseStatus::ok:
      return "ok";
    case ParseStatus::ambiguous:
      return "ambiguous";
    case ParseStatus::empty:
      return "empty";
    case ParseStatus::transport_error:
      return "transport_error";
  }
  return "empty";
}

std::optional<ParseStatus> parse_status_from_name(std::string_view name) {
  for (auto status : {ParseStatus::ok, ParseStatus::ambiguous, ParseStatus::empty,
                      ParseStatus::transport_error}) {
    if (parse_status_name(status) == name) return status;
  }
  return std::nullopt;
}

namespace {

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_';
}

bool contains_word(std::string_view haystack, std::string_view word) {
  for (std::size_t pos = haystack.find(word); pos != std::string_view::npos;
       pos = haystack.find(word, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

}  // namespace

ParseResult parse_label(std::string_view text) {
  std::string lowered = lowercase(text);
  std::string_view region = lowered;
  if (auto marker = region.rfind("answer:"); marker != std::string_view::npos) {
    region = region.substr(marker + 7);
  }
  std::optional<Ideology> found;
  for (Ideology label : kAllIdeologies) {
    if (!contains_word(region, to_string(label))) continue;
    if (found) return {ParseStatus::ambiguous, std::nullopt};
    found = label;
  }
  if (!found) return {ParseStatus::empty, std::nullopt};
  return {ParseStatus::ok, found};
}

std::string prediction_json(const PredictionRecord& record) {
  json doc;
  doc["query_id"] = record.query_id;
  doc["gold"] = record.gold ? json(std::string(to_string(*record.gold))) : json(nullptr);
  doc["pred"] = record.pred ? json(std::string(to_string(*record.pred))) : json(nullptr);
  doc["raw_response"] = record.raw_response;
  doc["parse_status"] = std::string(parse_status_name(record.status));
  doc["attempts"] = record.attempts;
  doc["config_hash"] = record.config_hash;
  return doc.dump();
}

PredictionRecord prediction_from_json(std::string_view line) {
  try {
    const json doc = json::parse(line);
    PredictionRecord record;
    record.query_id = doc.at("query_id").get<std::string>();
    auto read_label = [&doc](const char* key) -> std::optional<Ideology> {
      const auto& value = doc.at(key);
      if (value.is_null()) return std::nullopt;
      auto label = parse_ideology(value.get<std::string>());
      if (!label) throw Error("malformed_predictions", std::string("bad label in '") + key + "'");
      return label;
    };
    record.gold = read_label("gold");
    record.pred = read_label("pred");
    record.raw_response = doc.at("raw_response").get<std::string>();
    auto status = parse_status_from_name(doc.at("parse_status").get<std::string>());
    if (!status) throw Error("malformed_predictions", "unknown parse_status");
    record.status = *status;
    record.attempts = doc.at("attempts").get<int>();
    record.config_hash = doc.at("config_hash").get<std::string>();
    if (record.pred.has_value() != (record.status == ParseStatus::ok)) {
      throw Error("malformed_predictions", "pred must be present exactly when parse_status is ok");
    }
    return record;
  } catch (const json::exception& e) {
    throw Error("malformed_predictions", e.what());
  }
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write predictions " + path.string());
  for (const auto& record : records) out << prediction_json(record) << '\n';
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open predictions " + path.string());
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(prediction_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

HttpChatBackend::HttpChatBackend(LLMConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw Error("config", "LLM base URL is not configured");
  config_.validate();
}

std::string HttpChatBackend::endpoint_path() const {
  const auto url = split_url(config_.base_url);
  const bool has_version = url.path.size() >= 3 && url.path.compare(url.path.size() - 3, 3, "/v1") == 0;
  return url.path + (has_version ? "/chat/completions" : "/v1/chat/completions");
}

std::string HttpChatBackend::request_body(const LLMConfig& config, const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body;
  body["model"] = config.model_name;
  body["messages"] = std::move(messages);
  body["temperature"] = config.temperature;
  return body.dump();
}

std::string HttpChatBackend::extract_content(std::string_view response_body) {
  try {
    const json doc = json::parse(response_body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed completion response: ") + e.what(), false);
  }
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  const auto url = split_url(config_.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = client.Post(endpoint_path(), headers, request_body(config_, request), "application/json");
  if (!res) {
    throw TransportError("request to " + url.origin + " failed: " + httplib::to_string(res.error()),
                         true);
  }
  if (res->status == 429 || res->status >= 500) {
    std::optional<std::chrono::milliseconds> wait;
    if (res->has_header("Retry-After")) {
      try {
        wait = std::chrono::milliseconds(
            static_cast<long long>(std::stod(res->get_header_value("Retry-After")) * 1000.0));
      } catch (const std::exception&) {
        // HTTP-date form is not supported; fall back to exponential backoff.
      }
    }
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status), true, wait);
  }
  if (res->status != 200) {
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 200),
                         false);
  }
  return extract_content(res->body);
}

std::vector<Ideology> demo_labels_in(const std::vector<ChatMessage>& messages) {
  static constexpr std::string_view kMarker = "Ideology: ";
  std::vector<Ideology> labels;
  for (const auto& message : messages) {
    std::string_view content = message.content;
    std::size_t start = 0;
    while (start <= content.size()) {
      std::size_t end = content.find('\n', start);
      if (end == std::string_view::npos) end = content.size();
      auto line = content.substr(start, end - start);
      if (line.substr(0, kMarker.size()) == kMarker) {
        if (auto label = parse_ideology(line.substr(kMarker.size()))) labels.push_back(*label);
      }
      start = end + 1;
    }
  }
  return labels;
}

MockLLM MockLLM::fixed(std::string response) {
  MockLLM mock(Kind::fixed);
  mock.fixed_ = std::move(response);
  return mock;
}

MockLLM MockLLM::scripted(std::map<std::string, std::string> responses) {
  MockLLM mock(Kind::scripted);
  mock.scripted_ = std::move(responses);
  return mock;
}

MockLLM MockLLM::from_name(std::string_view spec) {
  if (spec == "echo_majority") return echo_majority();
  if (spec == "nearest_demo") return nearest_demo();
  if (spec.substr(0, 6) == "fixed:") {
    auto label = parse_ideology(spec.substr(6));
    if (!label) throw Error("config", "fixed mock needs liberal|neutral|conservative");
    return fixed(std::string(to_string(*label)));
  }
  throw Error("config", "unknown mock '" + std::string(spec) + "'");
}

std::string MockLLM::describe() const {
  switch (kind_) {
    case Kind::echo_majority:
      return "mock:echo_majority";
    case Kind::nearest_demo:
      return "mock:nearest_demo";
    case Kind::fixed:
      return "mock:fixed:" + fixed_;
    case Kind::scripted:
      return "mock:scripted";
  }
  return "mock";
}

std::string MockLLM::complete(const ChatRequest& request) {
  switch (kind_) {
    case Kind::fixed:
      return fixed_;
    case Kind::scripted: {
      auto it = scripted_.find(request.query_id);
      return it == scripted_.end() ? std::string() : it->second;
    }
    case Kind::nearest_demo: {
      const auto labels = demo_labels_in(request.messages);
      return std::string(to_string(labels.empty() ? Ideology::Neutral : labels.front()));
    }
    case Kind::echo_majority: {
      std::array<std::size_t, kNumIdeologies> counts{};
      for (Ideology label : demo_labels_in(request.messages)) ++counts[index_of(label)];
      const auto top = *std::max_element(counts.begin(), counts.end());
      if (std::count(counts.begin(), counts.end(), top) > 1) return "neutral";
      return std::string(to_string(ideology_from_index(
          static_cast<std::size_t>(std::find(counts.begin(), counts.end(), top) - counts.begin()))));
    }
  }
  return {};
}

Classifier::Classifier(ChatBackend& backend, LLMConfig config, std::string config_hash,
                       Sleeper sleeper)
    : backend_(backend),
      config_(std::move(config)),
      config_hash_(std::move(config_hash)),
      sleeper_(std::move(sleeper)) {
  config_.validate();
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::optional<std::string> Classifier::send(const ChatRequest& request, int& attempts,
                                            std::string& error) {
  // Jitter is seeded per query so retry timing is reproducible too.
  Rng jitter(derive_seed(stable_hash64(request.query_id), attempts));
  for (int retry = 0;; ++retry) {
    ++attempts;
    ++requests_sent_;
    try {
      return backend_.complete(request);
    } catch (const TransportError& e) {
      error = e.what();
      if (!e.retryable() || retry >= config_.max_retries) return std::nullopt;
      auto delay = e.retry_after().value_or(std::chrono::milliseconds(static_cast<long long>(
          static_cast<double>(config_.backoff_base.count()) * (1 << retry) *
          (1.0 + 0.25 * uniform_unit(jitter)))));
      spdlog::warn("query '{}': {} (retry {} in {} ms)", request.query_id, e.what(), retry + 1,
                   delay.count());
      sleeper_(delay);
    } catch (const std::exception& e) {
      error = e.what();
      return std::nullopt;
    }
  }
}

PredictionRecord Classifier::classify(const ClassifyRequest& request) {
  PredictionRecord record;
  record.query_id = request.query_id;
  record.gold = request.gold;
  record.config_hash = config_hash_;

  ChatRequest chat{request.query_id, to_messages(request.prompt, config_.layout)};
  if (config_.max_prompt_chars > 0 && request.prompt.text().size() > config_.max_prompt_chars) {
    record.status = ParseStatus::transport_error;
    record.raw_response = "prompt exceeds the configured character budget";
    return record;
  }
  std::string error;
  auto response = send(chat, record.attempts, error);
  if (!response) {
    record.status = ParseStatus::transport_error;
    record.raw_response = error;
    return record;
  }
  record.raw_response = *response;
  ParseResult parsed = parse_label(*response);
  if (parsed.status == ParseStatus::ambiguous) {
    chat.messages.back().content += "\n\n";
    chat.messages.back().content += kClarification;
    auto retry = send(chat, record.attempts, error);
    if (!retry) {
      record.status = ParseStatus::transport_error;
      record.raw_response = error;
      return record;
    }
    record.raw_response = *retry;
    parsed = parse_label(*retry);
  }
  record.status = parsed.status;
  record.pred = parsed.label;
  return record;
}

std::vector<PredictionRecord> Classifier::classify_batch(const std::vector<ClassifyRequest>& requests) {
  std::vector<PredictionRecord> records(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) records[i] = classify(requests[i]);
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(config_.max_in_flight, requests.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  std::sort(records.begin(), records.end(),
            [](const PredictionRecord& a, const PredictionRecord& b) { return a.query_id < b.query_id; });
  return records;
}

}  // namespace iclsel
