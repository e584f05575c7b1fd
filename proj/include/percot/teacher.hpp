#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "percot/cot.hpp"
#include "percot/prompts.hpp"

namespace percot {

class TeacherError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport-level failure; retryable unless `permanent`. May carry a server
// delay hint (rate limiting).
class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& msg,
                          std::optional<std::chrono::milliseconds> retry_after = std::nullopt,
                          bool permanent = false)
      : std::runtime_error(msg), retry_after(retry_after), permanent(permanent) {}

  std::optional<std::chrono::milliseconds> retry_after;
  bool permanent = false;
};

struct DecodingParams {
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;

  // Stable string folded into the cache key.
  std::string cache_token() const;
};

struct TeacherConfig {
  std::string endpoint_url;  // e.g. "http://127.0.0.1:8080" or "https://api.example.com"
  std::string model_name = "gpt-4.1";
  std::string api_key_env = "PERCOT_API_KEY";
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::milliseconds request_timeout{30000};
  int max_parallel = 4;
  std::filesystem::path cache_dir;
  DecodingParams decoding;

  void validate() const;  // throws TeacherError
};

struct RawCompletion {
  std::string text;
  std::string prompt_hash;
  std::string model_name;
  bool retrieved_from_cache = false;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Returns the completion text for a rendered prompt. Throws TransportError.
  virtual std::string complete(const std::string& prompt, const TeacherConfig& config) = 0;
};

// Chat-completions HTTP transport: POST {model, messages:[{role, content}]},
// reads choices[0].message.content. API key comes from the environment
// variable named in the config.
std::unique_ptr<Transport> make_http_transport();

// Deterministic offline teacher: reads the gold label and the numbered
// perspectives out of the prompt and produces a fixed-form reasoning text
// covering each perspective.
std::unique_ptr<Transport> make_mock_transport();

std::string prompt_cache_key(const std::string& model_name, const std::string& prompt,
                             const DecodingParams& decoding);

// Single completion with caching and retry/backoff. On a cache hit no
// transport call is made; on a miss the response is persisted (atomically)
// before returning. Empty completions are an error and are never cached.
RawCompletion request_cot(const TeacherPrompt& prompt, const TeacherConfig& config,
                          Transport& transport);

struct GenerationStats {
  int transport_calls = 0;
  int cache_hits = 0;
  int failures = 0;
};

// One CoTRecord per instance, in input order, validated against
// perspectives.size(). Individual failures are recorded on the record and do
// not abort the batch; an all-failed batch throws. At most
// config.max_parallel requests are in flight at any time.
std::vector<CoTRecord> generate_cot_dataset(const std::vector<AnalysisInstance>& instances,
                                            const PerspectiveSet& perspectives,
                                            const TeacherConfig& config, Transport& transport,
                                            GenerationStats* stats = nullptr);

}  // namespace percot
