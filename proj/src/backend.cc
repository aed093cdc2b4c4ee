// Copyright 2026 The lmeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lmeval/backend.h"

#include <algorithm>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "lmeval/error.h"
#include "lmeval/io.h"
#include "lmeval/text.h"

namespace lmeval {

const char* ToString(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::kTimeout:
      return "timeout";
    case BackendErrorKind::kProtocol:
      return "protocol";
    case BackendErrorKind::kUnavailable:
      return "unavailable";
    case BackendErrorKind::kCapability:
      return "capability";
  }
  return "unknown";
}

namespace {

using json = nlohmann::json;

[[noreturn]] void ProtocolFail(const std::string& what) {
  throw BackendError(BackendErrorKind::kProtocol, what);
}

json ParseBody(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    ProtocolFail(std::string("response is not JSON: ") + e.what());
  }
}

const json& FirstChoice(const json& body) {
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() ||
      body["choices"].empty() || !body["choices"][0].is_object()) {
    ProtocolFail("response has no choices");
  }
  return body["choices"][0];
}

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

std::size_t Utf8Length(std::string_view text) {
  std::size_t n = 0;
  for (char c : text) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

HttpBackend::HttpBackend(EndpointConfig config)
    : config_(std::move(config)),
      in_flight_(std::max<std::ptrdiff_t>(1, config_.max_in_flight)) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint URL '" + config_.base_url + "' has no scheme");
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) path_prefix_ = config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

HttpBackend::Response HttpBackend::Post(const std::string& path,
                                        const std::string& body) {
  SemaphoreGuard guard(in_flight_);
  Response out;
  std::string last_failure;
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
    bool transient = false;
    if (!res) {
      const httplib::Error err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        throw BackendError(BackendErrorKind::kTimeout,
                           "request to " + config_.base_url + path + " timed out (" +
                               httplib::to_string(err) + ")");
      }
      transient = true;
      last_failure = httplib::to_string(err);
    } else if (res->status == 429 || res->status >= 500) {
      transient = true;
      last_failure = "HTTP " + std::to_string(res->status);
    } else if (res->status >= 400) {
      ProtocolFail("HTTP " + std::to_string(res->status) + ": " + res->body);
    } else {
      out.body = std::move(res->body);
      return out;
    }

    if (transient && attempt >= config_.max_retries) {
      throw BackendError(BackendErrorKind::kUnavailable,
                         config_.base_url + path + " failed after " +
                             std::to_string(attempt + 1) +
                             " attempts; last error: " + last_failure);
    }
    const double factor = std::pow(2.0, attempt);
    const auto delay = std::min<std::chrono::milliseconds>(
        config_.backoff_max,
        std::chrono::milliseconds(static_cast<int64_t>(
            static_cast<double>(config_.backoff_initial.count()) * factor)));
    std::this_thread::sleep_for(delay);
    ++out.retries;
    ++total_retries_;
  }
}

CompletionRecord HttpBackend::Complete(std::string_view item_id, std::string_view prompt,
                                       const GenerationParams& params) {
  if (prompt.empty()) throw BackendError(BackendErrorKind::kProtocol, "empty prompt");
  CompletionRecord rec;
  rec.arxiv_id = std::string(item_id);
  rec.params = params;
  if (rec.params.model_id.empty()) rec.params.model_id = config_.model_id;
  rec.model_id = rec.params.model_id;
  rec.prompt = std::string(prompt);

  const json request = {{"model", rec.model_id},
                        {"prompt", rec.prompt},
                        {"temperature", params.temperature},
                        {"max_tokens", params.max_new_tokens}};
  const auto start = std::chrono::steady_clock::now();
  Response res = Post("/completions", request.dump());
  rec.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  rec.retrieved_at = std::chrono::system_clock::now();
  rec.retries = res.retries;

  const json body = ParseBody(res.body);
  const json& choice = FirstChoice(body);
  if (!choice.contains("text") || !choice["text"].is_string()) {
    ProtocolFail("choice has no text");
  }
  rec.completion = choice["text"].get<std::string>();
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
    rec.finish_reason = choice["finish_reason"].get<std::string>();
  }
  if (body.contains("usage") && body["usage"].is_object() &&
      body["usage"].contains("completion_tokens") &&
      body["usage"]["completion_tokens"].is_number_unsigned()) {
    rec.completion_tokens = body["usage"]["completion_tokens"].get<std::size_t>();
    if (*rec.completion_tokens > params.max_new_tokens) {
      ProtocolFail("server reported " + std::to_string(*rec.completion_tokens) +
                   " tokens, above max_tokens " + std::to_string(params.max_new_tokens));
    }
  }
  return rec;
}

ScoredSequence HttpBackend::ScoreLogprobs(std::string_view item_id,
                                          std::string_view prompt,
                                          std::string_view continuation) {
  const std::string full = std::string(prompt) + std::string(continuation);
  const json request = {{"model", config_.model_id},
                        {"prompt", full},
                        {"max_tokens", config_.score_max_tokens},
                        {"temperature", 0.0},
                        {"echo", true},
                        {"logprobs", 0}};
  Response res = Post("/completions", request.dump());
  const json body = ParseBody(res.body);
  const json& choice = FirstChoice(body);
  if (!choice.contains("logprobs") || choice["logprobs"].is_null()) {
    throw BackendError(BackendErrorKind::kCapability,
                       "server returned no logprobs for an echo request");
  }
  const json& lp = choice["logprobs"];
  if (!lp.is_object() || !lp.contains("token_logprobs") || !lp.contains("text_offset") ||
      !lp["token_logprobs"].is_array() || !lp["text_offset"].is_array() ||
      lp["token_logprobs"].size() != lp["text_offset"].size()) {
    ProtocolFail("logprobs object lacks aligned token_logprobs/text_offset");
  }

  const std::size_t begin = Utf8Length(prompt);
  const std::size_t end = begin + Utf8Length(continuation);
  ScoredSequence seq;
  seq.id = std::string(item_id);
  const auto& offsets = lp["text_offset"];
  const auto& logprobs = lp["token_logprobs"];
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (!offsets[i].is_number_integer()) ProtocolFail("non-integer text_offset");
    const auto off = offsets[i].get<int64_t>();
    if (off < 0) ProtocolFail("negative text_offset");
    if (static_cast<std::size_t>(off) < begin || static_cast<std::size_t>(off) >= end) {
      continue;
    }
    if (!logprobs[i].is_number()) ProtocolFail("continuation token without a logprob");
    const double value = logprobs[i].get<double>();
    if (std::isnan(value) || value > 0.0) {
      ProtocolFail("server returned logprob " + std::to_string(value) + " > 0");
    }
    seq.token_logprobs.push_back(value);
  }
  if (seq.token_logprobs.empty()) ProtocolFail("no continuation tokens were scored");
  return seq;
}

EmbeddingVector HttpBackend::Embed(std::string_view text) {
  const json request = {{"model", config_.model_id}, {"input", std::string(text)}};
  Response res = Post("/embeddings", request.dump());
  const json body = ParseBody(res.body);
  if (!body.is_object() || !body.contains("data") || !body["data"].is_array() ||
      body["data"].empty() || !body["data"][0].contains("embedding") ||
      !body["data"][0]["embedding"].is_array()) {
    ProtocolFail("embedding response has no data[0].embedding");
  }
  EmbeddingVector out;
  out.model_id = config_.model_id;
  for (const auto& v : body["data"][0]["embedding"]) {
    if (!v.is_number()) ProtocolFail("non-numeric embedding component");
    out.values.push_back(v.get<double>());
  }
  if (out.values.empty()) ProtocolFail("empty embedding");
  if (config_.embedding_dimension && out.dimension() != *config_.embedding_dimension) {
    ProtocolFail("embedding dimension " + std::to_string(out.dimension()) +
                 " != configured " + std::to_string(*config_.embedding_dimension));
  }
  return out;
}

ScoredSequence ParseLogprobLine(std::string_view line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  if (!j.is_object()) throw FormatError("record is not an object", line_number);
  ScoredSequence seq;
  if (!j.contains("id") || !j["id"].is_string()) {
    throw FormatError("missing string 'id'", line_number);
  }
  seq.id = j["id"].get<std::string>();
  if (!j.contains("token_logprobs") || !j["token_logprobs"].is_array()) {
    throw FormatError("missing array 'token_logprobs'", line_number);
  }
  for (const auto& v : j["token_logprobs"]) {
    if (!v.is_number()) throw FormatError("non-numeric logprob", line_number);
    const double lp = v.get<double>();
    if (std::isnan(lp) || lp > 0.0) {
      throw FormatError("logprob " + v.dump() + " is positive", line_number);
    }
    seq.token_logprobs.push_back(lp);
  }
  if (seq.token_logprobs.empty()) throw FormatError("no logprobs", line_number);
  if (j.contains("norm_length") && !j["norm_length"].is_null()) {
    if (!j["norm_length"].is_number_unsigned() || j["norm_length"].get<std::size_t>() == 0) {
      throw FormatError("norm_length must be a positive integer", line_number);
    }
    seq.norm_length = j["norm_length"].get<std::size_t>();
  }
  return seq;
}

std::vector<ScoredSequence> LoadLogprobDump(const std::filesystem::path& path) {
  std::vector<ScoredSequence> out;
  ForEachLine(path, [&](std::string_view line, std::size_t number) {
    if (Trim(line).empty()) return;
    out.push_back(ParseLogprobLine(line, number));
  });
  return out;
}

std::string LogprobToJsonLine(const ScoredSequence& seq) {
  json j = {{"id", seq.id}, {"token_logprobs", seq.token_logprobs}};
  if (seq.norm_length) j["norm_length"] = *seq.norm_length;
  return j.dump();
}

OfflineBackend::OfflineBackend(const std::optional<std::filesystem::path>& logprob_dump,
                               const std::optional<std::filesystem::path>& completions_dump,
                               std::string model_id)
    : model_id_(std::move(model_id)) {
  if (logprob_dump) {
    for (auto& seq : LoadLogprobDump(*logprob_dump)) {
      std::string id = seq.id;
      sequences_.insert_or_assign(std::move(id), std::move(seq));
    }
  }
  if (completions_dump) {
    ForEachLine(*completions_dump, [&](std::string_view line, std::size_t number) {
      if (Trim(line).empty()) return;
      try {
        const json j = json::parse(line);
        completions_.insert_or_assign(j.at("id").get<std::string>(),
                                      j.at("completion").get<std::string>());
      } catch (const json::exception& e) {
        throw FormatError(e.what(), number);
      }
    });
  }
}

CompletionRecord OfflineBackend::Complete(std::string_view item_id,
                                          std::string_view prompt,
                                          const GenerationParams& params) {
  auto it = completions_.find(item_id);
  if (it == completions_.end()) {
    throw BackendError(BackendErrorKind::kUnavailable,
                       "no stored completion for '" + std::string(item_id) + "'");
  }
  CompletionRecord rec;
  rec.arxiv_id = std::string(item_id);
  rec.model_id = model_id_;
  rec.prompt = std::string(prompt);
  rec.completion = it->second;
  rec.params = params;
  rec.params.model_id = model_id_;
  return rec;
}

ScoredSequence OfflineBackend::ScoreLogprobs(std::string_view item_id, std::string_view,
                                             std::string_view) {
  auto it = sequences_.find(item_id);
  if (it == sequences_.end()) {
    throw BackendError(BackendErrorKind::kUnavailable,
                       "no stored logprobs for '" + std::string(item_id) + "'");
  }
  return it->second;
}

EmbeddingVector OfflineBackend::Embed(std::string_view) {
  throw BackendError(BackendErrorKind::kCapability, "offline backend has no embeddings");
}

}  // namespace lmeval
