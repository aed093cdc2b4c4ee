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

// In-process scripted server for the completions/embeddings wire protocol.
//
// Default behaviour is fully deterministic:
//   tokens       whitespace-delimited words, each carrying its leading spaces
//   logprob      -0.1 * (1 + (code points of the stripped word) % 4), halved
//                when the model name contains "tuned"; the first token of an
//                echoed prompt has a null logprob
//   completion   the last five prompt words in reverse order, capped at
//                max_tokens words
//   embedding    768 bins; byte b adds 1 to bin (7 b) % 768, bin 767 holds 1
//   "FAIL"       any prompt or input containing it gets HTTP 500
// Tests override either route with a custom handler.

#ifndef LMEVAL_TESTS_MOCK_SERVER_H_
#define LMEVAL_TESTS_MOCK_SERVER_H_

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "lmeval/backend.h"

namespace lmeval {

class MockServer {
 public:
  using json = nlohmann::json;
  using Handler = std::function<void(const json& request, httplib::Response& res)>;

  MockServer() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      Dispatch(completions_, &MockServer::DefaultCompletions, req, res);
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      Dispatch(embeddings_, &MockServer::DefaultEmbeddings, req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  void OnCompletions(Handler h) {
    std::lock_guard lock(mu_);
    completions_ = std::move(h);
  }
  void OnEmbeddings(Handler h) {
    std::lock_guard lock(mu_);
    embeddings_ = std::move(h);
  }

  std::size_t requests() const { return requests_.load(); }
  std::vector<json> received() const {
    std::lock_guard lock(mu_);
    return received_;
  }

  struct Token {
    std::string text;
    std::size_t offset = 0;  // code points
  };

  static std::vector<Token> Tokenize(const std::string& text) {
    std::vector<Token> out;
    std::size_t cp = 0;
    std::size_t i = 0;
    while (i < text.size()) {
      Token t;
      t.offset = cp;
      const auto take = [&] {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) ++cp;
        t.text += text[i++];
      };
      while (i < text.size() && text[i] == ' ') take();
      while (i < text.size() && text[i] != ' ') take();
      out.push_back(std::move(t));
    }
    return out;
  }

  static double TokenLogprob(const std::string& token, const std::string& model = "") {
    std::string stripped = token;
    stripped.erase(0, stripped.find_first_not_of(' '));
    const double scale = model.find("tuned") == std::string::npos ? 1.0 : 0.5;
    return -0.1 * scale * static_cast<double>(1 + Utf8Length(stripped) % 4);
  }

  static std::string DefaultCompletionText(const std::string& prompt, std::size_t max_tokens) {
    std::vector<std::string> words;
    for (const auto& t : Tokenize(prompt)) {
      std::string w = t.text;
      w.erase(0, w.find_first_not_of(' '));
      if (!w.empty()) words.push_back(w);
    }
    std::string out;
    std::size_t n = 0;
    for (auto it = words.rbegin(); it != words.rend() && n < 5 && n < max_tokens; ++it, ++n) {
      out += " " + *it;
    }
    return out;
  }

  static void DefaultCompletions(const json& req, httplib::Response& res) {
    const std::string prompt = req.at("prompt").get<std::string>();
    if (prompt.find("FAIL") != std::string::npos) {
      res.status = 500;
      return;
    }
    const std::string model = req.value("model", "");
    json choice = {{"index", 0}, {"finish_reason", "length"}};
    json usage = json::object();
    if (req.value("echo", false)) {
      json tokens = json::array(), logprobs = json::array(), offsets = json::array();
      bool first = true;
      for (const auto& t : Tokenize(prompt)) {
        tokens.push_back(t.text);
        offsets.push_back(t.offset);
        logprobs.push_back(first ? json(nullptr) : json(TokenLogprob(t.text, model)));
        first = false;
      }
      choice["text"] = prompt;
      choice["logprobs"] = {
          {"tokens", tokens}, {"token_logprobs", logprobs}, {"text_offset", offsets}};
      usage["completion_tokens"] = 0;
    } else {
      const std::size_t max_tokens = req.at("max_tokens").get<std::size_t>();
      const std::string text = DefaultCompletionText(prompt, max_tokens);
      choice["text"] = text;
      choice["logprobs"] = nullptr;
      usage["completion_tokens"] = Tokenize(text).size();
    }
    const json body = {{"object", "text_completion"},
                       {"model", req.value("model", "")},
                       {"choices", json::array({choice})},
                       {"usage", usage}};
    res.set_content(body.dump(), "application/json");
  }

  static std::vector<double> DefaultEmbedding(const std::string& text, std::size_t dim = 768) {
    std::vector<double> v(dim, 0.0);
    for (unsigned char b : text) v[(7 * b) % dim] += 1.0;
    v[dim - 1] += 1.0;
    return v;
  }

  static void DefaultEmbeddings(const json& req, httplib::Response& res) {
    const std::string input = req.at("input").get<std::string>();
    if (input.find("FAIL") != std::string::npos) {
      res.status = 500;
      return;
    }
    const json body = {
        {"object", "list"},
        {"data", json::array({{{"index", 0}, {"embedding", DefaultEmbedding(input)}}})}};
    res.set_content(body.dump(), "application/json");
  }

  // Completions body for a scripted echo response.
  static json EchoBody(const std::vector<std::string>& tokens,
                       const std::vector<json>& logprobs) {
    json offsets = json::array();
    std::size_t cp = 0;
    std::string text;
    for (const auto& t : tokens) {
      offsets.push_back(cp);
      cp += Utf8Length(t);
      text += t;
    }
    return {{"choices",
             json::array({{{"text", text},
                           {"logprobs",
                            {{"tokens", tokens},
                             {"token_logprobs", logprobs},
                             {"text_offset", offsets}}}}})}};
  }

 private:
  void Dispatch(const Handler& custom, void (*fallback)(const json&, httplib::Response&),
                const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    json parsed;
    try {
      parsed = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      return;
    }
    Handler h;
    {
      std::lock_guard lock(mu_);
      received_.push_back(parsed);
      h = custom;
    }
    try {
      if (h) {
        h(parsed, res);
      } else {
        fallback(parsed, res);
      }
    } catch (const json::exception&) {
      res.status = 400;
    }
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  Handler completions_;
  Handler embeddings_;
  std::vector<json> received_;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace lmeval

#endif  // LMEVAL_TESTS_MOCK_SERVER_H_
