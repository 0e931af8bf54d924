// Copyright 2026 The Undersense Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "undersense/transports.h"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "undersense/errors.h"
#include "undersense/json_util.h"

extern char** environ;

namespace undersense {

using nlohmann::json;

namespace {

std::string Errno(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

// Internal ids make every in-flight request unique whatever the caller
// chose; the caller's ids are restored before returning.
struct IdMap {
  std::unordered_map<std::string, size_t> index;
  std::vector<ScoreRequest> wire;
};

IdMap Relabel(std::span<const ScoreRequest> requests,
              unsigned long long& counter) {
  IdMap map;
  map.wire.reserve(requests.size());
  for (size_t i = 0; i < requests.size(); ++i) {
    ScoreRequest copy = requests[i];
    copy.request_id = "u" + std::to_string(counter++);
    map.index.emplace(copy.request_id, i);
    map.wire.push_back(std::move(copy));
  }
  return map;
}

// Decodes one response object and files it under its request.
void Accept(const json& item, const IdMap& map,
            std::span<const ScoreRequest> requests,
            std::vector<std::optional<ScoreResponse>>& out,
            const std::string& raw) {
  std::string id;
  try {
    id = RequireString(item, "request_id");
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("response without id: ") + e.what(), raw);
  }
  const auto it = map.index.find(id);
  if (it == map.index.end()) {
    throw ProtocolError("response for unknown request '" + id + "'", raw);
  }
  if (out[it->second]) {
    throw ProtocolError("duplicate response for request '" + id + "'", raw);
  }
  try {
    ScoreResponse response = ResponseFromJson(item, map.wire[it->second].context);
    response.request_id = requests[it->second].request_id;
    out[it->second] = std::move(response);
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what(), raw);
  }
}

std::vector<ScoreResponse> Collect(
    std::vector<std::optional<ScoreResponse>>& slots,
    std::span<const ScoreRequest> requests, const std::string& raw) {
  std::vector<ScoreResponse> responses;
  responses.reserve(slots.size());
  for (size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) {
      throw ProtocolError("no response for request '" +
                              requests[i].request_id + "'",
                          raw);
    }
    responses.push_back(std::move(*slots[i]));
  }
  CheckResponses(requests, responses, raw);
  return responses;
}

template <typename RoundTripFn>
std::vector<ScoreResponse> Chunked(std::span<const ScoreRequest> requests,
                                   size_t max_batch, RoundTripFn round_trip) {
  std::vector<ScoreResponse> responses;
  responses.reserve(requests.size());
  const size_t step = std::max<size_t>(max_batch, 1);
  for (size_t start = 0; start < requests.size(); start += step) {
    const size_t count = std::min(step, requests.size() - start);
    std::vector<ScoreResponse> part = round_trip(requests.subspan(start, count));
    for (ScoreResponse& response : part) responses.push_back(std::move(response));
  }
  return responses;
}

std::vector<std::string> SplitCommand(std::string_view command) {
  std::vector<std::string> argv;
  std::istringstream in{std::string(command)};
  for (std::string word; in >> word;) argv.push_back(word);
  return argv;
}

ScoreResponse ErrorResponse(const std::string& id, const std::string& message) {
  ScoreResponse response;
  response.request_id = id;
  response.error = message;
  return response;
}

json ErrorJson(const std::string& id, const std::string& message) {
  return {{"request_id", id}, {"error", message}};
}

}  // namespace

// Trained on the bundled benchmark (data/toy/params.json).
ToyModelParams DefaultToyParams() {
  ToyModelParams params;
  params.w = {18.431527362976208, -23.722221664173063,
              -4.845989005246936, -3.7443381424170985};
  params.noanswer_bias = 3.7443381424170736;
  return params;
}

SubprocessScorer::SubprocessScorer(std::vector<std::string> argv,
                                   TransportOptions options)
    : argv_(std::move(argv)), options_(options) {
  if (argv_.empty()) throw ContractViolation("exec: needs a command");
  // A dead child must surface as EPIPE, not kill the process.
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw TransportError(Errno("pipe"));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw TransportError(Errno("pipe"));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  for (const int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
    posix_spawn_file_actions_addclose(&actions, fd);
  }
  std::vector<char*> args;
  for (std::string& arg : argv_) args.push_back(arg.data());
  args.push_back(nullptr);
  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(),
                                environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw TransportError("cannot start '" + argv_[0] + "': " +
                         std::strerror(rc));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SubprocessScorer::~SubprocessScorer() { Shutdown(); }

void SubprocessScorer::Shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ <= 0) return;
  // Closing stdin asks the child to exit; give it a moment.
  for (int i = 0; i < 200; ++i) {
    if (::waitpid(pid_, nullptr, WNOHANG) != 0) {
      pid_ = -1;
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
  pid_ = -1;
}

void SubprocessScorer::WriteAll(const std::string& data) {
  if (to_child_ < 0) throw TransportError("scorer process is gone");
  size_t written = 0;
  while (written < data.size()) {
    const ssize_t n =
        ::write(to_child_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(Errno("write to scorer"));
    }
    written += static_cast<size_t>(n);
  }
}

std::string SubprocessScorer::ReadLine() {
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
  for (;;) {
    const size_t newline = buffer_.find('\n');
    if (newline != std::string::npos) {
      std::string line = buffer_.substr(0, newline);
      buffer_.erase(0, newline + 1);
      return line;
    }
    if (from_child_ < 0) throw TransportError("scorer process is gone");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw TransportError("scorer timed out");
    pollfd fd{from_child_, POLLIN, 0};
    const int ready = ::poll(&fd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw TransportError(Errno("poll"));
    }
    if (ready == 0) throw TransportError("scorer timed out");
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(Errno("read from scorer"));
    }
    if (n == 0) throw TransportError("scorer process closed its output");
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

std::vector<ScoreResponse> SubprocessScorer::RoundTrip(
    std::span<const ScoreRequest> requests) {
  const IdMap map = Relabel(requests, next_id_);
  std::string payload;
  for (const ScoreRequest& request : map.wire) {
    payload += RequestToJson(request).dump();
    payload += '\n';
  }
  WriteAll(payload);
  std::vector<std::optional<ScoreResponse>> slots(requests.size());
  std::string raw;
  for (size_t received = 0; received < requests.size();) {
    const std::string line = ReadLine();
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    raw += line;
    raw += '\n';
    json item;
    try {
      item = ParseJson(line);
    } catch (const FormatError& e) {
      throw ProtocolError(e.what(), line);
    }
    Accept(item, map, requests, slots, line);
    ++received;
  }
  return Collect(slots, requests, raw);
}

std::vector<ScoreResponse> SubprocessScorer::ScoreBatch(
    std::span<const ScoreRequest> requests) {
  std::lock_guard<std::mutex> lock(mutex_);
  return Chunked(requests, options_.max_batch,
                 [this](std::span<const ScoreRequest> part) {
                   return RoundTrip(part);
                 });
}

ScorerInfo SubprocessScorer::Info() {
  const ScoreRequest probe{"probe", "probe", "probe", {}};
  ScoreBatch(std::span<const ScoreRequest>(&probe, 1));
  std::string id = "exec:";
  for (size_t i = 0; i < argv_.size(); ++i) {
    if (i > 0) id += ' ';
    id += argv_[i];
  }
  return ScorerInfo{id, 0.0};
}

HttpScorer::HttpScorer(std::string base_url, TransportOptions options)
    : base_url_(std::move(base_url)), options_(options) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::vector<ScoreResponse> HttpScorer::RoundTrip(
    std::span<const ScoreRequest> requests) {
  unsigned long long counter = 0;
  const IdMap map = Relabel(requests, counter);
  json body = {{"requests", json::array()}};
  for (const ScoreRequest& request : map.wire) {
    body["requests"].push_back(RequestToJson(request));
  }
  httplib::Client client(base_url_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  const auto result = client.Post("/score", body.dump(), "application/json");
  if (!result) {
    throw TransportError("POST " + base_url_ + "/score: " +
                         httplib::to_string(result.error()));
  }
  if (result->status >= 500) {
    throw TransportError("POST " + base_url_ + "/score: HTTP " +
                         std::to_string(result->status));
  }
  if (result->status != 200) {
    throw ProtocolError("POST /score: HTTP " + std::to_string(result->status),
                        result->body);
  }
  json reply;
  try {
    reply = ParseJson(result->body);
  } catch (const FormatError& e) {
    throw ProtocolError(e.what(), result->body);
  }
  const auto responses = reply.find("responses");
  if (!reply.is_object() || responses == reply.end() || !responses->is_array()) {
    throw ProtocolError("reply has no 'responses' array", result->body);
  }
  std::vector<std::optional<ScoreResponse>> slots(requests.size());
  for (const json& item : *responses) {
    Accept(item, map, requests, slots, result->body);
  }
  return Collect(slots, requests, result->body);
}

std::vector<ScoreResponse> HttpScorer::ScoreBatch(
    std::span<const ScoreRequest> requests) {
  return Chunked(requests, options_.max_batch,
                 [this](std::span<const ScoreRequest> part) {
                   return RoundTrip(part);
                 });
}

ScorerInfo HttpScorer::Info() {
  httplib::Client client(base_url_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  const auto result = client.Get("/meta");
  if (!result) {
    throw TransportError("GET " + base_url_ + "/meta: " +
                         httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw TransportError("GET " + base_url_ + "/meta: HTTP " +
                         std::to_string(result->status));
  }
  try {
    return InfoFromJson(ParseJson(result->body));
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("malformed /meta: ") + e.what(),
                        result->body);
  }
}

std::unique_ptr<Scorer> MakeScorer(const std::string& address,
                                   TransportOptions options) {
  const std::string_view view = address;
  if (view.starts_with("toy:")) {
    const std::string_view path = view.substr(4);
    if (path.empty()) return std::make_unique<ToyScorer>(DefaultToyParams());
    return std::make_unique<ToyScorer>(ReadToyParams(std::string(path)));
  }
  if (view.starts_with("exec:")) {
    return std::make_unique<SubprocessScorer>(SplitCommand(view.substr(5)),
                                              options);
  }
  if (view.starts_with("http://")) {
    return std::make_unique<HttpScorer>(address, options);
  }
  throw ContractViolation("unknown scorer address '" + address +
                          "' (expected toy:, exec:<cmd> or http://host:port)");
}

std::vector<ScoreResponse> ScoreEachSafely(
    Scorer& scorer, std::span<const ScoreRequest> requests) {
  try {
    return scorer.ScoreBatch(requests);
  } catch (const std::exception&) {
    // Fall through and isolate the failing requests.
  }
  std::vector<ScoreResponse> responses;
  responses.reserve(requests.size());
  for (const ScoreRequest& request : requests) {
    try {
      std::vector<ScoreResponse> one =
          scorer.ScoreBatch(std::span<const ScoreRequest>(&request, 1));
      responses.push_back(std::move(one.at(0)));
    } catch (const std::exception& e) {
      responses.push_back(ErrorResponse(request.request_id, e.what()));
    }
  }
  return responses;
}

void ServeStdio(Scorer& scorer, std::istream& in, std::ostream& out) {
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string id;
    json reply;
    try {
      const json item = ParseJson(line);
      if (item.is_object() && item.contains("request_id") &&
          item["request_id"].is_string()) {
        id = item["request_id"];
      }
      const ScoreRequest request = RequestFromJson(item);
      const std::vector<ScoreResponse> responses =
          ScoreEachSafely(scorer, std::span<const ScoreRequest>(&request, 1));
      reply = ResponseToJson(responses.at(0), request.context);
    } catch (const std::exception& e) {
      reply = ErrorJson(id, e.what());
    }
    out << reply.dump() << '\n';
    out.flush();
  }
}

struct HttpScoringServer::Impl {
  Scorer& scorer;
  size_t max_batch;
  httplib::Server server;
  // A stop that arrives before the listen loop starts must still end it.
  std::mutex lifecycle;
  bool stop_requested = false;
  bool run_started = false;

  Impl(Scorer& s, size_t m) : scorer(s), max_batch(m) {}

  void Score(const httplib::Request& http_request, httplib::Response& reply) {
    json body;
    try {
      body = ParseJson(http_request.body);
    } catch (const FormatError& e) {
      reply.status = 400;
      reply.set_content(json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    const auto items = body.find("requests");
    if (!body.is_object() || items == body.end() || !items->is_array()) {
      reply.status = 400;
      reply.set_content(json{{"error", "body needs a 'requests' array"}}.dump(),
                        "application/json");
      return;
    }
    if (items->size() > max_batch) {
      reply.status = 413;
      reply.set_content(
          json{{"error", "batch larger than " + std::to_string(max_batch)}}
              .dump(),
          "application/json");
      return;
    }
    // Requests that do not decode are answered with an error in place.
    std::vector<json> out(items->size());
    std::vector<ScoreRequest> good;
    std::vector<size_t> where;
    for (size_t i = 0; i < items->size(); ++i) {
      const json& item = (*items)[i];
      try {
        good.push_back(RequestFromJson(item));
        where.push_back(i);
      } catch (const FormatError& e) {
        std::string id;
        if (item.is_object() && item.contains("request_id") &&
            item["request_id"].is_string()) {
          id = item["request_id"];
        }
        out[i] = ErrorJson(id, e.what());
      }
    }
    const std::vector<ScoreResponse> responses = ScoreEachSafely(scorer, good);
    for (size_t j = 0; j < good.size(); ++j) {
      out[where[j]] = ResponseToJson(responses[j], good[j].context);
    }
    reply.set_content(json{{"responses", out}}.dump(), "application/json");
  }
};

HttpScoringServer::HttpScoringServer(Scorer& scorer, size_t max_batch)
    : impl_(std::make_unique<Impl>(scorer, max_batch)) {
  Impl* impl = impl_.get();
  impl->server.Post("/score", [impl](const httplib::Request& request,
                                     httplib::Response& reply) {
    impl->Score(request, reply);
  });
  impl->server.Get("/meta", [impl](const httplib::Request&,
                                   httplib::Response& reply) {
    try {
      reply.set_content(InfoToJson(impl->scorer.Info()).dump(),
                        "application/json");
    } catch (const std::exception& e) {
      reply.status = 500;
      reply.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

HttpScoringServer::~HttpScoringServer() { Stop(); }

int HttpScoringServer::Bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpScoringServer::Run() {
  {
    std::lock_guard<std::mutex> lock(impl_->lifecycle);
    if (impl_->stop_requested) return true;
    impl_->run_started = true;
  }
  return impl_->server.listen_after_bind();
}

void HttpScoringServer::Stop() {
  if (!impl_) return;
  bool started = false;
  {
    std::lock_guard<std::mutex> lock(impl_->lifecycle);
    impl_->stop_requested = true;
    started = impl_->run_started;
  }
  if (!started) return;
  impl_->server.wait_until_ready();
  impl_->server.stop();
}

}  // namespace undersense
