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

// Scorer transports and servers.
//
// Addresses:
//   toy:               in-process toy scorer with the bundled parameters
//   toy:<params.json>  in-process toy scorer with the given parameters
//   exec:<cmd> [args]  child process speaking JSON lines on stdin/stdout
//   http://host:port   HTTP server with POST /score and GET /meta

#ifndef UNDERSENSE_TRANSPORTS_H_
#define UNDERSENSE_TRANSPORTS_H_

#include <chrono>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "undersense/scoring.h"
#include "undersense/toy_model.h"

namespace undersense {

// Parameters used by the `toy:` address.
ToyModelParams DefaultToyParams();

struct TransportOptions {
  // Largest number of requests sent in one round trip.
  size_t max_batch = 64;
  std::chrono::milliseconds timeout{60000};
};

// Spawns `argv` and exchanges one JSON object per line with it. Responses
// are matched to requests by id and may arrive in any order. Batches from
// concurrent callers are serialized.
class SubprocessScorer : public Scorer {
 public:
  SubprocessScorer(std::vector<std::string> argv, TransportOptions options = {});
  ~SubprocessScorer() override;

  SubprocessScorer(const SubprocessScorer&) = delete;
  SubprocessScorer& operator=(const SubprocessScorer&) = delete;

  std::vector<ScoreResponse> ScoreBatch(
      std::span<const ScoreRequest> requests) override;
  // Sends a probe request; the model id is derived from the command line.
  ScorerInfo Info() override;

 private:
  std::vector<ScoreResponse> RoundTrip(std::span<const ScoreRequest> requests);
  void WriteAll(const std::string& data);
  std::string ReadLine();
  void Shutdown();

  std::vector<std::string> argv_;
  TransportOptions options_;
  std::mutex mutex_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  unsigned long long next_id_ = 0;
};

class HttpScorer : public Scorer {
 public:
  // `base_url` is scheme://host[:port].
  explicit HttpScorer(std::string base_url, TransportOptions options = {});

  std::vector<ScoreResponse> ScoreBatch(
      std::span<const ScoreRequest> requests) override;
  ScorerInfo Info() override;

 private:
  std::vector<ScoreResponse> RoundTrip(std::span<const ScoreRequest> requests);

  std::string base_url_;
  TransportOptions options_;
};

// Throws ContractViolation for an unknown scheme and TransportError when
// the child process cannot be started.
std::unique_ptr<Scorer> MakeScorer(const std::string& address,
                                   TransportOptions options = {});

// Scores each request on its own, turning exceptions into error markers.
std::vector<ScoreResponse> ScoreEachSafely(Scorer& scorer,
                                           std::span<const ScoreRequest> requests);

// Serves JSON-lines requests from `in` until EOF. Lines that cannot be
// parsed get an error response (with the request id when one is readable).
void ServeStdio(Scorer& scorer, std::istream& in, std::ostream& out);

// Serves POST /score and GET /meta for one scorer. Batches larger than
// `max_batch` are refused with status 413.
class HttpScoringServer {
 public:
  HttpScoringServer(Scorer& scorer, size_t max_batch = 256);
  ~HttpScoringServer();

  // Binds host:port (port 0 picks a free one). Returns the bound port, or
  // -1 on failure.
  int Bind(const std::string& host, int port);
  // Blocks until Stop() is called from another thread.
  bool Run();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace undersense

#endif  // UNDERSENSE_TRANSPORTS_H_
