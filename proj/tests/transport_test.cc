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

#include <gtest/gtest.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <sstream>
#include <thread>

#include "httplib.h"
#include "testing.h"
#include "undersense/conformance.h"
#include "undersense/errors.h"
#include "undersense/toy_model.h"

namespace undersense {
namespace {

std::vector<ScoreRequest> SomeRequests() {
  return {
      {"a", "Otto visited Bonn in 1450 .", "Who visited Bonn?", {{0, 4}, {13, 17}}},
      {"b", "Zoë lives in Kraków .", "Where does Zoë live?", {{13, 20}}},
      {"c", "Hugo praised Rome .", "Who praised Rome?", {}},
  };
}

TEST(Stdio, ServesLinesInProcess) {
  ToyScorer scorer(DefaultToyParams());
  std::stringstream in, out;
  for (const ScoreRequest& request : SomeRequests()) in << RequestToJson(request).dump() << "\n";
  in << "{broken\n";
  in << R"({"request_id": "d", "context": "x"})" << "\n";
  ServeStdio(scorer, in, out);
  const std::vector<ScoreResponse> expected = scorer.ScoreBatch(SomeRequests());
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(out, line);) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), 5u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ResponseFromJson(lines[i], SomeRequests()[i].context), expected[i]);
  }
  EXPECT_TRUE(lines[3].contains("error"));
  EXPECT_EQ(lines[4]["request_id"], "d");
  EXPECT_TRUE(lines[4].contains("error"));
}

TEST(Exec, ChildServerMatchesTheToyScorer) {
  SubprocessScorer child({testing::CliPath(), "serve", "--stdio"});
  ToyScorer local(DefaultToyParams());
  EXPECT_EQ(child.ScoreBatch(SomeRequests()), local.ScoreBatch(SomeRequests()));
  EXPECT_EQ(child.Info().model_id.rfind("exec:", 0), 0u);
  EXPECT_TRUE(RunConformance(child).passed());
}

TEST(Exec, AddressIsParsed) {
  auto scorer = MakeScorer("exec:" + testing::CliPath() + " serve --stdio");
  ToyScorer local(DefaultToyParams());
  EXPECT_EQ(scorer->ScoreBatch(SomeRequests()), local.ScoreBatch(SomeRequests()));
}

TEST(Exec, MissingProgramIsATransportError) {
  EXPECT_THROW(
      {
        SubprocessScorer child({"/nonexistent/scorer"});
        child.Info();
      },
      TransportError);
}

TEST(Exec, ChildThatDiesIsATransportError) {
  TransportOptions options;
  options.timeout = std::chrono::milliseconds(5000);
  SubprocessScorer child({"/bin/sh", "-c", "read line; exit 0"}, options);
  EXPECT_THROW(child.ScoreBatch(SomeRequests()), TransportError);
}

TEST(Addresses, UnknownSchemeIsRejected) {
  EXPECT_THROW(MakeScorer("ftp://host"), ContractViolation);
  EXPECT_EQ(MakeScorer("toy:")->Info().model_id, DefaultToyParams().ModelId());
}

// Runs an HTTP server for the toy scorer on a free port.
class LocalServer {
 public:
  explicit LocalServer(size_t max_batch) : scorer_(DefaultToyParams()), server_(scorer_, max_batch) {
    port_ = server_.Bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.Run(); });
  }
  ~LocalServer() {
    server_.Stop();
    thread_.join();
  }
  int port() const { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  ToyScorer scorer_;
  HttpScoringServer server_;
  int port_ = -1;
  std::thread thread_;
};

TEST(Http, ScoresInBatchesAndReportsMeta) {
  LocalServer server(2);
  ASSERT_GT(server.port(), 0);
  TransportOptions options;
  options.max_batch = 2;
  HttpScorer client(server.url(), options);
  ToyScorer local(DefaultToyParams());
  EXPECT_EQ(client.ScoreBatch(SomeRequests()), local.ScoreBatch(SomeRequests()));
  const ScorerInfo info = client.Info();
  EXPECT_EQ(info.model_id, DefaultToyParams().ModelId());
  EXPECT_EQ(info.noanswer_threshold, 0.0);
  EXPECT_TRUE(RunConformance(client).passed());
}

TEST(Http, RefusesBadBodiesAndOversizedBatches) {
  LocalServer server(2);
  httplib::Client raw("127.0.0.1", server.port());
  auto reply = raw.Post("/score", "not json", "application/json");
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->status, 400);
  reply = raw.Post("/score", R"({"items": []})", "application/json");
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->status, 400);
  nlohmann::json body = {{"requests", nlohmann::json::array()}};
  for (const ScoreRequest& request : SomeRequests()) body["requests"].push_back(RequestToJson(request));
  reply = raw.Post("/score", body.dump(), "application/json");
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->status, 413);
  reply = raw.Get("/meta");
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->status, 200);
  EXPECT_EQ(nlohmann::json::parse(reply->body)["model_id"], DefaultToyParams().ModelId());
}

TEST(Http, UnreachableServerIsATransportError) {
  int port = 0;
  {
    LocalServer server(8);
    port = server.port();
  }
  TransportOptions options;
  options.timeout = std::chrono::milliseconds(500);
  HttpScorer client("http://127.0.0.1:" + std::to_string(port), options);
  EXPECT_THROW(client.Info(), TransportError);
  EXPECT_THROW(client.ScoreBatch(SomeRequests()), TransportError);
}

TEST(Http, CommandLineServerStopsOnSigterm) {
  int pipe_fds[2];
  ASSERT_EQ(pipe(pipe_fds), 0);
  const pid_t pid = fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    dup2(pipe_fds[1], STDOUT_FILENO);
    close(pipe_fds[0]);
    close(pipe_fds[1]);
    const std::string cli = testing::CliPath();
    execl(cli.c_str(), cli.c_str(), "serve", "--host", "127.0.0.1", "--port", "0",
          static_cast<char*>(nullptr));
    _exit(127);
  }
  close(pipe_fds[1]);
  std::string line;
  char c;
  while (read(pipe_fds[0], &c, 1) == 1 && c != '\n') line.push_back(c);
  close(pipe_fds[0]);
  const std::string prefix = "listening on ";
  ASSERT_EQ(line.rfind(prefix, 0), 0u) << line;
  HttpScorer client(line.substr(prefix.size()));
  const ConformanceReport report = RunConformance(client);
  EXPECT_TRUE(report.passed()) << report.ToJson().dump();
  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

// Answers with probabilities that do not add up and ignores request ids.
class BrokenScorer : public Scorer {
 public:
  std::vector<ScoreResponse> ScoreBatch(std::span<const ScoreRequest> requests) override {
    std::vector<ScoreResponse> responses;
    for (const ScoreRequest& request : requests) {
      ScoreResponse response;
      response.request_id = "wrong";
      response.best_prob = 0.9;
      response.noanswer_prob = 0.9;
      response.span_probs.assign(request.spans_to_score.size(), 0.9);
      responses.push_back(response);
    }
    return responses;
  }
  ScorerInfo Info() override { return {"broken", 0.0}; }
};

TEST(Conformance, BrokenScorerFails) {
  BrokenScorer broken;
  const ConformanceReport report = RunConformance(broken);
  EXPECT_FALSE(report.passed());
  size_t failed = 0;
  for (const ConformanceCheck& check : report.checks) failed += !check.passed;
  EXPECT_GT(failed, 1u);
  EXPECT_FALSE(report.ToJson().dump().empty());
}

TEST(Conformance, ToyScorerPasses) {
  ToyScorer scorer(DefaultToyParams());
  const ConformanceReport report = RunConformance(scorer);
  EXPECT_TRUE(report.passed()) << report.ToJson().dump();
  EXPECT_GE(report.checks.size(), 5u);
}

TEST(ScoreEachSafely, TurnsFailuresIntoMarkers) {
  SubprocessScorer dead({"/bin/sh", "-c", "exit 0"});
  const std::vector<ScoreResponse> responses = ScoreEachSafely(dead, SomeRequests());
  ASSERT_EQ(responses.size(), 3u);
  for (size_t i = 0; i < responses.size(); ++i) {
    EXPECT_TRUE(responses[i].error);
    EXPECT_EQ(responses[i].request_id, SomeRequests()[i].request_id);
  }
}

}  // namespace
}  // namespace undersense
