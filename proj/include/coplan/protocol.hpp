// Copyright 2026 The Coplan Authors
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

// Line protocol between a consensus coordinator and black-box agents.
//
// Each message is one JSON object per line, keys in sorted order, numbers in
// shortest round-trip form so a remote run replays the in-process one
// exactly. Only plans, prices, fees and verdicts cross the wire; agent specs
// never do. See README.md for the grammar.

#ifndef COPLAN_PROTOCOL_HPP_
#define COPLAN_PROTOCOL_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coplan/consensus.hpp"
#include "coplan/plan.hpp"

namespace coplan {

enum class MessageKind { kHello, kQuery, kResponse, kOffer, kAccept, kDecline, kError, kBye };

std::string ToString(MessageKind kind);

struct Message {
  MessageKind kind = MessageKind::kHello;
  std::string session;
  std::optional<std::int64_t> iteration;  // query, response
  std::optional<std::size_t> dim;         // hello and every vector payload
  std::optional<double> rho;              // hello
  Vector prices;                          // query
  Vector z;                               // query
  Vector plan;                            // response, offer
  std::optional<double> fee;              // offer
  std::string reason;                     // error

  bool operator==(const Message&) const = default;

  static Message Hello(std::string session, std::size_t dim, double rho);
  static Message Query(std::string session, std::int64_t iteration, Vector prices, Vector z);
  static Message Response(std::string session, std::int64_t iteration, Vector plan);
  static Message Offer(std::string session, Vector plan, double fee);
  static Message Verdict(std::string session, bool accept);
  static Message Error(std::string session, std::string reason);
  static Message Bye(std::string session);
};

// Lines longer than this are rejected by Decode and by the socket reader.
inline constexpr std::size_t kMaxLineBytes = 1 << 20;

// One line, no trailing newline. Throws ParameterError on a message that
// would not decode (missing fields, non-finite numbers, bad dimensions).
std::string Encode(const Message& message);

// Throws ParseError with a byte offset and a reason: "malformed json",
// "unknown kind", "missing field", "unknown field", "malformed number",
// "dimension-mismatch", "line too long".
Message Decode(std::string_view line);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string ToString() const;
};
// "host:port"; throws ParameterError.
Endpoint ParseEndpoint(std::string_view text);

// Accept/decline rule for offers: accept iff utility(plan) - fee >= standalone.
struct ParticipationRule {
  std::function<std::optional<double>(const SupplyPlan&)> utility;
  double standalone_utility = 0.0;
};

// Serves one agent over TCP. Connections are handled one at a time; the
// agent (and its cut bundle) persists across sessions. Serving ends on bye
// or Stop().
class AgentServer {
 public:
  AgentServer(Agent& agent, std::optional<ParticipationRule> participation,
              const Endpoint& listen);
  ~AgentServer();
  AgentServer(const AgentServer&) = delete;
  AgentServer& operator=(const AgentServer&) = delete;

  // Bound port (useful with port 0).
  std::uint16_t port() const { return port_; }
  // Blocks until a bye arrives or Stop() is called.
  void Serve();
  void Stop();
  // Stop answering queries (for timeout tests); messages are still read.
  void set_silent(bool silent) { silent_ = silent; }

 private:
  bool HandleConnection(int fd);
  std::optional<Message> Answer(const Message& in);

  Agent& agent_;
  std::optional<ParticipationRule> participation_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> silent_{false};
  std::string session_;
  std::size_t dim_ = 0;
  double rho_ = 0.0;
};

// Coordinator-side connection to one agent.
class AgentClient {
 public:
  AgentClient(const Endpoint& endpoint, std::chrono::milliseconds timeout);
  ~AgentClient();
  AgentClient(const AgentClient&) = delete;
  AgentClient& operator=(const AgentClient&) = delete;

  // Opens a session; a new hello replaces the previous one.
  void Hello(const std::string& session, std::size_t dim, double rho);
  void Send(const Message& message);
  // Throws TimeoutError(agent_index) once the deadline passes.
  Message Receive(std::chrono::steady_clock::time_point deadline, std::size_t agent_index);
  // Offer round trip; true on accept.
  bool Offer(const SupplyPlan& plan, double fee, std::size_t agent_index = 0);
  void Bye();

  const std::string& session() const { return session_; }
  double rho() const { return rho_; }
  std::chrono::milliseconds timeout() const { return timeout_; }

 private:
  int fd_ = -1;
  std::string buffer_;
  std::chrono::milliseconds timeout_;
  std::string session_;
  std::size_t dim_ = 0;
  double rho_ = 0.0;
};

inline constexpr std::chrono::milliseconds kDefaultAgentTimeout{30000};

// ResponderPool over remote agents: one query per agent per iteration, all
// sent before any response is awaited. A changed rho opens new sessions.
class RemotePool : public ResponderPool {
 public:
  RemotePool(const std::vector<Endpoint>& endpoints, std::size_t dimension,
             std::chrono::milliseconds timeout = kDefaultAgentTimeout);
  ~RemotePool() override;

  std::size_t size() const override { return clients_.size(); }
  std::size_t dimension() const override { return dim_; }
  std::vector<SupplyPlan> Query(int iteration, std::span<const Vector> prices,
                                const SupplyPlan& z, double rho) override;
  AgentClient& client(std::size_t index) { return *clients_.at(index); }
  // Sends bye to every agent.
  void Close();

 private:
  std::vector<std::unique_ptr<AgentClient>> clients_;
  std::size_t dim_;
  int sessions_opened_ = 0;
  bool closed_ = false;
};

}  // namespace coplan

#endif  // COPLAN_PROTOCOL_HPP_
