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

#include "coplan/protocol.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>
#include <utility>

#include "coplan/errors.hpp"
#include "json.hpp"

namespace coplan {
namespace {

using nlohmann::json;

const std::map<std::string, MessageKind, std::less<>>& KindsByName() {
  static const std::map<std::string, MessageKind, std::less<>> kinds = {
      {"hello", MessageKind::kHello},   {"query", MessageKind::kQuery},
      {"response", MessageKind::kResponse}, {"offer", MessageKind::kOffer},
      {"accept", MessageKind::kAccept}, {"decline", MessageKind::kDecline},
      {"error", MessageKind::kError},   {"bye", MessageKind::kBye},
  };
  return kinds;
}

// Fields every kind must carry, beyond "kind" and "session".
const std::set<std::string>& RequiredFields(MessageKind kind) {
  static const std::map<MessageKind, std::set<std::string>> fields = {
      {MessageKind::kHello, {"dim", "rho"}},
      {MessageKind::kQuery, {"dim", "iteration", "prices", "z"}},
      {MessageKind::kResponse, {"dim", "iteration", "plan"}},
      {MessageKind::kOffer, {"dim", "fee", "plan"}},
      {MessageKind::kAccept, {}},
      {MessageKind::kDecline, {}},
      {MessageKind::kError, {"reason"}},
      {MessageKind::kBye, {}},
  };
  return fields.at(kind);
}

// Byte offset of `"key"` in the raw line, 0 when unknown.
std::size_t KeyOffset(std::string_view line, const std::string& key) {
  const std::size_t at = line.find('"' + key + '"');
  return at == std::string_view::npos ? 0 : at;
}

double FiniteNumber(const json& value, std::string_view line, const std::string& key) {
  if (!value.is_number()) throw ParseError(KeyOffset(line, key), "malformed number in " + key);
  const double v = value.get<double>();
  if (!std::isfinite(v)) throw ParseError(KeyOffset(line, key), "malformed number in " + key);
  return v;
}

Vector NumberArray(const json& value, std::string_view line, const std::string& key) {
  if (!value.is_array()) throw ParseError(KeyOffset(line, key), "malformed number array in " + key);
  Vector out;
  out.reserve(value.size());
  for (const json& item : value) out.push_back(FiniteNumber(item, line, key));
  return out;
}

// Shared by Decode and Encode's self-check.
Message FromJson(const json& doc, std::string_view line) {
  if (!doc.is_object()) throw ParseError(0, "malformed json: not an object");
  const auto kind_it = doc.find("kind");
  if (kind_it == doc.end()) throw ParseError(0, "missing field kind");
  if (!kind_it->is_string()) throw ParseError(KeyOffset(line, "kind"), "unknown kind");
  const auto& kinds = KindsByName();
  const auto named = kinds.find(kind_it->get_ref<const std::string&>());
  if (named == kinds.end()) throw ParseError(KeyOffset(line, "kind"), "unknown kind");

  Message m;
  m.kind = named->second;
  const std::set<std::string>& required = RequiredFields(m.kind);
  for (const auto& [key, value] : doc.items()) {
    if (key != "kind" && key != "session" && !required.contains(key)) {
      throw ParseError(KeyOffset(line, key), "unknown field " + key);
    }
  }
  for (const std::string& key : required) {
    if (!doc.contains(key)) throw ParseError(0, "missing field " + key);
  }
  const auto session = doc.find("session");
  if (session == doc.end()) throw ParseError(0, "missing field session");
  if (!session->is_string()) throw ParseError(KeyOffset(line, "session"), "session must be a string");
  m.session = session->get<std::string>();

  if (required.contains("dim")) {
    const json& dim = doc.at("dim");
    if (!dim.is_number_unsigned() || dim.get<std::uint64_t>() > kMaxLineBytes) {
      throw ParseError(KeyOffset(line, "dim"), "malformed number in dim");
    }
    m.dim = static_cast<std::size_t>(dim.get<std::uint64_t>());
  }
  if (required.contains("iteration")) {
    const json& it = doc.at("iteration");
    if (!it.is_number_integer()) throw ParseError(KeyOffset(line, "iteration"), "malformed number in iteration");
    m.iteration = it.get<std::int64_t>();
  }
  if (required.contains("rho")) {
    m.rho = FiniteNumber(doc.at("rho"), line, "rho");
    if (!(*m.rho > 0.0)) throw ParseError(KeyOffset(line, "rho"), "rho must be positive");
  }
  if (required.contains("fee")) m.fee = FiniteNumber(doc.at("fee"), line, "fee");
  if (required.contains("reason")) {
    const json& reason = doc.at("reason");
    if (!reason.is_string()) throw ParseError(KeyOffset(line, "reason"), "reason must be a string");
    m.reason = reason.get<std::string>();
  }
  for (const char* key : {"prices", "z", "plan"}) {
    if (!required.contains(key)) continue;
    Vector v = NumberArray(doc.at(key), line, key);
    if (v.size() != *m.dim) {
      throw ParseError(KeyOffset(line, key), "dimension-mismatch: " + std::string(key) + " has " +
                                                 std::to_string(v.size()) + " entries, dim is " +
                                                 std::to_string(*m.dim));
    }
    if (std::string_view(key) == "prices") m.prices = std::move(v);
    if (std::string_view(key) == "z") m.z = std::move(v);
    if (std::string_view(key) == "plan") m.plan = std::move(v);
  }
  return m;
}

ssize_t SendAll(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    sent += static_cast<std::size_t>(n);
  }
  return static_cast<ssize_t>(sent);
}

// Pops one line from `buffer` when complete.
std::optional<std::string> PopLine(std::string& buffer) {
  const std::size_t nl = buffer.find('\n');
  if (nl == std::string::npos) {
    if (buffer.size() > kMaxLineBytes) throw ParseError(kMaxLineBytes, "line too long");
    return std::nullopt;
  }
  std::string line = buffer.substr(0, nl);
  buffer.erase(0, nl + 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

enum class ReadStatus { kData, kTimeout, kClosed };

ReadStatus ReadSome(int fd, std::string& buffer, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  int ready;
  do {
    ready = ::poll(&p, 1, timeout_ms);
  } while (ready < 0 && errno == EINTR);
  if (ready == 0) return ReadStatus::kTimeout;
  if (ready < 0) return ReadStatus::kClosed;
  std::array<char, 4096> chunk;
  ssize_t n;
  do {
    n = ::recv(fd, chunk.data(), chunk.size(), 0);
  } while (n < 0 && errno == EINTR);
  if (n <= 0) return ReadStatus::kClosed;
  buffer.append(chunk.data(), static_cast<std::size_t>(n));
  return ReadStatus::kData;
}

int ConnectTo(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(endpoint.port);
  if (::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &found) != 0 || !found) {
    throw ProtocolError("cannot resolve " + endpoint.ToString());
  }
  int fd = -1;
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw ProtocolError("cannot connect to " + endpoint.ToString());
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

}  // namespace

std::string ToString(MessageKind kind) {
  for (const auto& [name, k] : KindsByName()) {
    if (k == kind) return name;
  }
  return "unknown";
}

Message Message::Hello(std::string session, std::size_t dim, double rho) {
  Message m;
  m.kind = MessageKind::kHello;
  m.session = std::move(session);
  m.dim = dim;
  m.rho = rho;
  return m;
}

Message Message::Query(std::string session, std::int64_t iteration, Vector prices, Vector z) {
  Message m;
  m.kind = MessageKind::kQuery;
  m.session = std::move(session);
  m.iteration = iteration;
  m.dim = z.size();
  m.prices = std::move(prices);
  m.z = std::move(z);
  return m;
}

Message Message::Response(std::string session, std::int64_t iteration, Vector plan) {
  Message m;
  m.kind = MessageKind::kResponse;
  m.session = std::move(session);
  m.iteration = iteration;
  m.dim = plan.size();
  m.plan = std::move(plan);
  return m;
}

Message Message::Offer(std::string session, Vector plan, double fee) {
  Message m;
  m.kind = MessageKind::kOffer;
  m.session = std::move(session);
  m.dim = plan.size();
  m.plan = std::move(plan);
  m.fee = fee;
  return m;
}

Message Message::Verdict(std::string session, bool accept) {
  Message m;
  m.kind = accept ? MessageKind::kAccept : MessageKind::kDecline;
  m.session = std::move(session);
  return m;
}

Message Message::Error(std::string session, std::string reason) {
  Message m;
  m.kind = MessageKind::kError;
  m.session = std::move(session);
  m.reason = std::move(reason);
  return m;
}

Message Message::Bye(std::string session) {
  Message m;
  m.kind = MessageKind::kBye;
  m.session = std::move(session);
  return m;
}

std::string Encode(const Message& message) {
  json doc = json::object();
  doc["kind"] = ToString(message.kind);
  doc["session"] = message.session;
  const std::set<std::string>& required = RequiredFields(message.kind);
  const auto finite_or_throw = [](double v) {
    if (!std::isfinite(v)) throw ParameterError("cannot encode a non-finite number");
    return v;
  };
  if (required.contains("dim")) {
    if (!message.dim) throw ParameterError("message needs dim");
    doc["dim"] = *message.dim;
  }
  if (required.contains("iteration")) {
    if (!message.iteration) throw ParameterError("message needs iteration");
    doc["iteration"] = *message.iteration;
  }
  if (required.contains("rho")) {
    if (!message.rho) throw ParameterError("message needs rho");
    doc["rho"] = finite_or_throw(*message.rho);
  }
  if (required.contains("fee")) {
    if (!message.fee) throw ParameterError("message needs fee");
    doc["fee"] = finite_or_throw(*message.fee);
  }
  if (required.contains("reason")) doc["reason"] = message.reason;
  const auto put = [&](const char* key, const Vector& v) {
    if (!required.contains(key)) return;
    for (double x : v) finite_or_throw(x);
    doc[key] = v;
  };
  put("prices", message.prices);
  put("z", message.z);
  put("plan", message.plan);

  // Replacement keeps invalid UTF-8 in free text from throwing.
  std::string line = doc.dump(-1, ' ', false, json::error_handler_t::replace);
  try {
    FromJson(doc, line);
  } catch (const ParseError& e) {
    throw ParameterError("message does not satisfy the grammar: " + e.reason());
  }
  return line;
}

Message Decode(std::string_view line) {
  if (line.size() > kMaxLineBytes) throw ParseError(kMaxLineBytes, "line too long");
  if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
    throw ParseError(0, "malformed json: empty line");
  }
  if (line.find('\n') != std::string_view::npos) {
    throw ParseError(line.find('\n'), "malformed json: embedded newline");
  }
  json doc;
  try {
    doc = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, "malformed json");
  } catch (const json::exception&) {
    throw ParseError(0, "malformed number");
  }
  return FromJson(doc, line);
}

std::string Endpoint::ToString() const { return host + ":" + std::to_string(port); }

Endpoint ParseEndpoint(std::string_view text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == text.size()) {
    throw ParameterError("endpoint must look like host:port, got '" + std::string(text) + "'");
  }
  Endpoint e;
  if (colon > 0) e.host = std::string(text.substr(0, colon));
  unsigned long port = 0;
  for (char c : text.substr(colon + 1)) {
    if (c < '0' || c > '9') throw ParameterError("bad port in '" + std::string(text) + "'");
    port = port * 10 + static_cast<unsigned long>(c - '0');
    if (port > 65535) throw ParameterError("port out of range in '" + std::string(text) + "'");
  }
  e.port = static_cast<std::uint16_t>(port);
  return e;
}

AgentServer::AgentServer(Agent& agent, std::optional<ParticipationRule> participation,
                         const Endpoint& listen)
    : agent_(agent), participation_(std::move(participation)) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(listen.port);
  if (::getaddrinfo(listen.host.c_str(), port.c_str(), &hints, &found) != 0 || !found) {
    throw ProtocolError("cannot resolve listen address " + listen.ToString());
  }
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    listen_fd_ = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (listen_fd_ < 0) continue;
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(listen_fd_, a->ai_addr, a->ai_addrlen) == 0 && ::listen(listen_fd_, 8) == 0) break;
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  ::freeaddrinfo(found);
  if (listen_fd_ < 0) throw ProtocolError("cannot listen on " + listen.ToString());
  sockaddr_storage bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = bound.ss_family == AF_INET6
              ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
              : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
}

AgentServer::~AgentServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void AgentServer::Stop() { stopping_ = true; }

void AgentServer::Serve() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 50);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    const bool bye = HandleConnection(fd);
    ::close(fd);
    if (bye) return;
  }
}

bool AgentServer::HandleConnection(int fd) {
  std::string buffer;
  while (!stopping_) {
    std::optional<std::string> line;
    try {
      line = PopLine(buffer);
    } catch (const ParseError& e) {
      SendAll(fd, Encode(Message::Error(session_, e.what())) + "\n");
      return false;
    }
    if (!line) {
      const ReadStatus status = ReadSome(fd, buffer, 50);
      if (status == ReadStatus::kClosed) return false;
      continue;
    }
    Message in;
    try {
      in = Decode(*line);
    } catch (const ParseError& e) {
      // Malformed input ends the session after an error reply.
      SendAll(fd, Encode(Message::Error(session_, e.what())) + "\n");
      return false;
    }
    if (in.kind == MessageKind::kBye) return true;
    std::optional<Message> out;
    try {
      out = Answer(in);
    } catch (const std::exception& e) {
      SendAll(fd, Encode(Message::Error(in.session, e.what())) + "\n");
      return false;
    }
    if (!out) continue;
    if (SendAll(fd, Encode(*out) + "\n") < 0) return false;
    if (out->kind == MessageKind::kError) return false;
  }
  return false;
}

std::optional<Message> AgentServer::Answer(const Message& in) {
  switch (in.kind) {
    case MessageKind::kHello:
      if (*in.dim != agent_.dimension()) {
        return Message::Error(in.session, "dimension-mismatch: agent plans have " +
                                              std::to_string(agent_.dimension()) + " entries");
      }
      session_ = in.session;
      dim_ = *in.dim;
      rho_ = *in.rho;
      return Message::Hello(session_, dim_, rho_);
    case MessageKind::kQuery: {
      if (session_.empty() || in.session != session_) {
        return Message::Error(in.session, "unknown session");
      }
      if (*in.dim != dim_) return Message::Error(in.session, "dimension-mismatch");
      if (silent_) return std::nullopt;
      const SupplyPlan x = agent_.BestResponse(in.prices, SupplyPlan(in.z), rho_);
      return Message::Response(session_, *in.iteration, x.values());
    }
    case MessageKind::kOffer: {
      if (!participation_) return Message::Error(in.session, "this agent does not take offers");
      if (*in.dim != agent_.dimension()) return Message::Error(in.session, "dimension-mismatch");
      std::optional<double> u;
      try {
        u = participation_->utility(SupplyPlan(in.plan));
      } catch (const Error&) {
        u.reset();  // infeasible for this agent
      }
      const bool accept =
          u && *u - *in.fee >= participation_->standalone_utility - kLpTolerance;
      return Message::Verdict(in.session, accept);
    }
    default:
      return Message::Error(in.session, "unexpected " + ToString(in.kind) + " from coordinator");
  }
}

AgentClient::AgentClient(const Endpoint& endpoint, std::chrono::milliseconds timeout)
    : fd_(ConnectTo(endpoint)), timeout_(timeout) {}

AgentClient::~AgentClient() {
  if (fd_ >= 0) ::close(fd_);
}

void AgentClient::Send(const Message& message) {
  if (SendAll(fd_, Encode(message) + "\n") < 0) {
    throw ProtocolError("agent connection lost while sending " + ToString(message.kind));
  }
}

Message AgentClient::Receive(std::chrono::steady_clock::time_point deadline,
                             std::size_t agent_index) {
  while (true) {
    if (std::optional<std::string> line = PopLine(buffer_)) return Decode(*line);
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw TimeoutError(agent_index);
    const int wait = static_cast<int>(std::min<std::int64_t>(left.count(), 1 << 30));
    switch (ReadSome(fd_, buffer_, wait)) {
      case ReadStatus::kData:
        break;
      case ReadStatus::kTimeout:
        throw TimeoutError(agent_index);
      case ReadStatus::kClosed:
        throw ProtocolError("agent " + std::to_string(agent_index) + " closed the connection");
    }
  }
}

void AgentClient::Hello(const std::string& session, std::size_t dim, double rho) {
  Send(Message::Hello(session, dim, rho));
  const Message reply = Receive(std::chrono::steady_clock::now() + timeout_, 0);
  if (reply.kind == MessageKind::kError) throw ProtocolError("hello refused: " + reply.reason);
  if (reply.kind != MessageKind::kHello || reply.session != session || reply.dim != dim) {
    throw ProtocolError("bad hello acknowledgement");
  }
  session_ = session;
  dim_ = dim;
  rho_ = rho;
}

bool AgentClient::Offer(const SupplyPlan& plan, double fee, std::size_t agent_index) {
  Send(Message::Offer(session_, plan.values(), fee));
  const Message reply = Receive(std::chrono::steady_clock::now() + timeout_, agent_index);
  switch (reply.kind) {
    case MessageKind::kAccept:
      return true;
    case MessageKind::kDecline:
      return false;
    case MessageKind::kError:
      throw ProtocolError("offer rejected: " + reply.reason);
    default:
      throw ProtocolError("unexpected " + ToString(reply.kind) + " in reply to offer");
  }
}

void AgentClient::Bye() {
  if (fd_ < 0) return;
  SendAll(fd_, Encode(Message::Bye(session_)) + "\n");
  ::close(fd_);
  fd_ = -1;
}

RemotePool::RemotePool(const std::vector<Endpoint>& endpoints, std::size_t dimension,
                       std::chrono::milliseconds timeout)
    : dim_(dimension) {
  if (endpoints.empty()) throw ParameterError("remote pool needs at least one endpoint");
  for (const Endpoint& e : endpoints) clients_.push_back(std::make_unique<AgentClient>(e, timeout));
}

RemotePool::~RemotePool() {
  try {
    Close();
  } catch (...) {
  }
}

void RemotePool::Close() {
  if (closed_) return;
  closed_ = true;
  for (auto& c : clients_) c->Bye();
}

std::vector<SupplyPlan> RemotePool::Query(int iteration, std::span<const Vector> prices,
                                          const SupplyPlan& z, double rho) {
  if (prices.size() != clients_.size()) throw DimensionError("one price vector per agent");
  for (std::size_t m = 0; m < clients_.size(); ++m) {
    AgentClient& c = *clients_[m];
    if (c.session().empty() || c.rho() != rho) {
      // rho is fixed per session, so a change opens a new one.
      c.Hello("agent" + std::to_string(m) + "." + std::to_string(++sessions_opened_), dim_, rho);
    }
  }
  std::vector<std::chrono::steady_clock::time_point> deadlines;
  for (std::size_t m = 0; m < clients_.size(); ++m) {
    AgentClient& c = *clients_[m];
    c.Send(Message::Query(c.session(), iteration, prices[m], z.values()));
    deadlines.push_back(std::chrono::steady_clock::now() + c.timeout());
  }
  std::vector<SupplyPlan> plans;
  for (std::size_t m = 0; m < clients_.size(); ++m) {
    const Message reply = clients_[m]->Receive(deadlines[m], m);
    const std::string who = "agent " + std::to_string(m);
    if (reply.kind == MessageKind::kError) throw ProtocolError(who + " reported: " + reply.reason);
    if (reply.kind != MessageKind::kResponse) {
      throw ProtocolError(who + " sent " + ToString(reply.kind) + " instead of a response");
    }
    if (reply.session != clients_[m]->session()) throw ProtocolError(who + " answered for another session");
    if (reply.iteration != iteration) {
      throw ProtocolError(who + " echoed iteration " + std::to_string(*reply.iteration) +
                          ", expected " + std::to_string(iteration));
    }
    if (*reply.dim != dim_) throw ProtocolError(who + ": dimension-mismatch");
    try {
      plans.emplace_back(reply.plan);
    } catch (const Error& e) {
      throw ProtocolError(who + " sent an invalid plan: " + e.what());
    }
  }
  return plans;
}

}  // namespace coplan
