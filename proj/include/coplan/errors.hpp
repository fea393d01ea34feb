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

#ifndef COPLAN_ERRORS_HPP_
#define COPLAN_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coplan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A requirement cannot be met by the available bounds.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

// Decoding failure. `offset` is the byte position in the offending line.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string reason)
      : Error("parse error at offset " + std::to_string(offset) + ": " +
              reason),
        offset_(offset),
        reason_(std::move(reason)) {}

  std::size_t offset() const { return offset_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t offset_;
  std::string reason_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public Error {
 public:
  explicit TimeoutError(std::size_t agent)
      : Error("agent " + std::to_string(agent) + " timed out"),
        agent_(agent) {}
  std::size_t agent() const { return agent_; }

 private:
  std::size_t agent_;
};

// Scenario validation failure; `path` names the offending field
// (e.g. "retailer.arc_costs[1]").
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace coplan

#endif  // COPLAN_ERRORS_HPP_
