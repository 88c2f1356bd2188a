#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace followup {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (dataset records, question text, configuration values).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Misconfiguration: unknown template, missing mock script, bad category table.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A prompt template referenced a placeholder with no binding.
class RenderError : public Error {
 public:
  RenderError(std::string template_name, std::string placeholder)
      : Error("template '" + template_name + "': unbound placeholder {" + placeholder + "}"),
        placeholder_(std::move(placeholder)) {}

  const std::string& placeholder() const { return placeholder_; }

 private:
  std::string placeholder_;
};

/// Anything that went wrong while talking to a model provider.
class BackendError : public Error {
 public:
  using Error::Error;
};

class TransportError : public BackendError {
 public:
  TransportError(const std::string& what, int status, int attempts)
      : BackendError(what), status_(status), attempts_(attempts) {}

  /// Last HTTP status seen, 0 when the connection itself failed.
  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  int status_;
  int attempts_;
};

class AuthError : public BackendError {
 public:
  AuthError(const std::string& what, int status) : BackendError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class EmptyCompletionError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The provider answered, but broke the response contract (shape, dimension, NaN).
class ProviderContractError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// One failed unit of work inside the generation pipeline.
struct AgentIssue {
  std::string agent;
  std::string stage;
  std::string message;

  bool operator==(const AgentIssue&) const = default;
};

class PipelineError : public Error {
 public:
  PipelineError(const std::string& what, std::vector<AgentIssue> issues)
      : Error(what), issues_(std::move(issues)) {}

  const std::vector<AgentIssue>& issues() const { return issues_; }

 private:
  std::vector<AgentIssue> issues_;
};

}  // namespace followup
