#pragma once

#include <stdexcept>
#include <string>

namespace toolfault {

// Base for every error the library raises. `code()` is a stable short name
// ("DuplicateId", "PoolExhausted", ...) that the CLI prints and tests match on.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class BankError : public Error {
 public:
  BankError(std::string code, std::string exemplar_id, const std::string& what)
      : Error(std::move(code), what), exemplar_id_(std::move(exemplar_id)) {}

  const std::string& exemplar_id() const noexcept { return exemplar_id_; }

 private:
  std::string exemplar_id_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("ParseError", what) {}
};

class MalformedTrace : public Error {
 public:
  explicit MalformedTrace(const std::string& what) : Error("MalformedTrace", what) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error("TransportError", what) {}
};

// The agent produced text that does not follow the action grammar. Carries
// the raw text so the simulator can log it verbatim.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string raw, const std::string& what)
      : Error("ProtocolError", what), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

}  // namespace toolfault
