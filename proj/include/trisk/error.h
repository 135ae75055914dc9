#pragma once

#include <stdexcept>
#include <string>

namespace trisk {

enum class ErrorCode {
  domain,        // argument outside the mathematical domain
  config,        // invalid configuration value
  ingestion,     // malformed or incomplete input data
  schema,        // file layout mismatch
  convergence,   // iterative solver did not converge
  singular,      // singular / non positive definite working matrix
  saturated,     // leverage at one, dispersion not estimable
  degenerate,    // data carries no information (e.g. zero deviance)
  accuracy,      // series or quadrature could not reach the tolerance
  io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::domain: return "domain";
    case ErrorCode::config: return "config";
    case ErrorCode::ingestion: return "ingestion";
    case ErrorCode::schema: return "schema";
    case ErrorCode::convergence: return "convergence";
    case ErrorCode::singular: return "singular";
    case ErrorCode::saturated: return "saturated";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::accuracy: return "accuracy";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace trisk
