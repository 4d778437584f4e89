#pragma once

#include <stdexcept>
#include <string>

namespace mwtrack {

enum class ErrorKind {
  invalid_input,
  empty_basis,
  near_singular_expansion,
  degenerate_removal,
  rank_one_singularity,
  stale_cache,
  empty_buffer,
  invalid_state,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::empty_basis: return "empty basis";
    case ErrorKind::near_singular_expansion: return "near-singular expansion";
    case ErrorKind::degenerate_removal: return "degenerate removal";
    case ErrorKind::rank_one_singularity: return "rank-one singularity";
    case ErrorKind::stale_cache: return "stale cache";
    case ErrorKind::empty_buffer: return "empty buffer";
    case ErrorKind::invalid_state: return "invalid state";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

// Single exception type for the library; callers branch on kind() when they
// have a recovery path (e.g. rebuilding a basis after a near-singular edit).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace mwtrack
