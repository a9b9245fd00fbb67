#pragma once
// Exception hierarchy shared by every vidmem module.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vidmem {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller broke a precondition (dimension mismatch, bad arguments).
struct ContractError : Error {
  using Error::Error;
};

// Mathematically undefined input (zero vector, empty token list, empty set).
struct DomainError : Error {
  using Error::Error;
};

struct RangeError : Error {
  using Error::Error;
};

// caption_retrieval asked for more captions than the window cap allows.
struct WindowCapError : Error {
  WindowCapError(std::size_t requested, std::size_t cap)
      : Error("caption window too long: " + std::to_string(requested) +
              " captions requested, at most " + std::to_string(cap) + " allowed"),
        requested(requested),
        cap(cap) {}
  std::size_t requested;
  std::size_t cap;
};

struct CorruptFileError : Error {
  using Error::Error;
};

struct VersionMismatchError : Error {
  using Error::Error;
};

struct BackendError : Error {
  using Error::Error;
};

// Scripted chat received a prompt its next entry does not accept.
struct ScriptDivergenceError : Error {
  ScriptDivergenceError(const std::string& what, std::string prompt)
      : Error(what), prompt(std::move(prompt)) {}
  std::string prompt;
};

// Malformed LLM output in the Thought/Action protocol.
struct FormatError : Error {
  using Error::Error;
};

struct StepLimitError : Error {
  using Error::Error;
};

struct SqlError : Error {
  SqlError(const std::string& msg, std::size_t position)
      : Error(msg + " (at position " + std::to_string(position) + ")"), position(position) {}
  std::size_t position;
};

}  // namespace vidmem
