#ifndef SARCASM_ERRORS_HPP
#define SARCASM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sarcasm {

// Missing or unreadable file.
struct FileError : std::runtime_error {
  explicit FileError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally broken input: bad JSON, wrong schema, malformed table rows.
// Messages name the offending location (file:line or key) where known.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sarcasm

#endif
