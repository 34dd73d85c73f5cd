#pragma once

#include <stdexcept>

namespace lre {

/// Base class for every error raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File does not start with the expected magic bytes.
struct FormatError : Error { using Error::Error; };

/// File is truncated or its payload disagrees with the declared counts.
struct CorruptionError : Error { using Error::Error; };

/// Input violates a documented invariant (duplicate id, non-finite value, ...).
struct ValidationError : Error { using Error::Error; };

/// Text input failed to parse; the message carries the line number.
struct ParseError : Error { using Error::Error; };

/// Filesystem-level failure.
struct IoError : Error { using Error::Error; };

/// Bad command-line usage.
struct UsageError : Error { using Error::Error; };

} // namespace lre
