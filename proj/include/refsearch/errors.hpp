#pragma once

#include <stdexcept>
#include <string>

namespace refsearch {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text (word-vector files, catalog lines, config files).
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input whose content violates a format contract
// (inconsistent dimensions, bad magic, version mismatch).
struct FormatError : Error {
    using Error::Error;
};

// Corrupt binary artifact detected via checksum.
struct ChecksumError : FormatError {
    using FormatError::FormatError;
};

// A product with no embeddable field, or a query that cannot be embedded.
struct UnembeddableError : Error {
    using Error::Error;
};

// Non-finite loss or activations during training.
struct TrainingError : Error {
    using Error::Error;
};

// Invalid configuration values or config-hash mismatch between stages.
struct ConfigError : Error {
    using Error::Error;
};

// Invalid index operation (duplicate id, empty pool, bad query).
struct IndexError : Error {
    using Error::Error;
};

}  // namespace refsearch
