#pragma once

#include <stdexcept>
#include <string>

namespace futurerec {

/// Base class for all errors raised by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid or out-of-grid configuration (CLI exit code 1).
struct config_error : error {
    using error::error;
};

/// Unusable input data: unreadable files, malformed lines, corpora that
/// become empty after filtering (CLI exit code 2).
struct data_error : error {
    using error::error;
};

struct io_error : data_error {
    using data_error::data_error;
};

struct parse_error : data_error {
    using data_error::data_error;
};

/// A caller violated a documented precondition (bad shape, pad target, ...).
struct contract_error : error {
    using error::error;
};

struct shape_error : contract_error {
    using contract_error::contract_error;
};

struct index_error : contract_error {
    using contract_error::contract_error;
};

/// Non-finite values or other numeric failures (CLI exit code 3).
struct numeric_error : error {
    using error::error;
};

}  // namespace futurerec
