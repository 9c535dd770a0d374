#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace musekit {

/// Error category; mirrors the mk_status codes of the C API one-to-one.
enum class errc {
    ok = 0,
    invalid_argument,
    validation,
    parse,
    schema,
    version,
    unsupported,
    domain,
    io,
    archive,
    integrity,
    transfer,
    config,
    internal,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    errc code() const { return code_; }

private:
    errc code_;
};

/// One broken invariant: which field and what is wrong with it.
struct Violation {
    std::string field;
    std::string message;

    friend bool operator==(const Violation&, const Violation&) = default;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations);

    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

}  // namespace musekit
