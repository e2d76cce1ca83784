#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spade {

enum class ViolationCode {
    missing_field,
    bad_kind,
    malformed_document,
    empty_output,
    constraint_violation,
};

inline std::string_view to_string(ViolationCode code) {
    switch (code) {
    case ViolationCode::missing_field: return "missing_field";
    case ViolationCode::bad_kind: return "bad_kind";
    case ViolationCode::malformed_document: return "malformed_document";
    case ViolationCode::empty_output: return "empty_output";
    case ViolationCode::constraint_violation: return "constraint_violation";
    }
    return "constraint_violation";
}

struct Violation {
    ViolationCode code = ViolationCode::constraint_violation;
    std::string path;
    std::string message;

    bool operator==(const Violation&) const = default;
};

/// Outcome of checking a value. Empty means valid.
struct ValidationFeedback {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool empty() const { return violations.empty(); }

    void add(ViolationCode code, std::string path, std::string message) {
        violations.push_back({code, std::move(path), std::move(message)});
    }

    void append(const ValidationFeedback& other) {
        violations.insert(violations.end(), other.violations.begin(), other.violations.end());
    }

    bool has_path(std::string_view path) const {
        for (const auto& v : violations)
            if (v.path == path) return true;
        return false;
    }

    bool operator==(const ValidationFeedback&) const = default;
};

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when a value fails validation; carries every violation found.
class ValidationError : public Error {
  public:
    explicit ValidationError(ValidationFeedback feedback)
        : Error(summarize(feedback)), feedback_(std::move(feedback)) {}
    ValidationError(std::string what, ValidationFeedback feedback)
        : Error(std::move(what)), feedback_(std::move(feedback)) {}

    const ValidationFeedback& feedback() const noexcept { return feedback_; }

  private:
    static std::string summarize(const ValidationFeedback& fb) {
        std::string out = "validation failed";
        for (const auto& v : fb.violations) {
            out += "; ";
            out += v.path;
            out += ": ";
            out += v.message;
        }
        return out;
    }

    ValidationFeedback feedback_;
};

class NotFoundError : public Error {
  public:
    using Error::Error;
};

class ConflictError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

} // namespace spade
