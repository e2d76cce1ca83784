#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spade/error.hpp"

namespace spade {

using json = nlohmann::json;

namespace detail {

inline std::string join_path(const std::string& base, std::string_view key) {
    if (base.empty()) return std::string(key);
    return base + "." + std::string(key);
}

inline std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

} // namespace detail

/// Strict field-by-field reader over a JSON object. Records every problem
/// into a shared feedback instead of stopping at the first one; `finish`
/// reports keys that were never consumed.
class FieldReader {
  public:
    FieldReader(const json& object, std::string path, ValidationFeedback& feedback)
        : object_(object), path_(std::move(path)), feedback_(feedback) {
        if (!object_.is_object()) {
            feedback_.add(ViolationCode::malformed_document, path_.empty() ? "$" : path_,
                          "expected a JSON object");
            valid_ = false;
        }
    }

    bool valid() const { return valid_; }
    const std::string& path() const { return path_; }
    std::string path_of(std::string_view key) const { return detail::join_path(path_, key); }
    ValidationFeedback& feedback() { return feedback_; }

    bool has(std::string_view key) const {
        return valid_ && object_.contains(std::string(key)) && !object_.at(std::string(key)).is_null();
    }

    /// Returns the raw node and marks it consumed, or nullptr.
    const json* node(std::string_view key) {
        if (!valid_) return nullptr;
        std::string k(key);
        seen_.insert(k);
        auto it = object_.find(k);
        if (it == object_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    std::string string(std::string_view key, bool required = true, bool allow_empty = false) {
        const json* n = node(key);
        if (!n) {
            if (required && valid_) missing(key);
            return {};
        }
        if (!n->is_string()) {
            type_error(key, "string");
            return {};
        }
        auto value = n->get<std::string>();
        if (required && !allow_empty && value.empty()) missing(key);
        return value;
    }

    std::optional<std::string> optional_string(std::string_view key) {
        const json* n = node(key);
        if (!n) return std::nullopt;
        if (!n->is_string()) {
            type_error(key, "string");
            return std::nullopt;
        }
        return n->get<std::string>();
    }

    std::int64_t integer(std::string_view key, bool required = true, std::int64_t fallback = 0) {
        const json* n = node(key);
        if (!n) {
            if (required && valid_) missing(key);
            return fallback;
        }
        if (!n->is_number_integer()) {
            type_error(key, "integer");
            return fallback;
        }
        return n->get<std::int64_t>();
    }

    double number(std::string_view key, bool required = true, double fallback = 0.0) {
        const json* n = node(key);
        if (!n) {
            if (required && valid_) missing(key);
            return fallback;
        }
        if (!n->is_number()) {
            type_error(key, "number");
            return fallback;
        }
        return n->get<double>();
    }

    bool boolean(std::string_view key, bool required = true, bool fallback = false) {
        const json* n = node(key);
        if (!n) {
            if (required && valid_) missing(key);
            return fallback;
        }
        if (!n->is_boolean()) {
            type_error(key, "boolean");
            return fallback;
        }
        return n->get<bool>();
    }

    std::vector<std::string> strings(std::string_view key, bool required = true) {
        std::vector<std::string> out;
        const json* n = node(key);
        if (!n) {
            if (required && valid_) missing(key);
            return out;
        }
        if (!n->is_array()) {
            type_error(key, "array of strings");
            return out;
        }
        for (std::size_t i = 0; i < n->size(); ++i) {
            const auto& item = (*n)[i];
            if (!item.is_string()) {
                feedback_.add(ViolationCode::constraint_violation,
                              detail::index_path(path_of(key), i), "expected a string");
                continue;
            }
            out.push_back(item.get<std::string>());
        }
        return out;
    }

    /// Decodes an array with `decode(item, item_path, feedback)`.
    template <typename T, typename Decode>
    std::vector<T> array(std::string_view key, Decode&& decode, bool required = true) {
        std::vector<T> out;
        const json* n = node(key);
        if (!n) {
            if (required && valid_) missing(key);
            return out;
        }
        if (!n->is_array()) {
            type_error(key, "array");
            return out;
        }
        for (std::size_t i = 0; i < n->size(); ++i)
            out.push_back(decode((*n)[i], detail::index_path(path_of(key), i), feedback_));
        return out;
    }

    void missing(std::string_view key) {
        feedback_.add(ViolationCode::missing_field, path_of(key),
                      "required field '" + std::string(key) + "' is missing or empty");
    }

    void finish() {
        if (!valid_) return;
        for (const auto& [key, value] : object_.items()) {
            if (!seen_.count(key))
                feedback_.add(ViolationCode::constraint_violation, path_of(key),
                              "unknown field '" + key + "'");
        }
    }

  private:
    void type_error(std::string_view key, const char* expected) {
        feedback_.add(ViolationCode::constraint_violation, path_of(key),
                      std::string("expected ") + expected);
    }

    const json& object_;
    std::string path_;
    ValidationFeedback& feedback_;
    std::set<std::string> seen_;
    bool valid_ = true;
};

/// Runs a path-aware decoder at the document root and throws on any violation.
template <typename Decode>
auto decode_strict(const json& j, Decode&& decode) {
    ValidationFeedback fb;
    auto value = decode(j, std::string{}, fb);
    if (!fb.ok()) throw ValidationError(std::move(fb));
    return value;
}

inline json to_json(const Violation& v) {
    return {{"code", std::string(to_string(v.code))}, {"path", v.path}, {"message", v.message}};
}

inline json to_json(const ValidationFeedback& fb) {
    json arr = json::array();
    for (const auto& v : fb.violations) arr.push_back(to_json(v));
    return {{"violations", arr}};
}

inline Violation decode_violation(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    Violation v;
    auto code = r.string("code");
    static const std::pair<std::string_view, ViolationCode> codes[] = {
        {"missing_field", ViolationCode::missing_field},
        {"bad_kind", ViolationCode::bad_kind},
        {"malformed_document", ViolationCode::malformed_document},
        {"empty_output", ViolationCode::empty_output},
        {"constraint_violation", ViolationCode::constraint_violation},
    };
    bool known = code.empty();
    for (const auto& [name, c] : codes)
        if (name == code) {
            v.code = c;
            known = true;
        }
    if (!known) fb.add(ViolationCode::bad_kind, r.path_of("code"), "unknown violation code '" + code + "'");
    v.path = r.string("path", true, true);
    v.message = r.string("message", true, true);
    r.finish();
    return v;
}

inline ValidationFeedback decode_feedback(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    ValidationFeedback out;
    out.violations = r.array<Violation>("violations", decode_violation);
    r.finish();
    return out;
}

} // namespace spade
