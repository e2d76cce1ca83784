#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spade/domain.hpp"
#include "spade/error.hpp"

namespace spade {

// ---------------------------------------------------------------------------
// Structured block extraction
// ---------------------------------------------------------------------------

namespace detail {

/// Index one past the brace matching text[open], or npos. String-literal aware.
inline std::size_t match_brace(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '{')
            ++depth;
        else if (c == '}' && --depth == 0)
            return i + 1;
    }
    return std::string_view::npos;
}

inline void scan_bare_objects(std::string_view text, std::vector<std::string>& out) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            ++i;
            continue;
        }
        auto end = match_brace(text, i);
        if (end == std::string_view::npos) {
            ++i;
            continue;
        }
        auto candidate = text.substr(i, end - i);
        auto parsed = json::parse(candidate, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) {
            out.emplace_back(candidate);
            i = end;
        } else {
            ++i;
        }
    }
}

inline void scan_fenced(std::string_view body, std::vector<std::string>& out) {
    auto trimmed = trim(body);
    auto parsed = json::parse(trimmed, nullptr, false);
    if (!parsed.is_discarded()) {
        if (parsed.is_object()) {
            out.push_back(trimmed);
            return;
        }
        if (parsed.is_array()) {
            for (const auto& item : parsed)
                if (item.is_object()) out.push_back(item.dump());
            return;
        }
    }
    scan_bare_objects(body, out);
}

} // namespace detail

/// Every JSON object found in fenced code blocks or bare in the prose, in
/// order of appearance. A fenced top-level array contributes its objects.
inline std::vector<std::string> extract_structured_blocks(std::string_view raw) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        auto fence = raw.find("```", pos);
        if (fence == std::string_view::npos) {
            detail::scan_bare_objects(raw.substr(pos), out);
            break;
        }
        detail::scan_bare_objects(raw.substr(pos, fence - pos), out);
        auto body_start = raw.find('\n', fence + 3);
        if (body_start == std::string_view::npos) break;
        ++body_start;
        auto close = raw.find("```", body_start);
        if (close == std::string_view::npos) {
            detail::scan_fenced(raw.substr(body_start), out);
            break;
        }
        detail::scan_fenced(raw.substr(body_start, close - body_start), out);
        pos = close + 3;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Description text
// ---------------------------------------------------------------------------

inline std::string_view action_phrase(PloyAction a) {
    switch (a) {
    case PloyAction::place_decoy: return "place a decoy";
    case PloyAction::intercept_api: return "intercept calls";
    case PloyAction::redirect_to_honeypot: return "redirect to a honeypot";
    case PloyAction::supply_fake_data: return "supply fake data";
    }
    return "place a decoy";
}

/// One normalized lowercase sentence per ploy kind, built from canonical fields.
inline std::string render_ploy_text(const DeceptionPloy& ploy) {
    auto o = canonicalize_objective(ploy.objective);
    std::string technique = detail::lower(o.technique_id);
    std::string text = std::visit(
        [&](const auto& a) -> std::string {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, HoneyfileArtifact>)
                return "create honeyfile " + detail::trim(a.filename) + " in " +
                       canonicalize_resource(a.target_directory) + " to counter " + technique;
            else if constexpr (std::is_same_v<A, HoneytokenArtifact>)
                return "plant " + detail::trim(a.token_type) + " honeytoken at " + canonicalize_resource(a.placement) +
                       " to counter " + technique;
            else if constexpr (std::is_same_v<A, ApiHookArtifact>)
                return "hook " + canonicalize_resource(a.api_name) + " api to " +
                       std::string(action_phrase(o.action)) + " to counter " + technique;
            else if constexpr (std::is_same_v<A, DecoyServiceArtifact>)
                return "run decoy " + detail::trim(a.service_name) + " service on port " + std::to_string(a.port) +
                       " to counter " + technique;
            else
                return "deploy " + o.ploy_kind.name() + " on " + o.target_resource + " to " +
                       std::string(action_phrase(o.action)) + " to counter " + technique;
        },
        ploy.artifact);

    std::string out;
    for (char c : detail::lower(text)) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (space && (out.empty() || out.back() == ' ')) continue;
        out.push_back(space ? ' ' : c);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

// ---------------------------------------------------------------------------
// Ploy documents
// ---------------------------------------------------------------------------

struct ParseContext {
    std::string provider_name;
    std::string model_id;
    std::string run_id;
    std::int64_t iteration_index = 1;
    /// 1-based position of the document within its completion.
    std::size_t ordinal = 1;
};

struct ParsedPloy {
    DeceptionPloy ploy;
    /// Non-fatal observations, e.g. an unknown kind kept as other(label).
    std::vector<std::string> notes;
};

using ParseResult = std::variant<ParsedPloy, ValidationFeedback>;

inline std::string make_ploy_id(const ParseContext& ctx) {
    return (ctx.run_id.empty() ? std::string("ploy") : ctx.run_id) + "-i" + std::to_string(ctx.iteration_index) +
           "-p" + std::to_string(ctx.ordinal);
}

namespace detail {

/// Looks a key up in the flat document, then in its nested section object.
class PloyDocument {
  public:
    explicit PloyDocument(const json& doc) : doc_(doc) {}

    const json* find(std::string_view key, std::string_view section) const {
        std::string k(key);
        if (auto it = doc_.find(k); it != doc_.end() && !it->is_null()) return &*it;
        auto sec = doc_.find(std::string(section));
        if (sec != doc_.end() && sec->is_object()) {
            if (auto it = sec->find(k); it != sec->end() && !it->is_null()) return &*it;
        }
        return nullptr;
    }

    /// Returns the trimmed string, recording missing/type violations.
    std::string text(std::string_view key, std::string_view section, bool required, ValidationFeedback& fb) const {
        std::string path = std::string(section) + "." + std::string(key);
        const json* n = find(key, section);
        if (!n) {
            if (required) fb.add(ViolationCode::missing_field, path, "required field '" + path + "' is missing");
            return {};
        }
        std::string value;
        if (n->is_string())
            value = trim(n->get<std::string>());
        else if (n->is_number())
            value = n->dump();
        else {
            fb.add(ViolationCode::constraint_violation, path, "field '" + path + "' must be a string");
            return {};
        }
        if (value.empty() && required)
            fb.add(ViolationCode::missing_field, path, "required field '" + path + "' is empty");
        return value;
    }

    const json& raw() const { return doc_; }

  private:
    const json& doc_;
};

inline std::string normalize_kind_name(std::string_view raw) {
    std::string s = lower(trim(raw));
    for (auto& c : s)
        if (c == ' ' || c == '-') c = '_';
    return s;
}

inline const std::set<std::string>& reserved_ploy_keys() {
    static const std::set<std::string> keys{
        "ploy_kind", "technique_id", "target_resource", "action", "description", "description_text",
        "objective", "artifact", "ploy_id", "provenance", "filename", "content", "target_directory",
        "token_type", "value", "placement", "api_name", "interception_behavior", "fake_response_description",
        "service_name", "port", "banner", "name", "rationale", "notes",
    };
    return keys;
}

} // namespace detail

/// Parses one model-emitted document into a ploy. Never throws: any failure
/// comes back as feedback listing every violation found.
inline ParseResult parse_ploy(std::string_view document, const ParseContext& ctx) {
    ValidationFeedback fb;
    auto parsed = json::parse(document, nullptr, false);
    if (parsed.is_discarded()) {
        fb.add(ViolationCode::malformed_document, "$", "document is not valid JSON");
        return fb;
    }
    if (!parsed.is_object()) {
        fb.add(ViolationCode::malformed_document, "$", "document is not a JSON object");
        return fb;
    }
    detail::PloyDocument doc(parsed);
    std::vector<std::string> notes;

    PloyObjective objective;
    bool kind_ok = false;
    if (const json* k = doc.find("ploy_kind", "objective"); !k) {
        fb.add(ViolationCode::missing_field, "objective.ploy_kind", "required field 'objective.ploy_kind' is missing");
    } else if (!k->is_string() || detail::trim(k->get<std::string>()).empty()) {
        fb.add(ViolationCode::bad_kind, "objective.ploy_kind", "ploy_kind must be a non-empty string");
    } else {
        auto name = detail::normalize_kind_name(k->get<std::string>());
        objective.ploy_kind = PloyKind::from_name(name);
        kind_ok = true;
        if (objective.ploy_kind.is_other())
            notes.push_back("ploy_kind '" + name + "' is not a known kind; kept as other(" + name + ")");
    }

    auto technique = doc.text("technique_id", "objective", true, fb);
    if (!technique.empty()) {
        objective.technique_id = canonicalize_technique(technique);
        if (!is_technique_id(objective.technique_id))
            fb.add(ViolationCode::constraint_violation, "objective.technique_id",
                   "technique_id '" + technique + "' does not match T#### or T####.###");
    }

    const auto& kind = objective.ploy_kind;
    bool known_kind = kind_ok && !kind.is_other();

    auto action = doc.text("action", "objective", kind_ok && !known_kind, fb);
    if (!action.empty()) {
        if (auto a = parse_action(detail::normalize_kind_name(action)))
            objective.action = *a;
        else
            fb.add(ViolationCode::bad_kind, "objective.action", "unknown action '" + action + "'");
    } else if (known_kind) {
        switch (*kind.known()) {
        case PloyKindTag::honeyfile: objective.action = PloyAction::place_decoy; break;
        case PloyKindTag::honeytoken: objective.action = PloyAction::supply_fake_data; break;
        case PloyKindTag::api_hook: objective.action = PloyAction::intercept_api; break;
        case PloyKindTag::decoy_service: objective.action = PloyAction::redirect_to_honeypot; break;
        }
    }

    Artifact artifact;
    std::string anchor;
    if (kind_ok) {
        if (kind.is(PloyKindTag::honeyfile)) {
            HoneyfileArtifact a;
            a.filename = doc.text("filename", "artifact", true, fb);
            a.content = doc.text("content", "artifact", true, fb);
            a.target_directory = doc.text("target_directory", "artifact", true, fb);
            anchor = a.target_directory;
            artifact = a;
        } else if (kind.is(PloyKindTag::honeytoken)) {
            HoneytokenArtifact a;
            a.token_type = doc.text("token_type", "artifact", true, fb);
            a.value = doc.text("value", "artifact", true, fb);
            a.placement = doc.text("placement", "artifact", true, fb);
            anchor = a.placement;
            artifact = a;
        } else if (kind.is(PloyKindTag::api_hook)) {
            ApiHookArtifact a;
            a.api_name = doc.text("api_name", "artifact", true, fb);
            a.interception_behavior = doc.text("interception_behavior", "artifact", true, fb);
            a.fake_response_description = doc.text("fake_response_description", "artifact", true, fb);
            anchor = a.api_name;
            artifact = a;
        } else if (kind.is(PloyKindTag::decoy_service)) {
            DecoyServiceArtifact a;
            a.service_name = doc.text("service_name", "artifact", true, fb);
            if (const json* p = doc.find("port", "artifact"); !p) {
                fb.add(ViolationCode::missing_field, "artifact.port", "required field 'artifact.port' is missing");
            } else {
                std::optional<std::int64_t> port;
                if (p->is_number_integer())
                    port = p->get<std::int64_t>();
                else if (p->is_string()) {
                    auto s = detail::trim(p->get<std::string>());
                    if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos && s.size() < 10)
                        port = std::stoll(s);
                }
                if (!port || *port < 1 || *port > 65535)
                    fb.add(ViolationCode::constraint_violation, "artifact.port", "port must be an integer in 1-65535");
                else
                    a.port = *port;
            }
            a.banner = doc.text("banner", "artifact", true, fb);
            anchor = a.service_name;
            artifact = a;
        } else {
            OtherArtifact a;
            auto collect = [&](const json& obj) {
                for (const auto& [k, v] : obj.items())
                    if (!detail::reserved_ploy_keys().count(k) && v.is_string()) a.fields[k] = v.get<std::string>();
            };
            collect(parsed);
            if (auto sec = parsed.find("artifact"); sec != parsed.end() && sec->is_object()) {
                for (const auto& [k, v] : sec->items())
                    if (v.is_string()) a.fields[k] = v.get<std::string>();
            }
            artifact = a;
        }
    }

    auto target = doc.text("target_resource", "objective", false, fb);
    if (target.empty()) {
        if (kind_ok && !known_kind)
            fb.add(ViolationCode::missing_field, "objective.target_resource",
                   "required field 'objective.target_resource' is missing");
        target = anchor;
    }
    objective.target_resource = target;

    for (const auto& [k, v] : parsed.items())
        if (!detail::reserved_ploy_keys().count(k) && known_kind) notes.push_back("ignored field '" + k + "'");

    if (!fb.ok()) return fb;

    DeceptionPloy ploy;
    ploy.ploy_id = make_ploy_id(ctx);
    ploy.objective = canonicalize_objective(objective);
    ploy.artifact = std::move(artifact);
    ploy.provenance = {ctx.provider_name, ctx.model_id, ctx.run_id, ctx.iteration_index};
    std::string description;
    if (const json* d = doc.find("description_text", "objective"); d && d->is_string())
        description = detail::trim(d->get<std::string>());
    else if (const json* d2 = doc.find("description", "objective"); d2 && d2->is_string())
        description = detail::trim(d2->get<std::string>());
    ploy.description_text = description.empty() ? render_ploy_text(ploy) : description;

    auto residual = validate_ploy(ploy);
    if (!residual.ok()) return residual;
    return ParsedPloy{std::move(ploy), std::move(notes)};
}

struct CompletionParse {
    std::vector<DeceptionPloy> ploys;
    ValidationFeedback feedback;
    std::vector<std::string> notes;
};

/// Extracts every block of a completion and parses each as a candidate ploy.
/// A completion with no structured block yields a single empty_output violation.
inline CompletionParse parse_completion(std::string_view raw, ParseContext ctx) {
    CompletionParse out;
    auto blocks = extract_structured_blocks(raw);
    if (blocks.empty()) {
        out.feedback.add(ViolationCode::empty_output, "$",
                         "no JSON object found in the output; emit each ploy as a JSON object");
        return out;
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        ctx.ordinal = out.ploys.size() + 1;
        auto result = parse_ploy(blocks[i], ctx);
        if (auto* ok = std::get_if<ParsedPloy>(&result)) {
            out.ploys.push_back(std::move(ok->ploy));
            for (auto& n : ok->notes) out.notes.push_back(std::move(n));
        } else {
            const auto& fb = std::get<ValidationFeedback>(result);
            for (auto v : fb.violations) {
                if (blocks.size() > 1) v.message = "document " + std::to_string(i + 1) + ": " + v.message;
                out.feedback.violations.push_back(std::move(v));
            }
        }
    }
    return out;
}

} // namespace spade
