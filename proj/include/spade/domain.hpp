#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spade/error.hpp"
#include "spade/json_fields.hpp"

namespace spade {

// ---------------------------------------------------------------------------
// Open enumerations: a closed set of known names plus an `other(label)` case.
// ---------------------------------------------------------------------------

template <typename Traits>
class OpenEnum {
  public:
    using Known = typename Traits::Known;

    OpenEnum() : known_(Traits::names[0].first) {}
    OpenEnum(Known k) : known_(k) {} // NOLINT(google-explicit-constructor)

    static OpenEnum other(std::string label) {
        OpenEnum e;
        e.known_.reset();
        e.label_ = std::move(label);
        return e;
    }

    /// Known names map to their enumerator; anything else becomes other(name).
    static OpenEnum from_name(std::string_view name) {
        for (const auto& [k, n] : Traits::names)
            if (n == name) return OpenEnum(k);
        return other(std::string(name));
    }

    static bool is_known_name(std::string_view name) {
        for (const auto& [k, n] : Traits::names)
            if (n == name) return true;
        return false;
    }

    bool is_other() const { return !known_.has_value(); }
    std::optional<Known> known() const { return known_; }
    bool is(Known k) const { return known_ == k; }

    std::string name() const {
        if (!known_) return label_;
        for (const auto& [k, n] : Traits::names)
            if (k == *known_) return std::string(n);
        return label_;
    }

    bool operator==(const OpenEnum& o) const { return known_ == o.known_ && label_ == o.label_; }

  private:
    std::optional<Known> known_;
    std::string label_;
};

enum class MalwareFamilyKind { ransomware, credential_stealer, keylogger };

struct MalwareFamilyTraits {
    using Known = MalwareFamilyKind;
    static constexpr std::array<std::pair<Known, std::string_view>, 3> names{{
        {Known::ransomware, "ransomware"},
        {Known::credential_stealer, "credential_stealer"},
        {Known::keylogger, "keylogger"},
    }};
};
using MalwareFamily = OpenEnum<MalwareFamilyTraits>;

enum class PloyKindTag { honeyfile, honeytoken, api_hook, decoy_service };

struct PloyKindTraits {
    using Known = PloyKindTag;
    static constexpr std::array<std::pair<Known, std::string_view>, 4> names{{
        {Known::honeyfile, "honeyfile"},
        {Known::honeytoken, "honeytoken"},
        {Known::api_hook, "api_hook"},
        {Known::decoy_service, "decoy_service"},
    }};
};
using PloyKind = OpenEnum<PloyKindTraits>;

enum class PloyAction { place_decoy, intercept_api, redirect_to_honeypot, supply_fake_data };

inline constexpr std::array<std::pair<PloyAction, std::string_view>, 4> kActionNames{{
    {PloyAction::place_decoy, "place_decoy"},
    {PloyAction::intercept_api, "intercept_api"},
    {PloyAction::redirect_to_honeypot, "redirect_to_honeypot"},
    {PloyAction::supply_fake_data, "supply_fake_data"},
}};

inline std::string_view to_string(PloyAction a) {
    for (const auto& [k, n] : kActionNames)
        if (k == a) return n;
    return "place_decoy";
}

inline std::optional<PloyAction> parse_action(std::string_view name) {
    for (const auto& [k, n] : kActionNames)
        if (n == name) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Value types
// ---------------------------------------------------------------------------

struct TtpInsight {
    std::string technique_id;
    std::vector<std::string> api_sequence;
    std::string behavior_label;

    bool operator==(const TtpInsight&) const = default;
};

/// Normalized sandbox intelligence about one detected sample.
struct ThreatContext {
    std::string context_id;
    MalwareFamily malware_family;
    std::string sample_label;
    std::vector<TtpInsight> ttps;
    std::vector<std::string> targeted_resources;
    std::string narrative;

    bool operator==(const ThreatContext&) const = default;
};

struct PloyObjective {
    PloyKind ploy_kind;
    std::string technique_id;
    std::string target_resource;
    PloyAction action = PloyAction::place_decoy;

    bool operator==(const PloyObjective&) const = default;
};

struct HoneyfileArtifact {
    std::string filename;
    std::string content;
    std::string target_directory;
    bool operator==(const HoneyfileArtifact&) const = default;
};

struct HoneytokenArtifact {
    std::string token_type;
    std::string value;
    std::string placement;
    bool operator==(const HoneytokenArtifact&) const = default;
};

struct ApiHookArtifact {
    std::string api_name;
    std::string interception_behavior;
    std::string fake_response_description;
    bool operator==(const ApiHookArtifact&) const = default;
};

struct DecoyServiceArtifact {
    std::string service_name;
    std::int64_t port = 0;
    std::string banner;
    bool operator==(const DecoyServiceArtifact&) const = default;
};

/// Payload for ploy kinds outside the known set; string fields kept as given.
struct OtherArtifact {
    std::map<std::string, std::string> fields;
    bool operator==(const OtherArtifact&) const = default;
};

using Artifact =
    std::variant<HoneyfileArtifact, HoneytokenArtifact, ApiHookArtifact, DecoyServiceArtifact, OtherArtifact>;

struct Provenance {
    std::string provider_name;
    std::string model_id;
    std::string run_id;
    std::int64_t iteration_index = 1;
    bool operator==(const Provenance&) const = default;
};

struct DeceptionPloy {
    std::string ploy_id;
    PloyObjective objective;
    Artifact artifact;
    std::string description_text;
    Provenance provenance;

    bool operator==(const DeceptionPloy&) const = default;
};

struct GroundTruthEntry {
    std::string entry_id;
    std::string behavior_id;
    std::string technique_id;
    std::vector<std::string> api_sequence;
    PloyObjective objective;
    std::string reference_text;

    bool operator==(const GroundTruthEntry&) const = default;
};

struct ExpertScore {
    std::string scorer_id;
    std::string ploy_id;
    std::int64_t relevance = 0;
    std::int64_t actionability = 0;
    std::int64_t feasibility = 0;
    std::int64_t realism = 0;
    std::optional<std::string> comment;

    bool operator==(const ExpertScore&) const = default;
};

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool starts_with_segment(std::string_view path, std::string_view prefix) {
    return path.substr(0, prefix.size()) == prefix && (path.size() == prefix.size() || path[prefix.size()] == '/');
}

} // namespace detail

/// Canonical form of a resource string (path, API name, registry key).
///
/// Lowercased, `\` turned into `/`, repeated and trailing separators removed,
/// a leading drive letter stripped, and a user-profile prefix replaced by `~`.
inline std::string canonicalize_resource(std::string_view raw) {
    std::string s = detail::lower(detail::trim(raw));
    std::replace(s.begin(), s.end(), '\\', '/');

    std::string collapsed;
    collapsed.reserve(s.size());
    for (char c : s) {
        if (c == '/' && !collapsed.empty() && collapsed.back() == '/') continue;
        collapsed.push_back(c);
    }
    s = std::move(collapsed);

    while (s.rfind("./", 0) == 0) s.erase(0, 2);

    if (s.size() >= 2 && std::isalpha(static_cast<unsigned char>(s[0])) && s[1] == ':') {
        s.erase(0, 2);
        if (s.empty() || s[0] != '/') s.insert(s.begin(), '/');
    }

    for (std::string_view var : {"%userprofile%", "%homepath%", "${home}", "$home"}) {
        if (detail::starts_with_segment(s, var)) {
            s = "~" + s.substr(var.size());
            break;
        }
    }

    for (std::string_view root : {"/users/", "/home/", "/documents and settings/"}) {
        if (s.rfind(root, 0) != 0) continue;
        auto name_end = s.find('/', root.size());
        if (name_end == std::string::npos) {
            if (s.size() > root.size()) s = "~";
        } else {
            s = "~" + s.substr(name_end);
        }
        break;
    }

    while (s.size() > 1 && s.back() == '/') s.pop_back();
    return s;
}

inline std::string canonicalize_technique(std::string_view raw) {
    std::string s = detail::trim(raw);
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

/// `T` + 4 digits, optionally `.` + 3 digits.
inline bool is_technique_id(std::string_view id) {
    auto digits = [&](std::size_t from, std::size_t n) {
        for (std::size_t i = from; i < from + n; ++i)
            if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
        return true;
    };
    if (id.size() == 5) return id[0] == 'T' && digits(1, 4);
    if (id.size() == 9) return id[0] == 'T' && digits(1, 4) && id[5] == '.' && digits(6, 3);
    return false;
}

inline PloyObjective canonicalize_objective(const PloyObjective& raw) {
    if (raw.ploy_kind.name().empty())
        throw ValidationError("objective field 'ploy_kind' is empty",
                              {{{ViolationCode::missing_field, "ploy_kind", "ploy_kind is empty"}}});
    if (detail::trim(raw.technique_id).empty())
        throw ValidationError("objective field 'technique_id' is empty",
                              {{{ViolationCode::missing_field, "technique_id", "technique_id is empty"}}});
    if (detail::trim(raw.target_resource).empty())
        throw ValidationError("objective field 'target_resource' is empty",
                              {{{ViolationCode::missing_field, "target_resource", "target_resource is empty"}}});
    PloyObjective out = raw;
    out.technique_id = canonicalize_technique(raw.technique_id);
    out.target_resource = canonicalize_resource(raw.target_resource);
    return out;
}

inline bool same_objective(const PloyObjective& a, const PloyObjective& b) {
    return canonicalize_objective(a) == canonicalize_objective(b);
}

/// Kind of the artifact payload, as the ploy_kind it corresponds to.
inline std::optional<PloyKindTag> artifact_kind(const Artifact& a) {
    switch (a.index()) {
    case 0: return PloyKindTag::honeyfile;
    case 1: return PloyKindTag::honeytoken;
    case 2: return PloyKindTag::api_hook;
    case 3: return PloyKindTag::decoy_service;
    default: return std::nullopt;
    }
}

/// Artifact fields in declaration order, values rendered as text.
inline std::vector<std::pair<std::string, std::string>> artifact_fields(const Artifact& artifact) {
    return std::visit(
        [](const auto& a) -> std::vector<std::pair<std::string, std::string>> {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, HoneyfileArtifact>)
                return {{"filename", a.filename}, {"content", a.content}, {"target_directory", a.target_directory}};
            else if constexpr (std::is_same_v<A, HoneytokenArtifact>)
                return {{"token_type", a.token_type}, {"value", a.value}, {"placement", a.placement}};
            else if constexpr (std::is_same_v<A, ApiHookArtifact>)
                return {{"api_name", a.api_name},
                        {"interception_behavior", a.interception_behavior},
                        {"fake_response_description", a.fake_response_description}};
            else if constexpr (std::is_same_v<A, DecoyServiceArtifact>)
                return {{"service_name", a.service_name}, {"port", std::to_string(a.port)}, {"banner", a.banner}};
            else
                return {a.fields.begin(), a.fields.end()};
        },
        artifact);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline ValidationFeedback validate_threat_context(const ThreatContext& ctx) {
    ValidationFeedback fb;
    if (ctx.context_id.empty()) fb.add(ViolationCode::missing_field, "context_id", "context_id is empty");
    if (ctx.malware_family.name().empty())
        fb.add(ViolationCode::missing_field, "malware_family", "malware_family label is empty");
    if (ctx.ttps.empty()) fb.add(ViolationCode::missing_field, "ttps", "at least one TTP is required");
    for (std::size_t i = 0; i < ctx.ttps.size(); ++i) {
        const auto& t = ctx.ttps[i];
        auto base = detail::index_path("ttps", i);
        if (t.technique_id.empty())
            fb.add(ViolationCode::missing_field, base + ".technique_id", "technique_id is empty");
        else if (!is_technique_id(t.technique_id))
            fb.add(ViolationCode::constraint_violation, base + ".technique_id",
                   "technique_id '" + t.technique_id + "' does not match T#### or T####.###");
        if (t.api_sequence.empty() && t.behavior_label.empty())
            fb.add(ViolationCode::missing_field, base + ".behavior_label",
                   "behavior_label is required when api_sequence is empty");
    }
    return fb;
}

inline void require_field(ValidationFeedback& fb, const std::string& value, const std::string& path) {
    if (detail::trim(value).empty()) fb.add(ViolationCode::missing_field, path, "required field '" + path + "' is empty");
}

inline ValidationFeedback validate_artifact(const PloyKind& kind, const Artifact& artifact) {
    ValidationFeedback fb;
    auto expected = kind.known();
    auto actual = artifact_kind(artifact);
    if (expected != actual) {
        fb.add(ViolationCode::bad_kind, "artifact", "artifact payload does not match ploy_kind '" + kind.name() + "'");
        return fb;
    }
    std::visit(
        [&](const auto& a) {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, HoneyfileArtifact>) {
                require_field(fb, a.filename, "artifact.filename");
                require_field(fb, a.content, "artifact.content");
                require_field(fb, a.target_directory, "artifact.target_directory");
            } else if constexpr (std::is_same_v<A, HoneytokenArtifact>) {
                require_field(fb, a.token_type, "artifact.token_type");
                require_field(fb, a.value, "artifact.value");
                require_field(fb, a.placement, "artifact.placement");
            } else if constexpr (std::is_same_v<A, ApiHookArtifact>) {
                require_field(fb, a.api_name, "artifact.api_name");
                require_field(fb, a.interception_behavior, "artifact.interception_behavior");
                require_field(fb, a.fake_response_description, "artifact.fake_response_description");
            } else if constexpr (std::is_same_v<A, DecoyServiceArtifact>) {
                require_field(fb, a.service_name, "artifact.service_name");
                if (a.port < 1 || a.port > 65535)
                    fb.add(ViolationCode::constraint_violation, "artifact.port",
                           "port " + std::to_string(a.port) + " outside 1-65535");
                require_field(fb, a.banner, "artifact.banner");
            }
        },
        artifact);
    return fb;
}

inline ValidationFeedback validate_objective(const PloyObjective& o) {
    ValidationFeedback fb;
    if (o.ploy_kind.name().empty()) fb.add(ViolationCode::missing_field, "objective.ploy_kind", "ploy_kind is empty");
    if (detail::trim(o.technique_id).empty())
        fb.add(ViolationCode::missing_field, "objective.technique_id", "technique_id is empty");
    else if (!is_technique_id(canonicalize_technique(o.technique_id)))
        fb.add(ViolationCode::constraint_violation, "objective.technique_id",
               "technique_id '" + o.technique_id + "' does not match T#### or T####.###");
    require_field(fb, o.target_resource, "objective.target_resource");
    return fb;
}

inline ValidationFeedback validate_ploy(const DeceptionPloy& p) {
    ValidationFeedback fb;
    require_field(fb, p.ploy_id, "ploy_id");
    fb.append(validate_objective(p.objective));
    fb.append(validate_artifact(p.objective.ploy_kind, p.artifact));
    require_field(fb, p.description_text, "description_text");
    if (p.provenance.iteration_index < 1)
        fb.add(ViolationCode::constraint_violation, "provenance.iteration_index", "iteration_index must be >= 1");
    return fb;
}

inline ValidationFeedback validate_expert_score(const ExpertScore& s) {
    ValidationFeedback fb;
    require_field(fb, s.scorer_id, "scorer_id");
    require_field(fb, s.ploy_id, "ploy_id");
    auto bound = [&](std::int64_t v, const char* name) {
        if (v < 1 || v > 5)
            fb.add(ViolationCode::constraint_violation, name,
                   std::string(name) + " must be within 1-5, got " + std::to_string(v));
    };
    bound(s.relevance, "relevance");
    bound(s.actionability, "actionability");
    bound(s.feasibility, "feasibility");
    bound(s.realism, "realism");
    return fb;
}

// ---------------------------------------------------------------------------
// JSON interchange (snake_case, unknown fields rejected)
// ---------------------------------------------------------------------------

inline json to_json(const TtpInsight& t) {
    return {{"technique_id", t.technique_id}, {"api_sequence", t.api_sequence}, {"behavior_label", t.behavior_label}};
}

inline json to_json(const ThreatContext& c) {
    json ttps = json::array();
    for (const auto& t : c.ttps) ttps.push_back(to_json(t));
    return {{"context_id", c.context_id},
            {"malware_family", c.malware_family.name()},
            {"sample_label", c.sample_label},
            {"ttps", ttps},
            {"targeted_resources", c.targeted_resources},
            {"narrative", c.narrative}};
}

inline json to_json(const PloyObjective& o) {
    return {{"ploy_kind", o.ploy_kind.name()},
            {"technique_id", o.technique_id},
            {"target_resource", o.target_resource},
            {"action", std::string(to_string(o.action))}};
}

inline json to_json(const Artifact& a) {
    return std::visit(
        [](const auto& v) -> json {
            using A = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<A, HoneyfileArtifact>)
                return {{"filename", v.filename}, {"content", v.content}, {"target_directory", v.target_directory}};
            else if constexpr (std::is_same_v<A, HoneytokenArtifact>)
                return {{"token_type", v.token_type}, {"value", v.value}, {"placement", v.placement}};
            else if constexpr (std::is_same_v<A, ApiHookArtifact>)
                return {{"api_name", v.api_name},
                        {"interception_behavior", v.interception_behavior},
                        {"fake_response_description", v.fake_response_description}};
            else if constexpr (std::is_same_v<A, DecoyServiceArtifact>)
                return {{"service_name", v.service_name}, {"port", v.port}, {"banner", v.banner}};
            else {
                json j = json::object();
                for (const auto& [k, val] : v.fields) j[k] = val;
                return j;
            }
        },
        a);
}

inline json to_json(const Provenance& p) {
    return {{"provider_name", p.provider_name},
            {"model_id", p.model_id},
            {"run_id", p.run_id},
            {"iteration_index", p.iteration_index}};
}

inline json to_json(const DeceptionPloy& p) {
    return {{"ploy_id", p.ploy_id},
            {"objective", to_json(p.objective)},
            {"artifact", to_json(p.artifact)},
            {"description_text", p.description_text},
            {"provenance", to_json(p.provenance)}};
}

inline json to_json(const GroundTruthEntry& e) {
    return {{"entry_id", e.entry_id},
            {"behavior_id", e.behavior_id},
            {"technique_id", e.technique_id},
            {"api_sequence", e.api_sequence},
            {"objective", to_json(e.objective)},
            {"reference_text", e.reference_text}};
}

inline json to_json(const ExpertScore& s) {
    json j = {{"scorer_id", s.scorer_id},
              {"ploy_id", s.ploy_id},
              {"relevance", s.relevance},
              {"actionability", s.actionability},
              {"feasibility", s.feasibility},
              {"realism", s.realism}};
    if (s.comment) j["comment"] = *s.comment;
    return j;
}

inline TtpInsight decode_ttp(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    TtpInsight t;
    t.technique_id = r.string("technique_id");
    t.api_sequence = r.strings("api_sequence", false);
    t.behavior_label = r.string("behavior_label", false);
    r.finish();
    return t;
}

inline ThreatContext decode_threat_context(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    ThreatContext c;
    c.context_id = r.string("context_id");
    c.malware_family = MalwareFamily::from_name(r.string("malware_family"));
    c.sample_label = r.string("sample_label", false);
    c.ttps = r.array<TtpInsight>("ttps", decode_ttp);
    c.targeted_resources = r.strings("targeted_resources", false);
    c.narrative = r.string("narrative", false);
    r.finish();
    return c;
}

inline PloyObjective decode_objective(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    PloyObjective o;
    o.ploy_kind = PloyKind::from_name(r.string("ploy_kind"));
    o.technique_id = r.string("technique_id");
    o.target_resource = r.string("target_resource");
    auto action = r.string("action");
    if (!action.empty()) {
        if (auto a = parse_action(action))
            o.action = *a;
        else
            fb.add(ViolationCode::bad_kind, r.path_of("action"), "unknown action '" + action + "'");
    }
    r.finish();
    return o;
}

inline Artifact decode_artifact(const PloyKind& kind, const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    Artifact out;
    if (kind.is(PloyKindTag::honeyfile)) {
        HoneyfileArtifact a;
        a.filename = r.string("filename");
        a.content = r.string("content");
        a.target_directory = r.string("target_directory");
        out = a;
    } else if (kind.is(PloyKindTag::honeytoken)) {
        HoneytokenArtifact a;
        a.token_type = r.string("token_type");
        a.value = r.string("value");
        a.placement = r.string("placement");
        out = a;
    } else if (kind.is(PloyKindTag::api_hook)) {
        ApiHookArtifact a;
        a.api_name = r.string("api_name");
        a.interception_behavior = r.string("interception_behavior");
        a.fake_response_description = r.string("fake_response_description");
        out = a;
    } else if (kind.is(PloyKindTag::decoy_service)) {
        DecoyServiceArtifact a;
        a.service_name = r.string("service_name");
        a.port = r.integer("port");
        a.banner = r.string("banner");
        out = a;
    } else {
        OtherArtifact a;
        if (r.valid()) {
            for (const auto& [k, v] : j.items()) {
                r.node(k);
                if (v.is_string())
                    a.fields[k] = v.get<std::string>();
                else
                    fb.add(ViolationCode::constraint_violation, r.path_of(k), "expected a string");
            }
        }
        out = a;
    }
    r.finish();
    return out;
}

inline Provenance decode_provenance(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    Provenance p;
    p.provider_name = r.string("provider_name", true, true);
    p.model_id = r.string("model_id", true, true);
    p.run_id = r.string("run_id", true, true);
    p.iteration_index = r.integer("iteration_index");
    r.finish();
    return p;
}

inline DeceptionPloy decode_ploy(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    DeceptionPloy p;
    p.ploy_id = r.string("ploy_id");
    if (const json* o = r.node("objective"))
        p.objective = decode_objective(*o, r.path_of("objective"), fb);
    else if (r.valid())
        r.missing("objective");
    if (const json* a = r.node("artifact"))
        p.artifact = decode_artifact(p.objective.ploy_kind, *a, r.path_of("artifact"), fb);
    else if (r.valid())
        r.missing("artifact");
    p.description_text = r.string("description_text");
    if (const json* pv = r.node("provenance"))
        p.provenance = decode_provenance(*pv, r.path_of("provenance"), fb);
    else if (r.valid())
        r.missing("provenance");
    r.finish();
    return p;
}

inline GroundTruthEntry decode_ground_truth(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    GroundTruthEntry e;
    e.entry_id = r.string("entry_id");
    e.behavior_id = r.string("behavior_id");
    e.technique_id = r.string("technique_id");
    e.api_sequence = r.strings("api_sequence", false);
    if (const json* o = r.node("objective"))
        e.objective = decode_objective(*o, r.path_of("objective"), fb);
    else if (r.valid())
        r.missing("objective");
    e.reference_text = r.string("reference_text");
    r.finish();
    return e;
}

inline ExpertScore decode_expert_score(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    ExpertScore s;
    s.scorer_id = r.string("scorer_id");
    s.ploy_id = r.string("ploy_id");
    s.relevance = r.integer("relevance");
    s.actionability = r.integer("actionability");
    s.feasibility = r.integer("feasibility");
    s.realism = r.integer("realism");
    s.comment = r.optional_string("comment");
    r.finish();
    return s;
}

template <typename T>
T from_json(const json& j);

template <>
inline ThreatContext from_json<ThreatContext>(const json& j) {
    return decode_strict(j, decode_threat_context);
}
template <>
inline PloyObjective from_json<PloyObjective>(const json& j) {
    return decode_strict(j, decode_objective);
}
template <>
inline DeceptionPloy from_json<DeceptionPloy>(const json& j) {
    return decode_strict(j, decode_ploy);
}
template <>
inline GroundTruthEntry from_json<GroundTruthEntry>(const json& j) {
    return decode_strict(j, decode_ground_truth);
}
template <>
inline ExpertScore from_json<ExpertScore>(const json& j) {
    return decode_strict(j, decode_expert_score);
}

} // namespace spade
