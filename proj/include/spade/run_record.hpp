#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spade/domain.hpp"

namespace spade {

// ---------------------------------------------------------------------------
// Provider-facing values shared by the gateway, pipeline, and store
// ---------------------------------------------------------------------------

enum class ProviderKind { openai_compatible, gemini_style, local_llama_style, replay };

inline constexpr std::array<std::pair<ProviderKind, std::string_view>, 4> kProviderKindNames{{
    {ProviderKind::openai_compatible, "openai_compatible"},
    {ProviderKind::gemini_style, "gemini_style"},
    {ProviderKind::local_llama_style, "local_llama_style"},
    {ProviderKind::replay, "replay"},
}};

inline std::string_view to_string(ProviderKind k) {
    for (const auto& [kind, name] : kProviderKindNames)
        if (kind == k) return name;
    return "replay";
}

/// Connection settings for one model. Holds the name of the credential's
/// environment variable, never the credential itself.
struct ProviderProfile {
    std::string name;
    ProviderKind kind = ProviderKind::replay;
    std::string endpoint_url;
    std::string model_id;
    std::string auth_env_var;
    std::int64_t timeout_ms = 60000;
    std::int64_t max_retries = 2;
    std::int64_t max_concurrent = 1;
    std::string cassette_path;

    bool operator==(const ProviderProfile&) const = default;
};

struct CompletionResult {
    std::string text;
    std::int64_t latency_ms = 0;
    std::string provider_name;
    std::string model_id;
    std::int64_t attempt_count = 1;

    bool operator==(const CompletionResult&) const = default;
};

inline ValidationFeedback validate_profile(const ProviderProfile& p) {
    ValidationFeedback fb;
    require_field(fb, p.name, "name");
    require_field(fb, p.model_id, "model_id");
    if (p.kind == ProviderKind::replay) {
        require_field(fb, p.cassette_path, "cassette_path");
    } else {
        require_field(fb, p.endpoint_url, "endpoint_url");
    }
    if (p.timeout_ms <= 0) fb.add(ViolationCode::constraint_violation, "timeout_ms", "timeout_ms must be > 0");
    if (p.max_retries < 0) fb.add(ViolationCode::constraint_violation, "max_retries", "max_retries must be >= 0");
    if (p.max_concurrent < 1)
        fb.add(ViolationCode::constraint_violation, "max_concurrent", "max_concurrent must be >= 1");
    return fb;
}

inline json to_json(const ProviderProfile& p) {
    json j = {{"name", p.name},
              {"kind", std::string(to_string(p.kind))},
              {"model_id", p.model_id},
              {"timeout_ms", p.timeout_ms},
              {"max_retries", p.max_retries},
              {"max_concurrent", p.max_concurrent}};
    if (!p.endpoint_url.empty()) j["endpoint_url"] = p.endpoint_url;
    if (!p.auth_env_var.empty()) j["auth_env_var"] = p.auth_env_var;
    if (!p.cassette_path.empty()) j["cassette_path"] = p.cassette_path;
    return j;
}

inline ProviderProfile decode_profile(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    ProviderProfile p;
    p.name = r.string("name");
    auto kind = r.string("kind");
    bool known = kind.empty();
    for (const auto& [k, n] : kProviderKindNames)
        if (n == kind) {
            p.kind = k;
            known = true;
        }
    if (!known) fb.add(ViolationCode::bad_kind, r.path_of("kind"), "unknown provider kind '" + kind + "'");
    p.endpoint_url = r.string("endpoint_url", false);
    p.model_id = r.string("model_id");
    p.auth_env_var = r.string("auth_env_var", false);
    p.timeout_ms = r.integer("timeout_ms", false, p.timeout_ms);
    p.max_retries = r.integer("max_retries", false, p.max_retries);
    p.max_concurrent = r.integer("max_concurrent", false, p.max_concurrent);
    p.cassette_path = r.string("cassette_path", false);
    r.finish();
    if (r.valid()) {
        for (const auto& v : validate_profile(p).violations) {
            if (v.code == ViolationCode::missing_field && fb.has_path(r.path_of(v.path))) continue;
            fb.add(v.code, r.path_of(v.path), v.message);
        }
    }
    return p;
}

template <>
inline ProviderProfile from_json<ProviderProfile>(const json& j) {
    return decode_strict(j, decode_profile);
}

inline json to_json(const CompletionResult& c) {
    return {{"text", c.text},
            {"latency_ms", c.latency_ms},
            {"provider_name", c.provider_name},
            {"model_id", c.model_id},
            {"attempt_count", c.attempt_count}};
}

inline CompletionResult decode_completion(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    CompletionResult c;
    c.text = r.string("text", true, true);
    c.latency_ms = r.integer("latency_ms");
    c.provider_name = r.string("provider_name", true, true);
    c.model_id = r.string("model_id", true, true);
    c.attempt_count = r.integer("attempt_count");
    r.finish();
    return c;
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

using Clock = std::function<std::chrono::system_clock::time_point()>;

inline Clock system_clock_source() {
    return [] { return std::chrono::system_clock::now(); };
}

/// ISO-8601 UTC with millisecond precision, e.g. 2026-01-02T03:04:05.678Z.
inline std::string format_timestamp(std::chrono::system_clock::time_point tp) {
    using namespace std::chrono;
    auto ms = duration_cast<milliseconds>(tp.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    if (ms % 1000 < 0) --secs;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(((ms % 1000) + 1000) % 1000));
    return out;
}

enum class RunStatus { succeeded, exhausted, provider_failed };

inline std::string_view to_string(RunStatus s) {
    switch (s) {
    case RunStatus::succeeded: return "succeeded";
    case RunStatus::exhausted: return "exhausted";
    case RunStatus::provider_failed: return "provider_failed";
    }
    return "provider_failed";
}

struct IterationRecord {
    std::int64_t iteration_index = 1;
    std::string rendered_prompt_digest;
    CompletionResult completion;
    std::vector<DeceptionPloy> ploys;
    ValidationFeedback feedback;

    bool operator==(const IterationRecord&) const = default;
};

struct SelectionEvent {
    std::string engineer_id;
    std::string ploy_id;
    std::string at;
    bool operator==(const SelectionEvent&) const = default;
};

struct Guidance {
    std::string ploy_id;
    std::string prompt_digest;
    std::string text;
    std::string at;
    bool operator==(const Guidance&) const = default;
};

/// Orchestrator progress event; `type` is one of run_started,
/// iteration_completed, run_finished, ploy_selected, guidance_ready.
struct ProgressEvent {
    std::int64_t seq = 0;
    std::string type;
    std::string run_id;
    std::string at;
    json data = json::object();

    bool operator==(const ProgressEvent& o) const {
        return seq == o.seq && type == o.type && run_id == o.run_id && at == o.at && data == o.data;
    }
};

struct RunRecord {
    std::string run_id;
    std::string context_id;
    std::string provider_name;
    std::string model_id;
    std::vector<IterationRecord> iterations;
    RunStatus final_status = RunStatus::exhausted;
    std::optional<std::string> selected_ploy_id;
    std::optional<Guidance> guidance;
    std::string created_at;
    std::optional<std::string> error;
    std::vector<SelectionEvent> selections;
    std::vector<Guidance> guidance_history;
    std::vector<ProgressEvent> events;
    /// Prompt texts by digest; persisted as prompts/<digest>.txt, not in run.json.
    std::map<std::string, std::string> prompts;

    bool operator==(const RunRecord&) const = default;

    const DeceptionPloy* find_ploy(std::string_view ploy_id) const {
        for (const auto& it : iterations)
            for (const auto& p : it.ploys)
                if (p.ploy_id == ploy_id) return &p;
        return nullptr;
    }

    std::int64_t final_iteration() const { return iterations.empty() ? 0 : iterations.back().iteration_index; }

    std::int64_t total_latency_ms() const {
        std::int64_t sum = 0;
        for (const auto& it : iterations) sum += it.completion.latency_ms;
        return sum;
    }

    std::vector<DeceptionPloy> all_ploys() const {
        std::vector<DeceptionPloy> out;
        for (const auto& it : iterations) out.insert(out.end(), it.ploys.begin(), it.ploys.end());
        return out;
    }
};

inline json to_json(const IterationRecord& it) {
    json ploys = json::array();
    for (const auto& p : it.ploys) ploys.push_back(to_json(p));
    return {{"iteration_index", it.iteration_index},
            {"rendered_prompt_digest", it.rendered_prompt_digest},
            {"completion", to_json(it.completion)},
            {"ploys", ploys},
            {"feedback", to_json(it.feedback)}};
}

inline json to_json(const SelectionEvent& s) {
    return {{"engineer_id", s.engineer_id}, {"ploy_id", s.ploy_id}, {"at", s.at}};
}

inline json to_json(const Guidance& g) {
    return {{"ploy_id", g.ploy_id}, {"prompt_digest", g.prompt_digest}, {"text", g.text}, {"at", g.at}};
}

inline json to_json(const ProgressEvent& e) {
    return {{"seq", e.seq}, {"type", e.type}, {"run_id", e.run_id}, {"at", e.at}, {"data", e.data}};
}

inline json to_json(const RunRecord& r) {
    json iterations = json::array();
    for (const auto& it : r.iterations) iterations.push_back(to_json(it));
    json selections = json::array();
    for (const auto& s : r.selections) selections.push_back(to_json(s));
    json history = json::array();
    for (const auto& g : r.guidance_history) history.push_back(to_json(g));
    json events = json::array();
    for (const auto& e : r.events) events.push_back(to_json(e));
    return {{"run_id", r.run_id},
            {"context_id", r.context_id},
            {"provider_name", r.provider_name},
            {"model_id", r.model_id},
            {"iterations", iterations},
            {"final_status", std::string(to_string(r.final_status))},
            {"selected_ploy_id", r.selected_ploy_id ? json(*r.selected_ploy_id) : json(nullptr)},
            {"guidance", r.guidance ? to_json(*r.guidance) : json(nullptr)},
            {"created_at", r.created_at},
            {"error", r.error ? json(*r.error) : json(nullptr)},
            {"selections", selections},
            {"guidance_history", history},
            {"events", events}};
}

inline IterationRecord decode_iteration(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    IterationRecord it;
    it.iteration_index = r.integer("iteration_index");
    it.rendered_prompt_digest = r.string("rendered_prompt_digest");
    if (const json* c = r.node("completion"))
        it.completion = decode_completion(*c, r.path_of("completion"), fb);
    else if (r.valid())
        r.missing("completion");
    it.ploys = r.array<DeceptionPloy>("ploys", decode_ploy);
    if (const json* f = r.node("feedback"))
        it.feedback = decode_feedback(*f, r.path_of("feedback"), fb);
    r.finish();
    return it;
}

inline SelectionEvent decode_selection(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    SelectionEvent s;
    s.engineer_id = r.string("engineer_id", true, true);
    s.ploy_id = r.string("ploy_id");
    s.at = r.string("at", true, true);
    r.finish();
    return s;
}

inline Guidance decode_guidance(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    Guidance g;
    g.ploy_id = r.string("ploy_id");
    g.prompt_digest = r.string("prompt_digest");
    g.text = r.string("text", true, true);
    g.at = r.string("at", true, true);
    r.finish();
    return g;
}

inline ProgressEvent decode_event(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    ProgressEvent e;
    e.seq = r.integer("seq");
    e.type = r.string("type");
    e.run_id = r.string("run_id", true, true);
    e.at = r.string("at", true, true);
    if (const json* d = r.node("data")) e.data = *d;
    r.finish();
    return e;
}

inline RunRecord decode_run(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    RunRecord run;
    run.run_id = r.string("run_id");
    run.context_id = r.string("context_id", true, true);
    run.provider_name = r.string("provider_name", true, true);
    run.model_id = r.string("model_id", true, true);
    run.iterations = r.array<IterationRecord>("iterations", decode_iteration);
    auto status = r.string("final_status");
    if (status == "succeeded")
        run.final_status = RunStatus::succeeded;
    else if (status == "exhausted")
        run.final_status = RunStatus::exhausted;
    else if (status == "provider_failed")
        run.final_status = RunStatus::provider_failed;
    else if (!status.empty())
        fb.add(ViolationCode::bad_kind, r.path_of("final_status"), "unknown status '" + status + "'");
    run.selected_ploy_id = r.optional_string("selected_ploy_id");
    if (const json* g = r.node("guidance")) run.guidance = decode_guidance(*g, r.path_of("guidance"), fb);
    run.created_at = r.string("created_at", true, true);
    run.error = r.optional_string("error");
    run.selections = r.array<SelectionEvent>("selections", decode_selection, false);
    run.guidance_history = r.array<Guidance>("guidance_history", decode_guidance, false);
    run.events = r.array<ProgressEvent>("events", decode_event, false);
    r.finish();
    return run;
}

template <>
inline RunRecord from_json<RunRecord>(const json& j) {
    return decode_strict(j, decode_run);
}

} // namespace spade
