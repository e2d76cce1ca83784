#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spade/digest.hpp"
#include "spade/domain.hpp"
#include "spade/error.hpp"

namespace spade::sim {

struct FsNode {
    std::string content;
    bool is_decoy = false;
    std::optional<std::string> decoy_marker;
    std::string ploy_id;
    bool operator==(const FsNode&) const = default;
};

/// Interception installed by an api_hook ploy.
struct HookRule {
    std::string api_name;
    std::string ploy_id;
    std::string marker;
    std::string fake_content;
    bool operator==(const HookRule&) const = default;
};

struct DecoyService {
    std::string service_name;
    std::int64_t port = 0;
    std::string ploy_id;
    std::string marker;
    bool operator==(const DecoyService&) const = default;
};

/// One interaction. `step` is the script step index, or -1 for deployment.
struct FsEvent {
    std::int64_t step = -1;
    std::string op;
    std::string target;
    std::string outcome;
    bool operator==(const FsEvent&) const = default;
};

/// Deterministic marker for a ploy; unique per ploy_id.
inline std::string decoy_marker_for(std::string_view ploy_id) {
    return "spade-decoy-" + sha256_hex(ploy_id).substr(0, 16);
}

/// `*` and `?` stay within one path segment; `**` crosses segments.
inline bool glob_match(std::string_view pattern, std::string_view path) {
    if (pattern.empty()) return path.empty();
    if (pattern.substr(0, 2) == "**") {
        auto rest = pattern.substr(2);
        for (std::size_t i = 0; i <= path.size(); ++i)
            if (glob_match(rest, path.substr(i))) return true;
        return false;
    }
    if (pattern[0] == '*') {
        auto rest = pattern.substr(1);
        for (std::size_t i = 0; i <= path.size(); ++i) {
            if (glob_match(rest, path.substr(i))) return true;
            if (i < path.size() && path[i] == '/') break;
        }
        return false;
    }
    if (path.empty()) return false;
    if (pattern[0] == '?') return path[0] != '/' && glob_match(pattern.substr(1), path.substr(1));
    return pattern[0] == path[0] && glob_match(pattern.substr(1), path.substr(1));
}

inline std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty()) return name;
    if (dir.back() == '/') return dir + name;
    return dir + "/" + name;
}

class VirtualFs {
  public:
    /// Adds a real (non-decoy) asset. Paths are canonicalized.
    void add_file(std::string_view path, std::string content) {
        files_[canonicalize_resource(path)] = FsNode{std::move(content), false, std::nullopt, {}};
    }

    const std::map<std::string, FsNode>& files() const { return files_; }
    const std::map<std::string, HookRule>& hooks() const { return hooks_; }
    const std::map<std::int64_t, DecoyService>& services() const { return services_; }
    const std::set<std::string>& deployed() const { return deployed_; }
    const std::vector<FsEvent>& log() const { return log_; }

    const FsNode* find(const std::string& path) const {
        auto it = files_.find(path);
        return it == files_.end() ? nullptr : &it->second;
    }

    std::set<std::string> decoy_paths() const {
        std::set<std::string> out;
        for (const auto& [p, n] : files_)
            if (n.is_decoy) out.insert(p);
        return out;
    }

    /// Every marker placed by a deployment, on files, hooks, or services.
    std::set<std::string> deployed_markers() const {
        std::set<std::string> out;
        for (const auto& [p, n] : files_)
            if (n.decoy_marker) out.insert(*n.decoy_marker);
        for (const auto& [a, h] : hooks_) out.insert(h.marker);
        for (const auto& [port, s] : services_) out.insert(s.marker);
        return out;
    }

    bool operator==(const VirtualFs&) const = default;

  private:
    friend VirtualFs deploy_ploy(const VirtualFs& fs, const DeceptionPloy& ploy);
    friend class ScriptRunner;

    std::map<std::string, FsNode> files_;
    std::map<std::string, HookRule> hooks_;
    std::map<std::int64_t, DecoyService> services_;
    std::set<std::string> deployed_;
    std::vector<FsEvent> log_;
};

/// Places a ploy into a copy of `fs`. Re-deploying the same ploy_id is a
/// no-op. A decoy slot already held by another ploy stays with the first.
inline VirtualFs deploy_ploy(const VirtualFs& fs, const DeceptionPloy& ploy) {
    auto fb = validate_ploy(ploy);
    if (!fb.ok()) throw ValidationError("cannot deploy an invalid ploy", std::move(fb));
    if (fs.deployed_.count(ploy.ploy_id)) return fs;

    VirtualFs out = fs;
    auto marker = decoy_marker_for(ploy.ploy_id);
    auto place_file = [&](const std::string& path, std::string content, const char* op) {
        auto it = out.files_.find(path);
        if (it != out.files_.end()) {
            if (!it->second.is_decoy)
                throw ConflictError("path conflict: real file already exists at '" + path + "'");
            out.log_.push_back({-1, op, path, "slot_taken"});
            return;
        }
        out.files_[path] = FsNode{std::move(content), true, marker, ploy.ploy_id};
        out.log_.push_back({-1, op, path, "placed"});
    };

    std::visit(
        [&](const auto& a) {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, HoneyfileArtifact>) {
                auto path = canonicalize_resource(join_path(a.target_directory, a.filename));
                place_file(path, a.content + "\n" + marker, "deploy_honeyfile");
            } else if constexpr (std::is_same_v<A, HoneytokenArtifact>) {
                place_file(canonicalize_resource(a.placement), a.token_type + ": " + a.value + "\n" + marker,
                           "deploy_honeytoken");
            } else if constexpr (std::is_same_v<A, ApiHookArtifact>) {
                auto api = canonicalize_resource(a.api_name);
                if (out.hooks_.count(api)) {
                    out.log_.push_back({-1, "deploy_api_hook", api, "slot_taken"});
                } else {
                    out.hooks_[api] =
                        HookRule{api, ploy.ploy_id, marker, a.fake_response_description + "\n" + marker};
                    out.log_.push_back({-1, "deploy_api_hook", api, "registered"});
                }
            } else if constexpr (std::is_same_v<A, DecoyServiceArtifact>) {
                if (out.services_.count(a.port)) {
                    out.log_.push_back({-1, "deploy_decoy_service", std::to_string(a.port), "slot_taken"});
                } else {
                    out.services_[a.port] = DecoyService{a.service_name, a.port, ploy.ploy_id, marker};
                    out.log_.push_back({-1, "deploy_decoy_service", std::to_string(a.port), "listening"});
                }
            } else {
                out.log_.push_back({-1, "deploy_other", ploy.objective.target_resource, "recorded"});
            }
        },
        ploy.artifact);
    out.deployed_.insert(ploy.ploy_id);
    return out;
}

// ---------------------------------------------------------------------------
// Scripts
// ---------------------------------------------------------------------------

struct ListDir {
    std::string path;
    bool operator==(const ListDir&) const = default;
};
/// Plain read; equivalent to HookedCall("readfile", path).
struct ReadFile {
    std::string path;
    bool operator==(const ReadFile&) const = default;
};
struct Encrypt {
    std::string glob;
    bool operator==(const Encrypt&) const = default;
};
struct Exfiltrate {
    std::string buffer_ref;
    bool operator==(const Exfiltrate&) const = default;
};
struct HookedCall {
    std::string api_name;
    std::string path;
    bool operator==(const HookedCall&) const = default;
};

using Step = std::variant<ListDir, ReadFile, Encrypt, Exfiltrate, HookedCall>;

struct MalwareScript {
    std::string script_id;
    MalwareFamily family;
    std::vector<Step> steps;
    bool operator==(const MalwareScript&) const = default;
};

struct SimTrace {
    std::string script_id;
    std::vector<FsEvent> events;
    std::set<std::string> touched_decoys;
    std::set<std::string> exfiltrated_markers;
    std::set<std::string> encrypted;
    std::optional<std::int64_t> first_decoy_step;
    std::optional<std::int64_t> first_real_asset_step;

    bool engaged() const { return !touched_decoys.empty() || !exfiltrated_markers.empty(); }

    /// Decoy reached strictly before any real asset, or a marker left the host.
    bool misled() const {
        if (!exfiltrated_markers.empty()) return true;
        if (!first_decoy_step) return false;
        return !first_real_asset_step || *first_decoy_step < *first_real_asset_step;
    }

    bool operator==(const SimTrace&) const = default;
};

class ScriptRunner {
  public:
    ScriptRunner(const VirtualFs& fs, const MalwareScript& script) : fs_(fs), script_(script) {
        trace_.script_id = script.script_id;
    }

    SimTrace run() {
        for (std::size_t i = 0; i < script_.steps.size(); ++i) {
            step_ = static_cast<std::int64_t>(i);
            std::visit([this](const auto& s) { apply(s); }, script_.steps[i]);
        }
        fs_.log_.insert(fs_.log_.end(), trace_.events.begin(), trace_.events.end());
        return std::move(trace_);
    }

  private:
    void record(std::string op, std::string target, std::string outcome) {
        trace_.events.push_back({step_, std::move(op), std::move(target), std::move(outcome)});
    }

    void touch_decoy(const std::string& path, const FsNode& node) {
        trace_.touched_decoys.insert(path);
        if (node.decoy_marker) read_markers_.insert(*node.decoy_marker);
        if (!trace_.first_decoy_step) trace_.first_decoy_step = step_;
    }

    void touch_real() {
        if (!trace_.first_real_asset_step) trace_.first_real_asset_step = step_;
    }

    void apply(const ListDir& s) {
        auto dir = canonicalize_resource(s.path);
        std::size_t count = 0;
        for (const auto& [p, n] : fs_.files_)
            if (p.size() > dir.size() && p.compare(0, dir.size(), dir) == 0 && p[dir.size()] == '/') ++count;
        record("list_dir", dir, count ? "entries=" + std::to_string(count) : std::string("not_found"));
    }

    void apply(const ReadFile& s) { call("readfile", canonicalize_resource(s.path), "read_file"); }

    void apply(const HookedCall& s) {
        call(canonicalize_resource(s.api_name), canonicalize_resource(s.path), "hooked_call:" + canonicalize_resource(s.api_name));
    }

    void call(const std::string& api, const std::string& path, const std::string& op) {
        auto hook = fs_.hooks_.find(api);
        auto file = fs_.files_.find(path);
        if (hook != fs_.hooks_.end()) {
            read_markers_.insert(hook->second.marker);
            if (file != fs_.files_.end() && file->second.is_decoy) trace_.touched_decoys.insert(path);
            if (!trace_.first_decoy_step) trace_.first_decoy_step = step_;
            record(op, path, "intercepted");
            return;
        }
        if (file == fs_.files_.end()) {
            record(op, path, "not_found");
            return;
        }
        if (file->second.is_decoy) {
            touch_decoy(path, file->second);
            record(op, path, "decoy");
        } else {
            touch_real();
            record(op, path, "real");
        }
    }

    void apply(const Encrypt& s) {
        auto pattern = canonicalize_resource(s.glob);
        std::size_t hits = 0;
        for (auto& [p, n] : fs_.files_) {
            if (!glob_match(pattern, p)) continue;
            ++hits;
            trace_.encrypted.insert(p);
            if (n.is_decoy) {
                touch_decoy(p, n);
                record("encrypt", p, "decoy");
            } else {
                touch_real();
                record("encrypt", p, "real");
            }
        }
        if (!hits) record("encrypt", pattern, "not_found");
    }

    void apply(const Exfiltrate& s) {
        trace_.exfiltrated_markers.insert(read_markers_.begin(), read_markers_.end());
        record("exfiltrate", s.buffer_ref, "markers=" + std::to_string(read_markers_.size()));
    }

    VirtualFs fs_;
    const MalwareScript& script_;
    SimTrace trace_;
    std::set<std::string> read_markers_;
    std::int64_t step_ = 0;
};

/// Runs a script against its own copy of `fs`.
inline SimTrace run_script(const VirtualFs& fs, const MalwareScript& script) {
    return ScriptRunner(fs, script).run();
}

inline double score_engagement(const std::vector<SimTrace>& traces) {
    if (traces.empty()) throw Error("no traces to score");
    std::size_t engaged = 0;
    for (const auto& t : traces) engaged += t.engaged() ? 1 : 0;
    return static_cast<double>(engaged) / static_cast<double>(traces.size());
}

/// Fraction of engaged traces where the deception misled the script.
inline double score_accuracy(const std::vector<SimTrace>& traces) {
    std::size_t engaged = 0, misled = 0;
    for (const auto& t : traces) {
        if (!t.engaged()) continue;
        ++engaged;
        misled += t.misled() ? 1 : 0;
    }
    if (engaged == 0) throw Error("no engaged traces; accuracy is undefined");
    return static_cast<double>(misled) / static_cast<double>(engaged);
}

// ---------------------------------------------------------------------------
// Scenarios and serialization
// ---------------------------------------------------------------------------

struct BaseFile {
    std::string path;
    std::string content;
    bool operator==(const BaseFile&) const = default;
};

struct Scenario {
    std::string scenario_id;
    std::vector<BaseFile> base_files;
    std::vector<MalwareScript> scripts;
    bool operator==(const Scenario&) const = default;
};

inline VirtualFs base_fs(const Scenario& scenario) {
    VirtualFs fs;
    for (const auto& f : scenario.base_files) fs.add_file(f.path, f.content);
    return fs;
}

inline VirtualFs deploy_all(VirtualFs fs, const std::vector<DeceptionPloy>& ploys) {
    for (const auto& p : ploys) fs = deploy_ploy(fs, p);
    return fs;
}

/// Deploys the ploys once, then runs every script on its own copy.
inline std::vector<SimTrace> simulate(const Scenario& scenario, const std::vector<DeceptionPloy>& ploys) {
    auto fs = deploy_all(base_fs(scenario), ploys);
    std::vector<SimTrace> traces;
    traces.reserve(scenario.scripts.size());
    for (const auto& s : scenario.scripts) traces.push_back(run_script(fs, s));
    return traces;
}

inline json to_json(const Step& step) {
    return std::visit(
        [](const auto& s) -> json {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, ListDir>)
                return {{"op", "list_dir"}, {"path", s.path}};
            else if constexpr (std::is_same_v<S, ReadFile>)
                return {{"op", "read_file"}, {"path", s.path}};
            else if constexpr (std::is_same_v<S, Encrypt>)
                return {{"op", "encrypt"}, {"glob", s.glob}};
            else if constexpr (std::is_same_v<S, Exfiltrate>)
                return {{"op", "exfiltrate"}, {"buffer_ref", s.buffer_ref}};
            else
                return {{"op", "hooked_call"}, {"api_name", s.api_name}, {"path", s.path}};
        },
        step);
}

inline Step decode_step(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    Step step = ListDir{};
    auto op = r.string("op");
    if (op == "list_dir")
        step = ListDir{r.string("path")};
    else if (op == "read_file")
        step = ReadFile{r.string("path")};
    else if (op == "encrypt")
        step = Encrypt{r.string("glob")};
    else if (op == "exfiltrate")
        step = Exfiltrate{r.string("buffer_ref")};
    else if (op == "hooked_call") {
        auto api = r.string("api_name");
        step = HookedCall{api, r.string("path")};
    } else if (!op.empty())
        fb.add(ViolationCode::bad_kind, r.path_of("op"), "unknown step op '" + op + "'");
    r.finish();
    return step;
}

inline json to_json(const MalwareScript& s) {
    json steps = json::array();
    for (const auto& st : s.steps) steps.push_back(to_json(st));
    return {{"script_id", s.script_id}, {"family", s.family.name()}, {"steps", steps}};
}

inline MalwareScript decode_script(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    MalwareScript s;
    s.script_id = r.string("script_id");
    s.family = MalwareFamily::from_name(r.string("family"));
    s.steps = r.array<Step>("steps", decode_step);
    if (r.valid() && r.has("steps") && s.steps.empty())
        fb.add(ViolationCode::missing_field, r.path_of("steps"), "a script needs at least one step");
    r.finish();
    return s;
}

inline json to_json(const Scenario& sc) {
    json files = json::array();
    for (const auto& f : sc.base_files) files.push_back({{"path", f.path}, {"content", f.content}});
    json scripts = json::array();
    for (const auto& s : sc.scripts) scripts.push_back(to_json(s));
    return {{"scenario_id", sc.scenario_id}, {"base_files", files}, {"scripts", scripts}};
}

inline BaseFile decode_base_file(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    BaseFile f;
    f.path = r.string("path");
    f.content = r.string("content", true, true);
    r.finish();
    return f;
}

inline Scenario decode_scenario(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    Scenario sc;
    sc.scenario_id = r.string("scenario_id");
    sc.base_files = r.array<BaseFile>("base_files", decode_base_file, false);
    sc.scripts = r.array<MalwareScript>("scripts", decode_script);
    r.finish();
    return sc;
}

inline json to_json(const FsEvent& e) {
    return {{"step", e.step}, {"op", e.op}, {"target", e.target}, {"outcome", e.outcome}};
}

inline json to_json(const SimTrace& t) {
    json events = json::array();
    for (const auto& e : t.events) events.push_back(to_json(e));
    return {{"script_id", t.script_id},
            {"events", events},
            {"touched_decoys", t.touched_decoys},
            {"exfiltrated_markers", t.exfiltrated_markers},
            {"encrypted", t.encrypted},
            {"first_decoy_step", t.first_decoy_step ? json(*t.first_decoy_step) : json(nullptr)},
            {"first_real_asset_step", t.first_real_asset_step ? json(*t.first_real_asset_step) : json(nullptr)}};
}

/// One trace per line.
inline std::string traces_to_jsonl(const std::vector<SimTrace>& traces) {
    std::string out;
    for (const auto& t : traces) {
        out += to_json(t).dump();
        out += '\n';
    }
    return out;
}

} // namespace spade::sim

namespace spade {

template <>
inline sim::Scenario from_json<sim::Scenario>(const json& j) {
    return decode_strict(j, sim::decode_scenario);
}

template <>
inline sim::MalwareScript from_json<sim::MalwareScript>(const json& j) {
    return decode_strict(j, sim::decode_script);
}

} // namespace spade
