#pragma once

#include <atomic>
#include <cctype>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spade/codec.hpp"
#include "spade/metrics.hpp"
#include "spade/prompt.hpp"
#include "spade/provider.hpp"
#include "spade/run_record.hpp"

namespace spade {

struct RunConfig {
    std::int64_t max_iterations = 5;
    /// When false the run makes a single attempt and never refines.
    bool require_valid_ploy = true;
    bool operator==(const RunConfig&) const = default;
};

inline json to_json(const RunConfig& c) {
    return {{"max_iterations", c.max_iterations}, {"require_valid_ploy", c.require_valid_ploy}};
}

inline RunConfig decode_run_config(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    RunConfig c;
    c.max_iterations = r.integer("max_iterations", false, c.max_iterations);
    c.require_valid_ploy = r.boolean("require_valid_ploy", false, c.require_valid_ploy);
    r.finish();
    if (c.max_iterations < 1)
        fb.add(ViolationCode::constraint_violation, r.path_of("max_iterations"), "max_iterations must be >= 1");
    return c;
}

/// Everything needed to build the first prompt of a run.
struct GenerationRequest {
    ThreatContext context;
    std::string goal;
    std::vector<std::string> constraints;
    std::vector<std::string> examples;
    OutputFormat output_format = default_output_format();
    bool operator==(const GenerationRequest&) const = default;
};

inline json to_json(const GenerationRequest& g) {
    return {{"threat_context", to_json(g.context)},
            {"goal", g.goal},
            {"constraints", g.constraints},
            {"examples", g.examples},
            {"output_format", to_json(g.output_format)}};
}

inline std::string default_goal(const ThreatContext& ctx) {
    return "Generate deception ploys that engage " + family_phrase(ctx.malware_family) +
           " by exploiting the observed behaviors below.";
}

/// Accepts either a full request document or a bare threat context.
inline GenerationRequest decode_generation_request(const json& j, const std::string& path, ValidationFeedback& fb) {
    GenerationRequest g;
    if (j.is_object() && !j.contains("threat_context")) {
        g.context = decode_threat_context(j, path, fb);
        g.goal = default_goal(g.context);
        g.constraints = {"Avoid high-resource solutions; prefer lightweight decoys."};
        return g;
    }
    FieldReader r(j, path, fb);
    if (const json* c = r.node("threat_context")) g.context = decode_threat_context(*c, r.path_of("threat_context"), fb);
    g.goal = r.string("goal", false);
    if (g.goal.empty()) g.goal = default_goal(g.context);
    g.constraints = r.strings("constraints", false);
    if (g.constraints.empty()) g.constraints = {"Avoid high-resource solutions; prefer lightweight decoys."};
    g.examples = r.strings("examples", false);
    if (const json* f = r.node("output_format")) g.output_format = decode_output_format(*f, r.path_of("output_format"), fb);
    r.finish();
    return g;
}

template <>
inline GenerationRequest from_json<GenerationRequest>(const json& j) {
    return decode_strict(j, decode_generation_request);
}

using EventSink = std::function<void(const ProgressEvent&)>;

/// "run-<yyyymmddhhmmss>-<8 hex>"; unique within the process.
inline std::string new_run_id(const std::string& context_id, const ProviderProfile& profile, const std::string& at) {
    static std::atomic<std::uint64_t> counter{0};
    auto n = counter.fetch_add(1);
    std::string stamp;
    for (char c : at)
        if (std::isdigit(static_cast<unsigned char>(c))) stamp.push_back(c);
    auto hash = sha256_hex(context_id + "|" + profile.name + "|" + profile.model_id + "|" + at + "|" +
                           std::to_string(n));
    return "run-" + stamp.substr(0, 14) + "-" + hash.substr(0, 8);
}

/// Drives one run from context to validated ploys, then the engineer's
/// selection and the follow-up deployment guidance.
class Orchestrator {
  public:
    explicit Orchestrator(Gateway& gateway, Clock clock = system_clock_source(), EventSink sink = {})
        : gateway_(gateway), clock_(std::move(clock)), sink_(std::move(sink)) {}

    RunRecord run_generation(const GenerationRequest& request, const ProviderProfile& profile, const RunConfig& cfg,
                             std::optional<std::string> run_id = std::nullopt) {
        if (cfg.max_iterations < 1) throw Error("max_iterations must be >= 1");
        auto pfb = validate_profile(profile);
        if (!pfb.ok()) throw ValidationError("invalid provider profile", std::move(pfb));
        auto spec = build_prompt_spec(request.context, request.goal, request.constraints, request.examples,
                                      request.output_format);
        auto prompt = render_prompt(spec);

        RunRecord run;
        run.created_at = now();
        run.run_id = run_id ? *run_id : new_run_id(request.context.context_id, profile, run.created_at);
        run.context_id = request.context.context_id;
        run.provider_name = profile.name;
        run.model_id = profile.model_id;
        emit(run, "run_started",
             {{"context_id", run.context_id}, {"provider_name", run.provider_name}, {"model_id", run.model_id}});

        const auto max_iter = cfg.require_valid_ploy ? cfg.max_iterations : 1;
        for (std::int64_t iteration = 1; iteration <= max_iter; ++iteration) {
            run.prompts[prompt.spec_digest] = prompt.text;
            CompletionResult completion;
            try {
                completion = gateway_.complete(profile, prompt);
            } catch (const Error& e) {
                run.final_status = RunStatus::provider_failed;
                run.error = e.what();
                break;
            }
            ParseContext pctx{profile.name, completion.model_id, run.run_id, iteration, 1};
            auto parsed = parse_completion(completion.text, pctx);

            IterationRecord record;
            record.iteration_index = iteration;
            record.rendered_prompt_digest = prompt.spec_digest;
            record.completion = std::move(completion);
            record.ploys = std::move(parsed.ploys);
            record.feedback = std::move(parsed.feedback);
            run.iterations.push_back(record);
            emit(run, "iteration_completed",
                 {{"iteration_index", iteration},
                  {"ploy_count", record.ploys.size()},
                  {"violation_count", record.feedback.violations.size()}});

            if (!record.ploys.empty()) {
                run.final_status = RunStatus::succeeded;
                break;
            }
            run.final_status = RunStatus::exhausted;
            if (iteration < max_iter) prompt = build_refinement_prompt(prompt, record.completion.text, record.feedback);
        }
        emit(run, "run_finished",
             {{"final_status", std::string(to_string(run.final_status))},
              {"iterations", run.iterations.size()}});
        return run;
    }

    RunRecord select_ploy(RunRecord run, const std::string& ploy_id, const std::string& engineer_id) {
        if (run.final_status != RunStatus::succeeded)
            throw ConflictError("run '" + run.run_id + "' did not succeed; nothing to select");
        const auto* ploy = run.find_ploy(ploy_id);
        if (!ploy) throw NotFoundError("ploy '" + ploy_id + "' is not part of run '" + run.run_id + "'");
        auto fb = validate_ploy(*ploy);
        if (!fb.ok()) throw ValidationError("ploy '" + ploy_id + "' is not valid", std::move(fb));
        if (run.selected_ploy_id == ploy_id) return run;
        run.selected_ploy_id = ploy_id;
        run.selections.push_back({engineer_id, ploy_id, now()});
        emit(run, "ploy_selected", {{"ploy_id", ploy_id}, {"engineer_id", engineer_id}});
        return run;
    }

    RunRecord request_deployment_guidance(RunRecord run, const ProviderProfile& profile) {
        if (!run.selected_ploy_id) throw ConflictError("run '" + run.run_id + "' has no selected ploy");
        const auto* ploy = run.find_ploy(*run.selected_ploy_id);
        if (!ploy) throw NotFoundError("selected ploy '" + *run.selected_ploy_id + "' is missing from the run");
        auto prompt = build_deployment_guidance_prompt(*ploy);
        auto completion = gateway_.complete(profile, prompt);
        run.prompts[prompt.spec_digest] = prompt.text;
        if (run.guidance) run.guidance_history.push_back(*run.guidance);
        run.guidance = Guidance{ploy->ploy_id, prompt.spec_digest, completion.text, now()};
        emit(run, "guidance_ready", {{"ploy_id", ploy->ploy_id}, {"prompt_digest", prompt.spec_digest}});
        return run;
    }

    EvaluationReport evaluate_runs(const std::vector<RunRecord>& runs, const std::vector<GroundTruthEntry>& corpus) const {
        return aggregate_report(runs, corpus);
    }

  private:
    std::string now() const { return format_timestamp(clock_()); }

    void emit(RunRecord& run, const std::string& type, json data) {
        ProgressEvent e;
        e.seq = static_cast<std::int64_t>(run.events.size()) + 1;
        e.type = type;
        e.run_id = run.run_id;
        e.at = now();
        e.data = std::move(data);
        run.events.push_back(e);
        if (sink_) sink_(e);
    }

    Gateway& gateway_;
    Clock clock_;
    EventSink sink_;
};

} // namespace spade
