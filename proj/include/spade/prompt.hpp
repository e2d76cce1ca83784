#pragma once

#include <array>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spade/digest.hpp"
#include "spade/domain.hpp"
#include "spade/error.hpp"

namespace spade {

struct OutputFormat {
    std::string format_name;
    std::vector<std::string> required_fields;
    std::string extra_instructions;

    bool operator==(const OutputFormat&) const = default;
};

/// The six prompt components plus the context they are rendered against.
struct PromptSpec {
    std::string persona;
    std::string goal;
    ThreatContext threat_context;
    std::vector<std::string> strategy_outline;
    std::vector<std::string> output_examples;
    OutputFormat output_format;

    bool operator==(const PromptSpec&) const = default;
};

inline constexpr std::array<std::string_view, 6> kSectionOrder{
    "Role", "Task", "Threat Context", "Strategy Outline", "Output Examples", "Output Format",
};

struct RenderedPrompt {
    std::string text;
    std::array<std::string_view, 6> section_order = kSectionOrder;
    std::string spec_digest;
    /// Six-section prompt this one derives from; equal to `text` for primary prompts.
    std::string base_text;

    bool operator==(const RenderedPrompt&) const = default;
};

/// Thrown when a spec is missing one of its mandatory components.
class PromptError : public Error {
  public:
    PromptError(std::string component, const std::string& what)
        : Error(what), component_(std::move(component)) {}
    const std::string& component() const noexcept { return component_; }

  private:
    std::string component_;
};

inline json to_json(const OutputFormat& f) {
    return {{"format_name", f.format_name},
            {"required_fields", f.required_fields},
            {"extra_instructions", f.extra_instructions}};
}

inline json to_json(const PromptSpec& s) {
    return {{"persona", s.persona},
            {"goal", s.goal},
            {"threat_context", to_json(s.threat_context)},
            {"strategy_outline", s.strategy_outline},
            {"output_examples", s.output_examples},
            {"output_format", to_json(s.output_format)}};
}

inline OutputFormat decode_output_format(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    OutputFormat f;
    f.format_name = r.string("format_name");
    f.required_fields = r.strings("required_fields");
    f.extra_instructions = r.string("extra_instructions", false);
    r.finish();
    return f;
}

inline PromptSpec decode_prompt_spec(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    PromptSpec s;
    s.persona = r.string("persona");
    s.goal = r.string("goal");
    if (const json* c = r.node("threat_context"))
        s.threat_context = decode_threat_context(*c, r.path_of("threat_context"), fb);
    else if (r.valid())
        r.missing("threat_context");
    s.strategy_outline = r.strings("strategy_outline");
    s.output_examples = r.strings("output_examples", false);
    if (const json* f = r.node("output_format"))
        s.output_format = decode_output_format(*f, r.path_of("output_format"), fb);
    else if (r.valid())
        r.missing("output_format");
    r.finish();
    return s;
}

template <>
inline PromptSpec from_json<PromptSpec>(const json& j) {
    return decode_strict(j, decode_prompt_spec);
}

/// Content hash of a spec; stable because object keys serialize sorted.
inline std::string prompt_spec_digest(const PromptSpec& spec) { return sha256_hex(to_json(spec).dump()); }

inline std::string family_phrase(const MalwareFamily& family) {
    if (auto k = family.known()) {
        switch (*k) {
        case MalwareFamilyKind::ransomware: return "ransomware";
        case MalwareFamilyKind::credential_stealer: return "credential-stealing malware";
        case MalwareFamilyKind::keylogger: return "keylogger malware";
        }
    }
    return family.name() + " malware";
}

inline std::string persona_for(const ThreatContext& ctx) {
    std::string persona = "Act as a cybersecurity expert tasked with generating a deception strategy for " +
                          family_phrase(ctx.malware_family);
    if (!ctx.sample_label.empty()) persona += " " + ctx.sample_label;
    persona += ".";
    return persona;
}

/// Output format matching the ploy documents the codec parses.
inline OutputFormat default_output_format() {
    return {"JSON",
            {"ploy_kind", "technique_id", "target_resource", "action"},
            "Emit one JSON object per deception ploy inside a ```json fenced block. ploy_kind is one of "
            "honeyfile, honeytoken, api_hook, decoy_service. action is one of place_decoy, intercept_api, "
            "redirect_to_honeypot, supply_fake_data. Add the fields of the chosen kind: honeyfile needs "
            "filename, content, target_directory; honeytoken needs token_type, value, placement; api_hook "
            "needs api_name, interception_behavior, fake_response_description; decoy_service needs "
            "service_name, port, banner. Add a one-sentence description."};
}

inline PromptSpec build_prompt_spec(const ThreatContext& ctx, std::string goal, std::vector<std::string> constraints,
                                    std::vector<std::string> examples, OutputFormat format) {
    auto fb = validate_threat_context(ctx);
    if (!fb.ok()) throw ValidationError("invalid threat context", std::move(fb));
    PromptSpec spec;
    spec.persona = persona_for(ctx);
    spec.goal = std::move(goal);
    spec.threat_context = ctx;
    spec.strategy_outline = std::move(constraints);
    spec.output_examples = std::move(examples);
    spec.output_format = std::move(format);
    return spec;
}

namespace detail {

inline void require_component(bool present, const char* component) {
    if (!present) throw PromptError(component, std::string("prompt component '") + component + "' is missing");
}

inline void render_threat_context(std::ostringstream& out, const ThreatContext& ctx) {
    out << "Context ID: " << ctx.context_id << "\n";
    out << "Malware family: " << ctx.malware_family.name() << "\n";
    if (!ctx.sample_label.empty()) out << "Sample: " << ctx.sample_label << "\n";
    if (!ctx.narrative.empty()) out << "Sandbox findings: " << ctx.narrative << "\n";
    out << "Observed TTPs:\n";
    for (const auto& t : ctx.ttps) {
        out << "- " << t.technique_id;
        if (!t.behavior_label.empty()) out << ": " << t.behavior_label;
        if (!t.api_sequence.empty()) {
            out << " (API sequence: ";
            for (std::size_t i = 0; i < t.api_sequence.size(); ++i) out << (i ? " -> " : "") << t.api_sequence[i];
            out << ")";
        }
        out << "\n";
    }
    if (!ctx.targeted_resources.empty()) {
        out << "Targeted resources:\n";
        for (const auto& r : ctx.targeted_resources) out << "- " << r << "\n";
    }
}

} // namespace detail

/// Renders the six sections in fixed order. The examples section is
/// omitted entirely when there are no examples.
inline RenderedPrompt render_prompt(const PromptSpec& spec) {
    detail::require_component(!detail::trim(spec.persona).empty(), "persona");
    detail::require_component(!detail::trim(spec.goal).empty(), "goal");
    detail::require_component(validate_threat_context(spec.threat_context).ok(), "threat_context");
    detail::require_component(!spec.strategy_outline.empty(), "strategy_outline");
    detail::require_component(
        !spec.output_format.format_name.empty() && !spec.output_format.required_fields.empty(), "output_format");

    std::ostringstream out;
    out << "## Role\n" << spec.persona << "\n\n";
    out << "## Task\n" << spec.goal << "\n\n";
    out << "## Threat Context\n";
    detail::render_threat_context(out, spec.threat_context);
    out << "\n## Strategy Outline\n";
    for (const auto& s : spec.strategy_outline) out << "- " << s << "\n";
    if (!spec.output_examples.empty()) {
        out << "\n## Output Examples\n";
        for (std::size_t i = 0; i < spec.output_examples.size(); ++i) {
            if (i) out << "\n";
            out << "Example " << (i + 1) << ":\n" << spec.output_examples[i] << "\n";
        }
    }
    const auto& fmt = spec.output_format;
    out << "\n## Output Format\n";
    out << "Format: " << fmt.format_name << "\n";
    out << "Required fields: ";
    for (std::size_t i = 0; i < fmt.required_fields.size(); ++i) out << (i ? ", " : "") << fmt.required_fields[i];
    out << "\n";
    if (!fmt.extra_instructions.empty()) out << fmt.extra_instructions << "\n";

    RenderedPrompt rp;
    rp.text = out.str();
    rp.spec_digest = prompt_spec_digest(spec);
    rp.base_text = rp.text;
    return rp;
}

inline RenderedPrompt build_refinement_prompt(const RenderedPrompt& prior, std::string_view raw_completion,
                                              const ValidationFeedback& feedback) {
    if (feedback.empty()) throw Error("refinement requested without any validation violations");

    std::ostringstream out;
    out << prior.base_text;
    out << "\n## Refinement\n";
    out << "Refines prompt " << prior.spec_digest << ".\n";
    out << "The previous output did not meet the required output format.\n";
    out << "\n### Previous Output\n";
    out << (raw_completion.empty() ? std::string_view("(empty)") : raw_completion) << "\n";
    out << "\n### Violations\n";
    for (const auto& v : feedback.violations)
        out << "- [" << to_string(v.code) << "] " << (v.path.empty() ? "$" : v.path) << ": " << v.message << "\n";
    out << "\n### Instruction\n";
    out << "Re-emit the deception ploys in the required output format described under \"## Output Format\", "
           "correcting every violation listed above.\n";

    RenderedPrompt rp;
    rp.text = out.str();
    rp.spec_digest = sha256_hex(rp.text);
    rp.base_text = prior.base_text;
    return rp;
}

inline RenderedPrompt build_deployment_guidance_prompt(const DeceptionPloy& ploy) {
    auto fb = validate_ploy(ploy);
    if (!fb.ok()) throw ValidationError("invalid ploy for deployment guidance", std::move(fb));

    const auto& o = ploy.objective;
    std::ostringstream out;
    out << "## Role\n"
        << "Act as a cybersecurity expert guiding a deception engineer through deploying one selected "
           "deception ploy.\n\n";
    out << "## Task\n"
        << "Provide step-by-step deployment instructions for the deception ploy below. The deployment must "
           "engage the malware without revealing the deception to the adversary.\n\n";
    out << "## Selected Ploy\n";
    out << "Kind: " << o.ploy_kind.name() << "\n";
    out << "Technique: " << o.technique_id << "\n";
    out << "Target resource: " << o.target_resource << "\n";
    out << "Action: " << to_string(o.action) << "\n";
    for (const auto& [k, v] : artifact_fields(ploy.artifact)) out << k << ": " << v << "\n";
    out << "Description: " << ploy.description_text << "\n\n";
    out << "## Output Format\n"
        << "Numbered steps in plain text, one action per step, ending with how to verify the deployment.\n";

    RenderedPrompt rp;
    rp.text = out.str();
    rp.spec_digest = sha256_hex(rp.text);
    rp.base_text = rp.text;
    return rp;
}

} // namespace spade
