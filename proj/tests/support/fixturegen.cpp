// Regenerates the replay cassettes, provider config, golden prompt and
// fixture runs under tests/fixtures from the authored completion texts.
//
//   spade_fixturegen <fixtures_dir>

#include <iostream>

#include "spade/spade.hpp"

using namespace spade;

namespace {

std::string completion(const fs::path& dir, const std::string& name) {
    return read_text_file(dir / "completions" / (name + ".txt"));
}

RenderedPrompt first_prompt(const GenerationRequest& req) {
    return render_prompt(build_prompt_spec(req.context, req.goal, req.constraints, req.examples, req.output_format));
}

RenderedPrompt refine(const RenderedPrompt& prior, const std::string& text) {
    auto parsed = parse_completion(text, {"fixture", "fixture", "run-fixture", 1, 1});
    return build_refinement_prompt(prior, text, parsed.feedback);
}

void add_guidance(Cassette& c, const std::string& text, const std::string& guidance, std::int64_t latency,
                  const std::string& model) {
    auto parsed = parse_completion(text, {"fixture", model, "run-fixture", 1, 1});
    for (const auto& p : parsed.ploys)
        c.put({build_deployment_guidance_prompt(p).spec_digest, guidance, latency, model});
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: spade_fixturegen <fixtures_dir>\n";
        return 1;
    }
    fs::path dir = argv[1];
    auto cs = from_json<GenerationRequest>(read_json_file(dir / "contexts" / "credential_stealer.json"));
    auto rw = from_json<GenerationRequest>(read_json_file(dir / "contexts" / "ransomware.json"));

    auto cs1 = first_prompt(cs);
    auto rw1 = first_prompt(rw);
    write_file_atomic(dir / "golden" / "credential_stealer_prompt.txt", cs1.text);

    const std::string gpt = "fixture-gpt";
    const std::string llama = "fixture-llama";
    auto guidance = completion(dir, "cs_guidance");

    Cassette valid;
    valid.put({cs1.spec_digest, completion(dir, "cs_valid"), 1840, gpt});
    add_guidance(valid, completion(dir, "cs_valid"), guidance, 2500, gpt);

    Cassette refine_c;
    auto malformed = completion(dir, "cs_malformed");
    refine_c.put({cs1.spec_digest, malformed, 2210, gpt});
    refine_c.put({refine(cs1, malformed).spec_digest, completion(dir, "cs_valid_refined"), 1630, gpt});
    add_guidance(refine_c, completion(dir, "cs_valid_refined"), guidance, 2400, gpt);

    Cassette exhaust;
    auto prose = completion(dir, "cs_prose_only");
    exhaust.put({cs1.spec_digest, prose, 1980, gpt});
    exhaust.put({refine(cs1, prose).spec_digest, completion(dir, "cs_broken_json"), 2050, gpt});

    Cassette alt;
    alt.put({rw1.spec_digest, completion(dir, "rw_valid"), 3120, llama});

    fs::create_directories(dir / "cassettes");
    valid.save((dir / "cassettes" / "valid_first.jsonl").string());
    refine_c.save((dir / "cassettes" / "malformed_then_valid.jsonl").string());
    exhaust.save((dir / "cassettes" / "doubly_malformed.jsonl").string());
    alt.save((dir / "cassettes" / "alt_model.jsonl").string());

    auto replay = [](std::string name, std::string model, std::string cassette) {
        ProviderProfile p;
        p.name = std::move(name);
        p.kind = ProviderKind::replay;
        p.model_id = std::move(model);
        p.cassette_path = "cassettes/" + cassette;
        return p;
    };
    std::vector<ProviderProfile> profiles{
        replay("replay-valid", gpt, "valid_first.jsonl"),
        replay("replay-refine", gpt, "malformed_then_valid.jsonl"),
        replay("replay-exhaust", gpt, "doubly_malformed.jsonl"),
        replay("replay-alt", llama, "alt_model.jsonl"),
    };
    ProviderProfile live;
    live.name = "openai-live";
    live.kind = ProviderKind::openai_compatible;
    live.endpoint_url = "https://api.openai.com/v1/chat/completions";
    live.model_id = "gpt-4o";
    live.auth_env_var = "OPENAI_API_KEY";
    profiles.push_back(live);
    json config = json::array();
    for (const auto& p : profiles) config.push_back(to_json(p));
    write_file_atomic(dir / "providers.json", config.dump(2) + "\n");

    // Fixture runs for evaluation goldens, produced with a frozen clock.
    auto loaded = load_provider_config((dir / "providers.json").string());
    Gateway gateway;
    Orchestrator orch(gateway, [] { return std::chrono::system_clock::time_point{}; });
    auto runs_root = dir / "runs";
    fs::remove_all(runs_root);
    Store store(runs_root);
    store.save_run(orch.run_generation(cs, find_profile(loaded, "replay-valid"), {}, "run-fixture-valid"));
    store.save_run(orch.run_generation(cs, find_profile(loaded, "replay-refine"), {}, "run-fixture-refine"));
    store.save_run(orch.run_generation(cs, find_profile(loaded, "replay-exhaust"), {2, true}, "run-fixture-exhaust"));
    store.save_run(orch.run_generation(rw, find_profile(loaded, "replay-alt"), {}, "run-fixture-alt"));
    for (const auto& id : store.list_runs()) {
        auto run = store.load_run(id);
        std::cout << id << " " << to_string(run.final_status) << " iterations=" << run.iterations.size() << "\n";
    }
    return 0;
}
