#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <regex>

#include "support/test_util.hpp"

using namespace spade;
using namespace spade::testing;

namespace {

using Steady = std::chrono::steady_clock;

struct Check {
    bool ok = true;
    std::string why;
    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            why = what;
        }
    }
};

double seconds_since(Steady::time_point t) { return std::chrono::duration<double>(Steady::now() - t).count(); }

/// Any outbound request is a failure.
class NoNetwork : public Transport {
  public:
    HttpResponse post(const HttpRequest& r) override { throw TransportError(false, "network used: " + r.url); }
};

Check bleu_oracle() {
    Check c;
    auto start = Steady::now();
    auto pairs = fixture_json("bleu_pairs.json");
    c.require(pairs.size() == 20, "expected 20 oracle pairs");
    for (const auto& p : pairs) {
        auto got = bleu(p.at("candidate").get<std::vector<std::string>>(), p.at("reference").get<std::vector<std::string>>());
        c.require(std::abs(got - p.at("bleu").get<double>()) <= 1e-6, "pair " + p.at("name").get<std::string>());
    }
    std::vector<std::string> a{"hook", "readfile", "to", "counter", "t1555.003"};
    c.require(bleu(a, a) == 1.0, "identity pair is not 1.0");
    c.require(bleu({"alpha", "beta"}, {"gamma", "delta"}) == 0.0, "disjoint pair is not 0.0");
    c.require(seconds_since(start) < 1.0, "slower than 1 s");
    return c;
}

Check metric_fixture() {
    Check c;
    auto start = Steady::now();
    auto corpus = load_corpus(fixture("corpus.jsonl"));
    c.require(corpus.size() == 31, "corpus is not 31 entries");
    auto m = match_ploys(fixture_ploys("ploys_28.json"), corpus);
    c.require(m.true_positives == 28 && compute_recall(m) == 28.0 / 31.0, "recall is not 28/31");

    std::mt19937 rng(7);
    const std::vector<std::string> techniques{"T1486", "T1555.003", "t1056.001"};
    const std::vector<std::string> dirs{"~/Documents", "C:\\Users\\a\\Documents", "/home/b/documents/", "~/desktop"};
    const std::vector<std::string> apis{"ReadFile", "readfile", "CryptEncrypt"};
    auto pick = [&](const auto& v) { return v[rng() % v.size()]; };
    for (int i = 0; i < 1000 && c.ok; ++i) {
        std::vector<GroundTruthEntry> gt;
        for (std::size_t k = 0, n = 1 + rng() % 8; k < n; ++k) {
            GroundTruthEntry e;
            e.entry_id = "e" + std::to_string(k);
            e.reference_text = "ref";
            e.objective = rng() % 2 ? PloyObjective{PloyKindTag::honeyfile, pick(techniques), pick(dirs), PloyAction::place_decoy}
                                    : PloyObjective{PloyKindTag::api_hook, pick(techniques), pick(apis), PloyAction::intercept_api};
            gt.push_back(e);
        }
        std::vector<DeceptionPloy> gen;
        for (std::size_t k = 0, n = rng() % 10; k < n; ++k) {
            auto id = "g" + std::to_string(k);
            if (rng() % 2) {
                auto p = make_honeyfile(id, pick(techniques), pick(dirs), "f.txt");
                if (rng() % 3 == 0) std::get<HoneyfileArtifact>(p.artifact).target_directory = pick(dirs);
                gen.push_back(p);
            } else {
                auto p = make_api_hook(id, pick(techniques), pick(apis));
                if (rng() % 3 == 0) std::get<ApiHookArtifact>(p.artifact).api_name = pick(apis);
                gen.push_back(p);
            }
        }
        c.require(compute_exact_match(gen, gt) <= compute_recall(match_ploys(gen, gt)),
                  "EM exceeds recall in case " + std::to_string(i));
    }
    c.require(seconds_since(start) < 5.0, "slower than 5 s");
    return c;
}

Check pipeline_determinism() {
    Check c;
    auto start = Steady::now();
    static const std::regex ts(R"re("(at|created_at)": "[^"]*")re");
    auto profiles = fixture_profiles();
    auto req = fixture_request("credential_stealer");
    const std::vector<std::pair<std::string, std::int64_t>> suite{
        {"replay-valid", 1}, {"replay-refine", 2}, {"replay-exhaust", 2}};
    std::vector<RunRecord> finals;
    for (const auto& [profile, iterations] : suite) {
        std::vector<std::string> dumps;
        for (int rep = 0; rep < 3; ++rep) {
            Gateway gateway(std::make_shared<NoNetwork>());
            Orchestrator orch(gateway);
            auto run = orch.run_generation(req, find_profile(profiles, profile), {2, true}, "run-acc-" + profile);
            c.require(run.final_iteration() == iterations, profile + " iteration count");
            c.require(run.final_status != RunStatus::provider_failed, profile + " failed: " + run.error.value_or(""));
            dumps.push_back(std::regex_replace(to_json(run).dump(2), ts, "\"$1\": \"<ts>\""));
            if (rep == 0) finals.push_back(run);
        }
        c.require(dumps[0] == dumps[1] && dumps[1] == dumps[2], profile + " not byte-identical");
    }
    auto report = aggregate_report(finals, load_corpus(fixture("corpus.jsonl")));
    c.require(std::abs(report.iteration_avg - 5.0 / 3.0) < 1e-12, "iteration mean is not 1.67");
    c.require(render_report_table({report}).find("| 1.67 ") != std::string::npos, "table does not show 1.67");
    c.require(seconds_since(start) < 10.0, "slower than 10 s");
    return c;
}

Check simulator() {
    Check c;
    auto start = Steady::now();
    auto scenario = from_json<sim::Scenario>(fixture_json("sim/scenario_bundled.json"));
    auto ploys = fixture_ploys("sim/ploys_bundled.json");
    auto expected = fixture_json("sim/expected_bundled.json");
    c.require(scenario.scripts.size() == 15, "scenario is not 15 scripts");
    auto traces = sim::simulate(scenario, ploys);
    c.require(traces == sim::simulate(scenario, ploys), "repeated runs differ");
    for (std::size_t i = 0; i < traces.size() && i < expected.at("scripts").size(); ++i) {
        const auto& e = expected.at("scripts")[i];
        c.require(traces[i].engaged() == e.at("engaged").get<bool>() && traces[i].misled() == e.at("misled").get<bool>(),
                  "hand trace differs at " + traces[i].script_id);
    }
    c.require(sim::score_engagement(traces) == 11.0 / 15.0, "engagement is not 11/15");
    c.require(sim::score_accuracy(traces) == 9.0 / 11.0, "accuracy is not 9/11");
    c.require(sim::score_engagement(sim::simulate(scenario, {})) == 0.0, "empty deployment engages");

    auto engaged = [&](const std::vector<DeceptionPloy>& set) {
        std::size_t n = 0;
        for (const auto& t : sim::simulate(scenario, set)) n += t.engaged() ? 1 : 0;
        return n;
    };
    const std::size_t n = ploys.size();
    std::vector<std::size_t> by_mask(std::size_t{1} << n);
    for (std::size_t mask = 0; mask < by_mask.size(); ++mask) {
        std::vector<DeceptionPloy> subset;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) subset.push_back(ploys[i]);
        by_mask[mask] = engaged(subset);
    }
    for (std::size_t mask = 0; mask < by_mask.size(); ++mask)
        for (std::size_t i = 0; i < n; ++i)
            if (!(mask & (std::size_t{1} << i)))
                c.require(by_mask[mask | (std::size_t{1} << i)] >= by_mask[mask], "adding " + ploys[i].ploy_id + " lowers engagement");
    c.require(seconds_since(start) < 10.0, "slower than 10 s");
    return c;
}

Check prompt_golden() {
    Check c;
    auto req = fixture_request("credential_stealer");
    auto base = build_prompt_spec(req.context, req.goal, req.constraints, req.examples, req.output_format);
    c.require(render_prompt(base).text == read_text_file(fixture("golden/credential_stealer_prompt.txt")), "golden differs");

    const std::vector<std::pair<std::string, std::function<void(PromptSpec&)>>> drops{
        {"persona", [](PromptSpec& s) { s.persona.clear(); }},
        {"goal", [](PromptSpec& s) { s.goal.clear(); }},
        {"threat_context", [](PromptSpec& s) { s.threat_context.ttps.clear(); }},
        {"strategy_outline", [](PromptSpec& s) { s.strategy_outline.clear(); }},
        {"output_format", [](PromptSpec& s) { s.output_format.required_fields.clear(); }},
    };
    for (const auto& [name, drop] : drops) {
        auto spec = base;
        drop(spec);
        try {
            render_prompt(spec);
            c.require(false, "no error without " + name);
        } catch (const PromptError& e) {
            c.require(e.component() == name && std::string(e.what()).find(name) != std::string::npos, "error misnames " + name);
        }
    }

    std::mt19937 rng(99);
    auto text = [&] {
        static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _-.,:;()/\\";
        std::string s = "x";
        for (std::size_t i = 0, n = rng() % 20; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
        return s;
    };
    for (int i = 0; i < 200 && c.ok; ++i) {
        PromptSpec s;
        s.persona = text();
        s.goal = text();
        s.threat_context.context_id = "ctx-" + std::to_string(i);
        s.threat_context.malware_family = MalwareFamily(MalwareFamilyKind(rng() % 3));
        s.threat_context.narrative = text();
        TtpInsight t;
        t.technique_id = "T" + std::to_string(1000 + rng() % 9000);
        t.api_sequence = {text(), text()};
        t.behavior_label = text();
        s.threat_context.ttps.push_back(t);
        s.threat_context.targeted_resources = {text()};
        s.strategy_outline = {text(), text()};
        s.output_examples = {text()};
        s.output_format.format_name = text();
        s.output_format.required_fields = {text(), text()};
        s.output_format.extra_instructions = text();
        auto rendered = render_prompt(s).text;
        std::vector<std::string> fields{s.persona, s.goal, s.threat_context.context_id, s.threat_context.narrative,
                                        t.technique_id, t.behavior_label, s.output_format.format_name,
                                        s.output_format.extra_instructions};
        for (const auto* list : {&t.api_sequence, &s.threat_context.targeted_resources, &s.strategy_outline,
                                 &s.output_examples, &s.output_format.required_fields})
            fields.insert(fields.end(), list->begin(), list->end());
        for (const auto& f : fields) c.require(rendered.find(f) != std::string::npos, "field missing in case " + std::to_string(i));
    }
    return c;
}

Check report_columns() {
    Check c;
    Store store(fixture("runs"));
    auto corpus = load_corpus(fixture("corpus.jsonl"));
    std::vector<EvaluationReport> reports;
    for (const auto& group : group_by_model(store.load_all_runs())) reports.push_back(aggregate_report(group, corpus));
    auto table = render_report_table(reports);
    for (const auto* col : {"Recall (%)", "EM Score (%)", "BLEU Score (Avg)", "Engagement Rate (%)", "Accuracy (%)",
                            "Iteration Count (Avg)", "Response Time (s)"})
        c.require(table.find(col) != std::string::npos, std::string("missing column ") + col);
    return c;
}

Check store_round_trips() {
    Check c;
    TempDir tmp;
    Store store(tmp.path());
    std::mt19937_64 rng(5);
    auto text = [&] {
        static const std::vector<std::string> alphabet{"a", "Z", "0", " ", "\"", "\\", "\n", "{", "é", "✓"};
        std::string s;
        for (std::size_t i = 0, n = 1 + rng() % 16; i < n; ++i) s += alphabet[rng() % alphabet.size()];
        return s;
    };
    auto between = [&](std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(rng() % (hi - lo + 1)); };

    for (int i = 0; i < 500 && c.ok; ++i) {
        RunRecord r;
        r.run_id = "run-" + std::to_string(i);
        r.context_id = text();
        r.provider_name = text();
        r.model_id = text();
        r.created_at = "2026-01-01T00:00:00.000Z";
        for (std::int64_t it = 1, n = between(0, 3); it <= n; ++it) {
            IterationRecord rec;
            rec.iteration_index = it;
            auto prompt = text();
            rec.rendered_prompt_digest = sha256_hex(prompt);
            r.prompts[rec.rendered_prompt_digest] = prompt;
            rec.completion = {text(), between(0, 9999), r.provider_name, r.model_id, 1};
            for (std::int64_t k = 1, m = between(0, 2); k <= m; ++k) {
                auto p = make_honeyfile(r.run_id + "-i" + std::to_string(it) + "-p" + std::to_string(k), "T1486", "~/" + text(), text());
                p.description_text = text();
                p.provenance = {text(), text(), r.run_id, it};
                rec.ploys.push_back(p);
            }
            r.iterations.push_back(rec);
        }
        r.final_status = r.all_ploys().empty() ? RunStatus::exhausted : RunStatus::succeeded;
        store.save_run(r);
        c.require(store.load_run(r.run_id) == r, "run " + r.run_id + " differs after load");

        EvaluationReport rep;
        rep.model_id = text();
        rep.recall = static_cast<double>(between(0, 31)) / 31.0;
        rep.exact_match = rep.recall / 2;
        rep.bleu_avg = 0.1 * static_cast<double>(between(0, 10));
        rep.bleu_defined = between(0, 1);
        rep.iteration_avg = 1.5;
        rep.latency_avg_ms = static_cast<double>(between(0, 100000)) / 3.0;
        rep.run_count = between(1, 9);
        rep.corpus_size = 31;
        if (between(0, 1)) rep.engagement_rate = 11.0 / 15.0;
        auto rid = "report-" + std::to_string(i);
        store.save_report(rid, rep);
        c.require(store.load_report(rid) == rep, "report " + rid + " differs after load");

        ExpertScore s{"expert-" + std::to_string(i), "ploy-" + std::to_string(i), between(1, 5), between(1, 5),
                      between(1, 5), between(1, 5), std::nullopt};
        if (between(0, 1)) s.comment = text();
        store.save_expert_score(s);
        auto back = store.load_expert_scores(s.ploy_id);
        c.require(back.size() == 1 && back[0] == s, "score " + s.ploy_id + " differs after load");
    }

    struct Crash {};
    auto victim = store.load_run("run-1");
    victim.run_id = "run-crash";
    for (auto& it : victim.iterations)
        for (auto& p : it.ploys) p.provenance.run_id = "run-crash";
    for (const auto* stage : {"prompts_written", "completions_written", "run_json_written"}) {
        store.set_fault_hook([&](std::string_view s) {
            if (s == stage) throw Crash{};
        });
        try {
            store.save_run(victim);
            c.require(false, std::string("no crash at ") + stage);
        } catch (const Crash&) {
        }
        store.set_fault_hook({});
        c.require(!std::filesystem::exists(store.run_dir("run-crash")), std::string("partial run visible after ") + stage);
        c.require(!store.has_run("run-crash"), std::string("run listed after ") + stage);
    }
    return c;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
        {"BLEU oracle equivalence", bleu_oracle},
        {"Metric fixture reproduction", metric_fixture},
        {"Pipeline determinism", pipeline_determinism},
        {"Simulator determinism and scoring", simulator},
        {"Prompt golden tests", prompt_golden},
        {"Report columns for desk-scale regeneration", report_columns},
        {"Store round-trips", store_round_trips},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Check c;
        try {
            c = run();
        } catch (const std::exception& e) {
            c.require(false, std::string("threw: ") + e.what());
        }
        if (c.ok) {
            std::cout << "PASS " << name << "\n";
        } else {
            std::cout << "FAIL " << name << ": " << c.why << "\n";
            ++failed;
        }
    }
    return failed ? 1 : 0;
}
