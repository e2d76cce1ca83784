#pragma once

#include <atomic>
#include <csignal>
#include <iostream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "spade/pipeline.hpp"
#include "spade/service.hpp"
#include "spade/sim.hpp"
#include "spade/store.hpp"

namespace spade::cli {

struct Globals {
    bool json_output = false;
    bool no_timestamps = false;
};

/// Fixed epoch clock used under --no-timestamps.
inline Clock frozen_clock() {
    return [] { return std::chrono::system_clock::time_point{}; };
}

inline Clock clock_for(const Globals& g) { return g.no_timestamps ? frozen_clock() : system_clock_source(); }

/// Loads every run under `dir`, which may be a store root or its runs/ directory.
inline std::vector<RunRecord> load_runs_dir(fs::path dir) {
    if (!fs::is_directory(dir)) throw IoError("runs directory '" + dir.string() + "' does not exist");
    if (fs::is_directory(dir / "runs")) dir /= "runs";
    std::vector<std::pair<std::string, RunRecord>> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
        auto name = entry.path().filename().string();
        if (!entry.is_directory() || name.empty() || name[0] == '.') continue;
        if (!fs::exists(entry.path() / "run.json")) continue;
        auto run = from_json<RunRecord>(read_json_file(entry.path() / "run.json"));
        found.emplace_back(run.created_at + "|" + run.run_id, std::move(run));
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<RunRecord> out;
    for (auto& [key, run] : found) out.push_back(std::move(run));
    return out;
}

/// A ploy list file: a JSON array of ploys, {"ploys": [...]}, or a run.json.
inline std::vector<DeceptionPloy> load_ploys_file(const fs::path& path) {
    auto j = read_json_file(path);
    if (j.is_object() && j.contains("iterations")) return from_json<RunRecord>(j).all_ploys();
    const json& list = j.is_object() && j.contains("ploys") ? j["ploys"] : j;
    if (!list.is_array())
        throw ValidationError("'" + path.string() + "' holds no ploy list",
                              {{{ViolationCode::malformed_document, "$", "expected a list of ploys"}}});
    ValidationFeedback fb;
    std::vector<DeceptionPloy> out;
    for (std::size_t i = 0; i < list.size(); ++i) out.push_back(decode_ploy(list[i], detail::index_path("ploys", i), fb));
    if (!fb.ok()) throw ValidationError("invalid ploys in '" + path.string() + "'", std::move(fb));
    return out;
}

struct SimSummary {
    std::size_t scripts = 0;
    std::size_t engaged = 0;
    std::size_t misled = 0;
    double engagement = 0.0;
    std::optional<double> accuracy;
};

inline SimSummary summarize(const std::vector<sim::SimTrace>& traces) {
    SimSummary s;
    s.scripts = traces.size();
    for (const auto& t : traces) {
        s.engaged += t.engaged() ? 1 : 0;
        s.misled += t.engaged() && t.misled() ? 1 : 0;
    }
    s.engagement = traces.empty() ? 0.0 : sim::score_engagement(traces);
    if (s.engaged) s.accuracy = sim::score_accuracy(traces);
    return s;
}

inline std::string fmt3(double v) { return detail::fixed(v, 3); }

// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::vector<std::string> contexts;
    std::string provider;
    std::string config;
    std::string out;
    std::int64_t max_iterations = 5;
    int parallel = 1;
};

inline int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<ProviderProfile> profiles;
    ProviderProfile profile;
    try {
        profiles = load_provider_config(a.config);
        profile = find_profile(profiles, a.provider);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    RunConfig cfg;
    cfg.max_iterations = a.max_iterations;
    Store store(a.out);
    Gateway gateway;

    struct Outcome {
        std::optional<RunRecord> run;
        std::string error;
    };
    std::vector<Outcome> outcomes(a.contexts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < a.contexts.size(); i = next.fetch_add(1)) {
            try {
                auto request = from_json<GenerationRequest>(read_json_file(a.contexts[i]));
                Orchestrator orch(gateway, clock_for(g));
                auto run = orch.run_generation(request, profile, cfg);
                store.save_run(run);
                outcomes[i].run = std::move(run);
            } catch (const std::exception& e) {
                outcomes[i].error = a.contexts[i] + ": " + e.what();
            }
        }
    };
    auto n = std::max(1, std::min<int>(a.parallel, static_cast<int>(a.contexts.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int code = 0;
    json listing = json::array();
    for (const auto& o : outcomes) {
        if (!o.run) {
            err << "error: " << o.error << "\n";
            code = 1;
            continue;
        }
        const auto& run = *o.run;
        auto status = std::string(to_string(run.final_status));
        if (run.error) err << "error: run " << run.run_id << ": " << *run.error << "\n";
        if (g.json_output)
            listing.push_back({{"run_id", run.run_id},
                               {"final_status", status},
                               {"iterations", run.iterations.size()},
                               {"ploy_count", run.all_ploys().size()}});
        else
            out << run.run_id << " " << status << "\n";
        if (run.final_status == RunStatus::provider_failed) code = 1;
        else if (run.final_status == RunStatus::exhausted && code == 0) code = 2;
    }
    if (g.json_output) out << listing.dump(2) << "\n";
    return code;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string runs;
    std::string corpus;
    std::string out;
    std::string scenario;
};

inline int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
    try {
        auto runs = load_runs_dir(a.runs);
        if (runs.empty()) {
            err << "error: no runs found under '" << a.runs << "'\n";
            return 1;
        }
        auto corpus = load_corpus(a.corpus);
        std::optional<sim::Scenario> scenario;
        if (!a.scenario.empty()) scenario = from_json<sim::Scenario>(read_json_file(a.scenario));

        std::vector<EvaluationReport> reports;
        for (const auto& group : group_by_model(runs)) {
            auto report = aggregate_report(group, corpus);
            if (scenario) {
                std::vector<DeceptionPloy> ploys;
                for (const auto& r : group)
                    if (r.final_status == RunStatus::succeeded) {
                        auto p = r.all_ploys();
                        ploys.insert(ploys.end(), p.begin(), p.end());
                    }
                auto s = summarize(sim::simulate(*scenario, ploys));
                report.engagement_rate = s.engagement;
                report.accuracy = s.accuracy;
            }
            reports.push_back(std::move(report));
        }
        json doc = {{"reports", json::array()}};
        for (const auto& r : reports) doc["reports"].push_back(to_json(r));
        write_file_atomic(a.out, doc.dump(2) + "\n");
        if (g.json_output) out << doc.dump(2) << "\n";
        else out << render_report_table(reports);
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string scenario;
    std::string ploys;
    std::string root = ".";
    std::string out;
};

inline int cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    try {
        auto scenario = from_json<sim::Scenario>(read_json_file(a.scenario));
        std::vector<DeceptionPloy> ploys;
        std::string run_id;
        if (!a.ploys.empty()) {
            if (fs::is_regular_file(a.ploys)) {
                ploys = load_ploys_file(a.ploys);
            } else {
                Store store(a.root);
                auto run = store.load_run(a.ploys);
                run_id = run.run_id;
                ploys = run.all_ploys();
            }
        }
        auto traces = sim::simulate(scenario, ploys);
        auto s = summarize(traces);
        json summary = {{"scenario_id", scenario.scenario_id},
                        {"scripts", s.scripts},
                        {"ploys", ploys.size()},
                        {"engaged", s.engaged},
                        {"misled", s.misled},
                        {"engagement_rate", s.engagement},
                        {"accuracy", s.accuracy ? json(*s.accuracy) : json(nullptr)}};
        if (!a.out.empty()) {
            write_file_atomic(fs::path(a.out) / "traces.jsonl", sim::traces_to_jsonl(traces));
            write_file_atomic(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");
        }
        if (!run_id.empty()) Store(a.root).save_traces(run_id, scenario.scenario_id, traces);
        if (g.json_output) {
            out << summary.dump(2) << "\n";
            return 0;
        }
        for (const auto& t : traces)
            out << t.script_id << " " << (t.engaged() ? "engaged" : "ignored") << (t.engaged() && t.misled() ? " misled" : "")
                << "\n";
        out << "engagement: " << fmt3(s.engagement) << " (" << s.engaged << "/" << s.scripts << ")\n";
        out << "accuracy: " << (s.accuracy ? fmt3(*s.accuracy) : std::string("n/a"));
        if (s.accuracy) out << " (" << s.misled << "/" << s.engaged << ")";
        out << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------------------

inline std::atomic<bool>& interrupted() {
    static std::atomic<bool> flag{false};
    return flag;
}

struct ServeArgs {
    int port = 8080;
    std::string root = ".";
    std::string host = "127.0.0.1";
};

inline int cmd_serve(const Globals& g, const ServeArgs& a, std::ostream& out, std::ostream& err) {
    Store store(a.root);
    Service service(store, std::make_shared<Gateway>(), clock_for(g));
    if (!service.bind(a.host, a.port)) {
        err << "error: cannot listen on " << a.host << ":" << a.port << " (port unavailable)\n";
        return 1;
    }
    out << "listening on http://" << a.host << ":" << a.port << "\n" << std::flush;
    interrupted() = false;
    std::signal(SIGINT, [](int) { interrupted() = true; });
    std::signal(SIGTERM, [](int) { interrupted() = true; });
    std::atomic<bool> finished{false};
    std::thread watcher([&] {
        while (!finished && !interrupted()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        service.stop();
    });
    service.listen_after_bind();
    finished = true;
    watcher.join();
    return 0;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Deception ploy generation, evaluation and simulation"};
    app.require_subcommand(1);
    Globals g;
    app.add_flag("--json", g.json_output, "Machine-readable JSON output");
    app.add_flag("--no-timestamps", g.no_timestamps, "Freeze recorded timestamps for reproducible output");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate ploys for one or more threat contexts");
    generate->add_option("--context", gen.contexts, "Threat context or generation request file")->required()->check(CLI::ExistingFile);
    generate->add_option("--provider", gen.provider, "Provider profile name")->required();
    generate->add_option("--config", gen.config, "Provider config file")->required();
    generate->add_option("--out", gen.out, "Store root that receives the run")->required();
    generate->add_option("--max-iterations", gen.max_iterations, "Refinement bound")->check(CLI::PositiveNumber);
    generate->add_option("--parallel", gen.parallel, "Contexts generated concurrently")->check(CLI::PositiveNumber);

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Score runs against a ground-truth corpus");
    eval->add_option("--runs", ev.runs, "Store root or runs directory")->required();
    eval->add_option("--corpus", ev.corpus, "Ground-truth corpus (JSONL)")->required();
    eval->add_option("--out", ev.out, "Report file to write")->required();
    eval->add_option("--scenario", ev.scenario, "Scenario suite for engagement and accuracy");

    SimulateArgs sm;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario suite against deployed ploys");
    simulate->add_option("--scenario", sm.scenario, "Scenario suite file")->required();
    simulate->add_option("--ploys", sm.ploys, "Ploy list file or run id");
    simulate->add_option("--root", sm.root, "Store root used to resolve a run id");
    simulate->add_option("--out", sm.out, "Directory for traces and summary");

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "Start the HTTP service");
    serve->add_option("--port", sv.port, "Listening port")->check(CLI::Range(1, 65535));
    serve->add_option("--root", sv.root, "Store root");
    serve->add_option("--host", sv.host, "Listening address");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        auto code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    if (generate->parsed()) return cmd_generate(g, gen, out, err);
    if (eval->parsed()) return cmd_eval(g, ev, out, err);
    if (simulate->parsed()) return cmd_simulate(g, sm, out, err);
    if (serve->parsed()) return cmd_serve(g, sv, out, err);
    return 1;
}

} // namespace spade::cli
