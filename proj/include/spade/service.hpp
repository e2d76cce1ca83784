#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <sys/socket.h>

#include <httplib.h>

#include "spade/pipeline.hpp"
#include "spade/store.hpp"

namespace spade {

inline json run_summary(const RunRecord& r) {
    std::size_t ploys = 0;
    for (const auto& it : r.iterations) ploys += it.ploys.size();
    return {{"run_id", r.run_id},
            {"context_id", r.context_id},
            {"provider_name", r.provider_name},
            {"model_id", r.model_id},
            {"final_status", std::string(to_string(r.final_status))},
            {"created_at", r.created_at},
            {"iteration_count", r.iterations.size()},
            {"ploy_count", ploys},
            {"selected_ploy_id", r.selected_ploy_id ? json(*r.selected_ploy_id) : json(nullptr)}};
}

inline std::string sse_frame(const ProgressEvent& e) {
    return "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " + to_json(e).dump() + "\n\n";
}

/// HTTP front end over a Store. Runs and guidance requests execute on
/// background threads; everything durable goes through the store.
class Service {
  public:
    explicit Service(Store& store, std::shared_ptr<Gateway> gateway = std::make_shared<Gateway>(),
                     Clock clock = system_clock_source())
        : store_(store), gateway_(std::move(gateway)), clock_(std::move(clock)) {
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        routes();
    }

    ~Service() {
        stop();
        wait_idle();
    }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Returns false when the port cannot be bound.
    bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
    int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void wait_until_ready() const { server_.wait_until_ready(); }

    void stop() {
        {
            std::lock_guard lock(hub_mutex_);
            stopping_ = true;
        }
        hub_cv_.notify_all();
        server_.stop();
    }

    /// Blocks until every background run and guidance job has finished.
    void wait_idle() {
        std::vector<std::thread> jobs;
        {
            std::lock_guard lock(jobs_mutex_);
            jobs.swap(jobs_);
        }
        for (auto& t : jobs)
            if (t.joinable()) t.join();
    }

    httplib::Server& server() { return server_; }

  private:
    struct LiveRun {
        std::vector<ProgressEvent> events;
        bool done = false;
    };

    void routes() {
        server_.Post("/api/runs", [this](const auto& req, auto& res) { guard(res, [&] { start_run(req, res); }); });
        server_.Get("/api/runs", [this](const auto&, auto& res) { guard(res, [&] { list_runs(res); }); });
        server_.Get(R"(/api/runs/([^/]+)/events)",
                    [this](const auto& req, auto& res) { guard(res, [&] { stream_events(req, res); }); });
        server_.Get(R"(/api/runs/([^/]+))", [this](const auto& req, auto& res) {
            guard(res, [&] { get_run(req.matches[1].str(), res); });
        });
        server_.Post(R"(/api/ploys/([^/]+)/select)",
                     [this](const auto& req, auto& res) { guard(res, [&] { select(req, res); }); });
        server_.Post(R"(/api/ploys/([^/]+)/guidance)",
                     [this](const auto& req, auto& res) { guard(res, [&] { guidance(req, res); }); });
        server_.Post(R"(/api/ploys/([^/]+)/scores)",
                     [this](const auto& req, auto& res) { guard(res, [&] { score(req, res); }); });
        server_.Get(R"(/api/reports/([^/]+))", [this](const auto& req, auto& res) {
            guard(res, [&] { reply(res, 200, to_json(store_.load_report(req.matches[1].str()))); });
        });
        server_.Post("/api/eval", [this](const auto& req, auto& res) { guard(res, [&] { evaluate(req, res); }); });
    }

    template <typename F>
    static void guard(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const ValidationError& e) {
            reply(res, 422, {{"error", e.what()}, {"feedback", to_json(e.feedback())}});
        } catch (const NotFoundError& e) {
            reply(res, 404, {{"error", e.what()}});
        } catch (const ConflictError& e) {
            reply(res, 409, {{"error", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", e.what()}});
        }
    }

    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static json parse_body(const httplib::Request& req, bool allow_empty = false) {
        if (allow_empty && req.body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
        auto j = json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw ValidationError("request body must be a JSON object",
                                  {{{ViolationCode::malformed_document, "$", "expected a JSON object"}}});
        return j;
    }

    std::vector<ProviderProfile> providers() const {
        if (!fs::exists(store_.providers_path())) throw NotFoundError("no provider config in the store");
        return load_provider_config(store_.providers_path().string());
    }

    std::shared_ptr<std::mutex> run_lock(const std::string& run_id) {
        std::lock_guard lock(locks_mutex_);
        auto& m = run_locks_[run_id];
        if (!m) m = std::make_shared<std::mutex>();
        return m;
    }

    void spawn(std::function<void()> job) {
        std::lock_guard lock(jobs_mutex_);
        jobs_.emplace_back(std::move(job));
    }

    /// Finds the persisted run containing `ploy_id`.
    std::string run_for_ploy(const std::string& ploy_id) const {
        for (const auto& id : store_.list_runs())
            if (store_.load_run(id).find_ploy(ploy_id)) return id;
        throw NotFoundError("ploy '" + ploy_id + "' not found");
    }

    // POST /api/runs {context_id, provider, config}
    void start_run(const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        ValidationFeedback fb;
        FieldReader r(body, "", fb);
        auto context_id = r.string("context_id");
        auto provider = r.string("provider");
        RunConfig cfg;
        if (const json* c = r.node("config")) cfg = decode_run_config(*c, "config", fb);
        r.finish();
        if (!fb.ok()) throw ValidationError("invalid run request", std::move(fb));

        auto ctx_path = store_.context_path(context_id);
        if (context_id.find('/') != std::string::npos || !fs::exists(ctx_path))
            throw NotFoundError("context '" + context_id + "' not found");
        auto request = from_json<GenerationRequest>(read_json_file(ctx_path));
        auto profile = find_profile(providers(), provider);

        auto run_id = new_run_id(request.context.context_id, profile, format_timestamp(clock_()));
        auto live = std::make_shared<LiveRun>();
        {
            std::lock_guard lock(hub_mutex_);
            live_[run_id] = live;
        }
        spawn([this, request, profile, cfg, run_id, live] {
            std::vector<ProgressEvent> deferred;
            Orchestrator orch(*gateway_, clock_, [&](const ProgressEvent& e) {
                if (e.type == "run_finished") {
                    deferred.push_back(e);
                    return;
                }
                publish(*live, e);
            });
            try {
                auto run = orch.run_generation(request, profile, cfg, run_id);
                store_.save_run(run);
            } catch (const std::exception& e) {
                std::cerr << "run " << run_id << " failed: " << e.what() << "\n";
            }
            for (const auto& e : deferred) publish(*live, e);
            {
                std::lock_guard lock(hub_mutex_);
                live->done = true;
                live_.erase(run_id);
            }
            hub_cv_.notify_all();
        });
        reply(res, 202, {{"run_id", run_id}});
    }

    void publish(LiveRun& live, const ProgressEvent& e) {
        {
            std::lock_guard lock(hub_mutex_);
            live.events.push_back(e);
        }
        hub_cv_.notify_all();
    }

    void list_runs(httplib::Response& res) {
        json out = json::array();
        std::set<std::string> seen;
        for (const auto& id : store_.list_runs()) {
            out.push_back(run_summary(store_.load_run(id)));
            seen.insert(id);
        }
        std::lock_guard lock(hub_mutex_);
        for (const auto& [id, live] : live_)
            if (!seen.count(id)) out.push_back({{"run_id", id}, {"final_status", "running"}});
        reply(res, 200, out);
    }

    void get_run(const std::string& id, httplib::Response& res) {
        if (store_.has_run(id)) return reply(res, 200, to_json(store_.load_run(id)));
        {
            std::lock_guard lock(hub_mutex_);
            if (live_.count(id)) return reply(res, 200, {{"run_id", id}, {"final_status", "running"}});
        }
        throw NotFoundError("run '" + id + "' not found");
    }

    // Replays stored or buffered events, then follows a live run until it finishes.
    void stream_events(const httplib::Request& req, httplib::Response& res) {
        auto id = req.matches[1].str();
        std::int64_t after = 0;
        if (req.has_header("Last-Event-ID")) {
            try {
                after = std::stoll(req.get_header_value("Last-Event-ID"));
            } catch (const std::exception&) {
                after = 0;
            }
        }
        std::shared_ptr<LiveRun> live;
        {
            std::lock_guard lock(hub_mutex_);
            if (auto it = live_.find(id); it != live_.end()) live = it->second;
        }
        if (!live) {
            if (!store_.has_run(id)) throw NotFoundError("run '" + id + "' not found");
            auto events = store_.load_run(id).events;
            std::string payload;
            for (const auto& e : events)
                if (e.seq > after) payload += sse_frame(e);
            res.status = 200;
            res.set_header("Cache-Control", "no-cache");
            res.set_content(payload, "text/event-stream");
            return;
        }
        res.status = 200;
        res.set_header("Cache-Control", "no-cache");
        auto next = std::make_shared<std::size_t>(0);
        res.set_chunked_content_provider("text/event-stream", [this, live, next, after](std::size_t, httplib::DataSink& sink) {
            std::unique_lock lock(hub_mutex_);
            hub_cv_.wait_for(lock, std::chrono::milliseconds(250),
                             [&] { return stopping_ || live->done || *next < live->events.size(); });
            while (*next < live->events.size()) {
                const auto e = live->events[(*next)++];
                if (e.seq <= after) continue;
                auto frame = sse_frame(e);
                lock.unlock();
                if (!sink.write(frame.data(), frame.size())) return false;
                lock.lock();
            }
            if (live->done || stopping_) {
                lock.unlock();
                sink.done();
                return true;
            }
            return sink.is_writable();
        });
    }

    // POST /api/ploys/{id}/select {engineer_id}
    void select(const httplib::Request& req, httplib::Response& res) {
        auto ploy_id = req.matches[1].str();
        auto body = parse_body(req);
        ValidationFeedback fb;
        FieldReader r(body, "", fb);
        auto engineer = r.string("engineer_id");
        r.finish();
        if (!fb.ok()) throw ValidationError("invalid selection request", std::move(fb));
        auto run_id = run_for_ploy(ploy_id);
        auto m = run_lock(run_id);
        std::lock_guard lock(*m);
        Orchestrator orch(*gateway_, clock_);
        auto before = store_.load_run(run_id);
        auto after = orch.select_ploy(before, ploy_id, engineer);
        if (!(after == before)) store_.update_run(after);
        reply(res, 200, to_json(after));
    }

    // POST /api/ploys/{id}/guidance
    void guidance(const httplib::Request& req, httplib::Response& res) {
        auto ploy_id = req.matches[1].str();
        auto run_id = run_for_ploy(ploy_id);
        {
            auto m = run_lock(run_id);
            std::lock_guard lock(*m);
            auto run = store_.load_run(run_id);
            if (run.selected_ploy_id != ploy_id)
                throw ConflictError("ploy '" + ploy_id + "' is not the selected ploy of run '" + run_id + "'");
            find_profile(providers(), run.provider_name);
        }
        spawn([this, run_id] {
            auto m = run_lock(run_id);
            std::lock_guard lock(*m);
            try {
                auto run = store_.load_run(run_id);
                auto profile = find_profile(providers(), run.provider_name);
                Orchestrator orch(*gateway_, clock_);
                store_.update_run(orch.request_deployment_guidance(std::move(run), profile));
            } catch (const std::exception& e) {
                std::cerr << "guidance for run " << run_id << " failed: " << e.what() << "\n";
            }
        });
        reply(res, 202, {{"run_id", run_id}, {"ploy_id", ploy_id}});
    }

    // POST /api/ploys/{id}/scores {ExpertScore}
    void score(const httplib::Request& req, httplib::Response& res) {
        auto ploy_id = req.matches[1].str();
        auto body = parse_body(req);
        if (!body.contains("ploy_id")) body["ploy_id"] = ploy_id;
        if (body["ploy_id"] != ploy_id)
            throw ValidationError("ploy_id in the body does not match the path",
                                  {{{ViolationCode::constraint_violation, "ploy_id", "must equal '" + ploy_id + "'"}}});
        auto s = from_json<ExpertScore>(body);
        auto fb = validate_expert_score(s);
        if (!fb.ok()) throw ValidationError("invalid expert score", std::move(fb));
        run_for_ploy(ploy_id);
        store_.save_expert_score(s);
        reply(res, 201, to_json(s));
    }

    // POST /api/eval {run_ids, corpus_id}
    void evaluate(const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        ValidationFeedback fb;
        FieldReader r(body, "", fb);
        auto run_ids = r.strings("run_ids");
        auto corpus_id = r.string("corpus_id");
        r.finish();
        if (!fb.ok()) throw ValidationError("invalid eval request", std::move(fb));
        if (run_ids.empty())
            throw ValidationError("run_ids is empty", {{{ViolationCode::constraint_violation, "run_ids", "at least one run"}}});
        std::vector<RunRecord> runs;
        for (const auto& id : run_ids) runs.push_back(store_.load_run(id));
        if (corpus_id.find('/') != std::string::npos || !fs::exists(store_.corpus_path(corpus_id)))
            throw NotFoundError("corpus '" + corpus_id + "' not found");
        auto corpus = load_corpus(store_.corpus_path(corpus_id));
        if (group_by_model(runs).size() > 1)
            throw ValidationError("runs span several model ids",
                                  {{{ViolationCode::constraint_violation, "run_ids", "all runs must share one model_id"}}});
        auto report = aggregate_report(runs, corpus);
        auto sorted = run_ids;
        std::sort(sorted.begin(), sorted.end());
        std::string key = corpus_id;
        for (const auto& id : sorted) key += "|" + id;
        auto report_id = "report-" + sha256_hex(key).substr(0, 12);
        store_.save_report(report_id, report);
        reply(res, 201, {{"report_id", report_id}});
    }

    Store& store_;
    std::shared_ptr<Gateway> gateway_;
    Clock clock_;
    httplib::Server server_;

    std::mutex hub_mutex_;
    std::condition_variable hub_cv_;
    std::map<std::string, std::shared_ptr<LiveRun>> live_;
    bool stopping_ = false;

    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> run_locks_;

    std::mutex jobs_mutex_;
    std::vector<std::thread> jobs_;
};

} // namespace spade
