#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spade/domain.hpp"
#include "spade/metrics.hpp"
#include "spade/run_record.hpp"
#include "spade/sim.hpp"

namespace spade {

namespace fs = std::filesystem;

inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline json read_json_file(const fs::path& path) {
    auto text = read_text_file(path);
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw ValidationError("'" + path.string() + "' is not valid JSON",
                              {{{ViolationCode::malformed_document, "$", "not valid JSON"}}});
    return j;
}

namespace detail {

inline std::string temp_suffix() {
    static std::atomic<std::uint64_t> counter{0};
    auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    return ".tmp-" + std::to_string(tid % 100000) + "-" + std::to_string(counter.fetch_add(1));
}

inline void write_plain(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

} // namespace detail

/// Writes to a sibling temp file, then renames over `path`.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
    fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += detail::temp_suffix();
    try {
        detail::write_plain(tmp, content);
        fs::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

/// Ground-truth corpus, one JSON object per line. Blank lines are skipped.
inline std::vector<GroundTruthEntry> load_corpus(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
    std::vector<GroundTruthEntry> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto where = path.string() + " line " + std::to_string(line_no);
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ValidationError("parse error at " + where,
                                  {{{ViolationCode::malformed_document, "line " + std::to_string(line_no), "not valid JSON"}}});
        GroundTruthEntry e;
        try {
            e = from_json<GroundTruthEntry>(j);
        } catch (const ValidationError& err) {
            throw ValidationError("invalid entry at " + where + ": " + err.what(), err.feedback());
        }
        if (!ids.insert(e.entry_id).second)
            throw ValidationError("duplicate entry_id '" + e.entry_id + "' at " + where,
                                  {{{ViolationCode::constraint_violation, "line " + std::to_string(line_no),
                                     "duplicate entry_id '" + e.entry_id + "'"}}});
        out.push_back(std::move(e));
    }
    return out;
}

/// Flat-file store rooted at one directory:
///
///   runs/<run_id>/run.json, prompts/<digest>.txt, completions/<n>.txt, traces/*.jsonl
///   reports/<report_id>.json and .txt
///   scores.jsonl
///   contexts/<context_id>.json, corpora/<corpus_id>.jsonl, providers.json
class Store {
  public:
    /// Called at named points of a write; throwing from it simulates a crash.
    using FaultHook = std::function<void(std::string_view stage)>;

    explicit Store(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }
    fs::path runs_dir() const { return root_ / "runs"; }
    fs::path run_dir(const std::string& id) const { return runs_dir() / id; }
    fs::path reports_dir() const { return root_ / "reports"; }
    fs::path scores_path() const { return root_ / "scores.jsonl"; }
    fs::path context_path(const std::string& id) const { return root_ / "contexts" / (id + ".json"); }
    fs::path corpus_path(const std::string& id) const { return root_ / "corpora" / (id + ".jsonl"); }
    fs::path providers_path() const { return root_ / "providers.json"; }

    void set_fault_hook(FaultHook hook) { fault_ = std::move(hook); }

    bool has_run(const std::string& id) const { return fs::exists(run_dir(id) / "run.json"); }

    /// Creates runs/<id>/ in full or not at all.
    fs::path save_run(const RunRecord& run) {
        check_id(run.run_id);
        auto final_dir = run_dir(run.run_id);
        if (fs::exists(final_dir)) throw ConflictError("run '" + run.run_id + "' already exists");
        fs::create_directories(runs_dir());
        auto staging = runs_dir() / ("." + run.run_id + detail::temp_suffix());
        try {
            fs::create_directories(staging / "prompts");
            fs::create_directories(staging / "completions");
            for (const auto& [digest, text] : run.prompts)
                detail::write_plain(staging / "prompts" / (digest + ".txt"), text);
            fault("prompts_written");
            for (const auto& it : run.iterations)
                detail::write_plain(staging / "completions" / (std::to_string(it.iteration_index) + ".txt"),
                                    it.completion.text);
            fault("completions_written");
            detail::write_plain(staging / "run.json", to_json(run).dump(2));
            fault("run_json_written");
            if (fs::exists(final_dir)) throw ConflictError("run '" + run.run_id + "' already exists");
            fs::rename(staging, final_dir);
        } catch (...) {
            std::error_code ec;
            fs::remove_all(staging, ec);
            throw;
        }
        return final_dir;
    }

    /// Rewrites an existing run (selection, guidance). run.json is replaced atomically.
    void update_run(const RunRecord& run) {
        check_id(run.run_id);
        auto dir = run_dir(run.run_id);
        if (!fs::exists(dir / "run.json")) throw NotFoundError("run '" + run.run_id + "' not found");
        for (const auto& [digest, text] : run.prompts) {
            auto p = dir / "prompts" / (digest + ".txt");
            if (!fs::exists(p)) write_file_atomic(p, text);
        }
        fault("update_prompts_written");
        auto tmp = dir / ("run.json" + detail::temp_suffix());
        try {
            detail::write_plain(tmp, to_json(run).dump(2));
            fault("update_run_json_staged");
            fs::rename(tmp, dir / "run.json");
        } catch (...) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw;
        }
    }

    RunRecord load_run(const std::string& id) const {
        check_id(id);
        auto dir = run_dir(id);
        if (!fs::exists(dir / "run.json")) throw NotFoundError("run '" + id + "' not found");
        auto run = from_json<RunRecord>(read_json_file(dir / "run.json"));
        if (fs::exists(dir / "prompts")) {
            for (const auto& entry : fs::directory_iterator(dir / "prompts")) {
                auto name = entry.path().filename().string();
                if (entry.path().extension() != ".txt" || name.find(".tmp-") != std::string::npos) continue;
                run.prompts[entry.path().stem().string()] = read_text_file(entry.path());
            }
        }
        return run;
    }

    /// Run ids ordered by created_at, ties broken by id.
    std::vector<std::string> list_runs() const {
        std::vector<std::pair<std::string, std::string>> found;
        if (!fs::exists(runs_dir())) return {};
        for (const auto& entry : fs::directory_iterator(runs_dir())) {
            if (!entry.is_directory()) continue;
            auto id = entry.path().filename().string();
            if (id.empty() || id[0] == '.') continue;
            auto file = entry.path() / "run.json";
            if (!fs::exists(file)) continue;
            auto j = read_json_file(file);
            found.emplace_back(j.value("created_at", std::string{}), id);
        }
        std::sort(found.begin(), found.end());
        std::vector<std::string> ids;
        for (auto& [at, id] : found) ids.push_back(std::move(id));
        return ids;
    }

    std::vector<RunRecord> load_all_runs() const {
        std::vector<RunRecord> out;
        for (const auto& id : list_runs()) out.push_back(load_run(id));
        return out;
    }

    fs::path save_traces(const std::string& run_id, const std::string& name, const std::vector<sim::SimTrace>& traces) {
        check_id(run_id);
        check_id(name);
        auto path = run_dir(run_id) / "traces" / (name + ".jsonl");
        write_file_atomic(path, sim::traces_to_jsonl(traces));
        return path;
    }

    fs::path save_report(const std::string& report_id, const EvaluationReport& report) {
        check_id(report_id);
        auto path = reports_dir() / (report_id + ".json");
        write_file_atomic(reports_dir() / (report_id + ".txt"), render_report_table({report}));
        write_file_atomic(path, to_json(report).dump(2));
        return path;
    }

    EvaluationReport load_report(const std::string& report_id) const {
        check_id(report_id);
        auto path = reports_dir() / (report_id + ".json");
        if (!fs::exists(path)) throw NotFoundError("report '" + report_id + "' not found");
        return from_json<EvaluationReport>(read_json_file(path));
    }

    /// Appends one record to scores.jsonl; records are never overwritten.
    void save_expert_score(const ExpertScore& score) {
        auto fb = validate_expert_score(score);
        if (!fb.ok()) throw ValidationError("invalid expert score", std::move(fb));
        std::lock_guard lock(scores_mutex_);
        fs::create_directories(root_);
        std::ofstream out(scores_path(), std::ios::binary | std::ios::app);
        if (!out) throw IoError("cannot append to '" + scores_path().string() + "'");
        out << to_json(score).dump() << '\n';
        out.flush();
        if (!out) throw IoError("short write to '" + scores_path().string() + "'");
    }

    /// All stored scores, optionally only those for one ploy.
    std::vector<ExpertScore> load_expert_scores(const std::optional<std::string>& ploy_id = std::nullopt) const {
        std::vector<ExpertScore> out;
        if (!fs::exists(scores_path())) return out;
        std::ifstream in(scores_path());
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto j = json::parse(line, nullptr, false);
            if (j.is_discarded()) continue; // a torn final line from an interrupted append
            auto s = from_json<ExpertScore>(j);
            if (!ploy_id || s.ploy_id == *ploy_id) out.push_back(std::move(s));
        }
        return out;
    }

  private:
    static void check_id(const std::string& id) {
        if (id.empty() || id == "." || id == ".." || id.find('/') != std::string::npos ||
            id.find('\\') != std::string::npos)
            throw ValidationError("invalid identifier '" + id + "'",
                                  {{{ViolationCode::constraint_violation, "id", "identifier must be a plain name"}}});
    }

    void fault(std::string_view stage) const {
        if (fault_) fault_(stage);
    }

    fs::path root_;
    FaultHook fault_;
    std::mutex scores_mutex_;
};

} // namespace spade
