#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "spade/error.hpp"
#include "spade/prompt.hpp"
#include "spade/run_record.hpp"

namespace spade {

enum class ProviderErrorKind { auth_missing, timeout_exhausted, transport, malformed_response, http_status, cassette_miss };

class ProviderError : public Error {
  public:
    ProviderError(ProviderErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    ProviderErrorKind kind() const noexcept { return kind_; }

  private:
    ProviderErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

struct HttpRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::int64_t timeout_ms = 60000;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Raised by transports; `timed_out` marks the retryable case.
class TransportError : public Error {
  public:
    TransportError(bool timed_out, const std::string& what) : Error(what), timed_out_(timed_out) {}
    bool timed_out() const noexcept { return timed_out_; }

  private:
    bool timed_out_;
};

class Transport {
  public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

class HttplibTransport final : public Transport {
  public:
    HttpResponse post(const HttpRequest& request) override {
        auto scheme_end = request.url.find("://");
        if (scheme_end == std::string::npos) throw TransportError(false, "endpoint url lacks a scheme: " + request.url);
        auto path_start = request.url.find('/', scheme_end + 3);
        std::string base = path_start == std::string::npos ? request.url : request.url.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

        httplib::Client client(base);
        auto secs = request.timeout_ms / 1000;
        auto usecs = (request.timeout_ms % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        for (const auto& [k, v] : request.headers) headers.emplace(k, v);
        auto res = client.Post(path, headers, request.body, "application/json");
        if (!res) {
            auto err = res.error();
            bool timed_out = err == httplib::Error::Read || err == httplib::Error::Write ||
                             err == httplib::Error::ConnectionTimeout;
            throw TransportError(timed_out, "request to " + base + " failed: " + httplib::to_string(err));
        }
        return {res->status, res->body};
    }
};

// ---------------------------------------------------------------------------
// Cassettes
// ---------------------------------------------------------------------------

struct CassetteEntry {
    std::string spec_digest;
    std::string text;
    std::int64_t latency_ms = 0;
    std::string model_id;
    bool operator==(const CassetteEntry&) const = default;
};

/// Recorded completions keyed by prompt digest. Later entries for the same
/// digest replace earlier ones.
class Cassette {
  public:
    static Cassette load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open cassette '" + path + "'");
        Cassette c;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto j = json::parse(line, nullptr, false);
            if (j.is_discarded()) j = json();
            ValidationFeedback fb;
            FieldReader r(j, "", fb);
            CassetteEntry e;
            e.spec_digest = r.string("spec_digest");
            e.text = r.string("text", true, true);
            e.latency_ms = r.integer("latency_ms");
            e.model_id = r.string("model_id", true, true);
            r.finish();
            if (!fb.ok())
                throw ValidationError("cassette '" + path + "' line " + std::to_string(line_no) + " is malformed",
                                      std::move(fb));
            c.put(std::move(e));
        }
        return c;
    }

    /// Returns true when the digest was already present.
    bool put(CassetteEntry e) {
        auto it = index_.find(e.spec_digest);
        if (it != index_.end()) {
            entries_[it->second] = std::move(e);
            return true;
        }
        index_.emplace(e.spec_digest, entries_.size());
        entries_.push_back(std::move(e));
        return false;
    }

    const CassetteEntry* find(const std::string& digest) const {
        auto it = index_.find(digest);
        return it == index_.end() ? nullptr : &entries_[it->second];
    }

    const std::vector<CassetteEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::string to_jsonl() const {
        std::string out;
        for (const auto& e : entries_) {
            json j = {{"spec_digest", e.spec_digest},
                      {"text", e.text},
                      {"latency_ms", e.latency_ms},
                      {"model_id", e.model_id}};
            out += j.dump();
            out += '\n';
        }
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write cassette '" + path + "'");
        out << to_jsonl();
    }

  private:
    std::vector<CassetteEntry> entries_;
    std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// Backoff before retry `attempt` (1-based): 500 ms doubling, capped at 8 s.
inline std::chrono::milliseconds backoff_delay(int attempt) {
    std::int64_t ms = 500;
    for (int i = 1; i < attempt && ms < 8000; ++i) ms *= 2;
    return std::chrono::milliseconds(std::min<std::int64_t>(ms, 8000));
}

inline bool is_retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

using Sleeper = std::function<void(std::chrono::milliseconds)>;
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
using WarningSink = std::function<void(const std::string&)>;

inline EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
}

namespace detail {

class Limiter {
  public:
    explicit Limiter(std::int64_t capacity) : capacity_(capacity) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_flight_ < capacity_; });
        ++in_flight_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            --in_flight_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::int64_t capacity_;
    std::int64_t in_flight_ = 0;
};

struct LimiterSlot {
    explicit LimiterSlot(Limiter& l) : limiter(l) { limiter.acquire(); }
    ~LimiterSlot() { limiter.release(); }
    LimiterSlot(const LimiterSlot&) = delete;
    LimiterSlot& operator=(const LimiterSlot&) = delete;
    Limiter& limiter;
};

inline std::string extract_text(ProviderKind kind, const json& body) {
    switch (kind) {
    case ProviderKind::openai_compatible: {
        const auto& choices = body.at("choices");
        const auto& content = choices.at(0).at("message").at("content");
        return content.get<std::string>();
    }
    case ProviderKind::gemini_style: {
        std::string text;
        for (const auto& part : body.at("candidates").at(0).at("content").at("parts")) text += part.at("text").get<std::string>();
        return text;
    }
    case ProviderKind::local_llama_style: return body.at("response").get<std::string>();
    case ProviderKind::replay: break;
    }
    throw Error("replay profiles have no response body");
}

} // namespace detail

/// Dispatches prompts to providers. Safe to share between threads.
class Gateway {
  public:
    explicit Gateway(std::shared_ptr<Transport> transport = std::make_shared<HttplibTransport>(),
                     Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); },
                     EnvLookup env = process_env())
        : transport_(std::move(transport)), sleeper_(std::move(sleeper)), env_(std::move(env)) {}

    CompletionResult complete(const ProviderProfile& profile, const RenderedPrompt& prompt) {
        auto fb = validate_profile(profile);
        if (!fb.ok()) throw ValidationError("invalid provider profile '" + profile.name + "'", std::move(fb));
        if (profile.kind == ProviderKind::replay) {
            auto cassette = cassette_for(profile.cassette_path);
            detail::LimiterSlot slot(limiter_for(profile));
            const auto* entry = cassette->find(prompt.spec_digest);
            if (!entry)
                throw ProviderError(ProviderErrorKind::cassette_miss,
                                    "cassette '" + profile.cassette_path + "' has no entry for digest " +
                                        prompt.spec_digest);
            return {entry->text, entry->latency_ms, profile.name, entry->model_id, 1};
        }
        auto request = build_request(profile, prompt);
        detail::LimiterSlot slot(limiter_for(profile));
        return send_with_retry(profile, request);
    }

    /// Replaces a cached cassette, e.g. after re-recording.
    void forget_cassette(const std::string& path) {
        std::lock_guard lock(mutex_);
        cassettes_.erase(path);
    }

  private:
    HttpRequest build_request(const ProviderProfile& profile, const RenderedPrompt& prompt) const {
        std::optional<std::string> credential;
        bool required = profile.kind != ProviderKind::local_llama_style || !profile.auth_env_var.empty();
        if (required) {
            if (profile.auth_env_var.empty())
                throw ProviderError(ProviderErrorKind::auth_missing,
                                    "provider '" + profile.name + "' names no auth_env_var");
            credential = env_(profile.auth_env_var);
            if (!credential)
                throw ProviderError(ProviderErrorKind::auth_missing, "environment variable " + profile.auth_env_var +
                                                                          " for provider '" + profile.name +
                                                                          "' is not set");
        }
        HttpRequest req;
        req.url = profile.endpoint_url;
        req.timeout_ms = profile.timeout_ms;
        json body;
        switch (profile.kind) {
        case ProviderKind::openai_compatible:
            body = {{"model", profile.model_id},
                    {"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})},
                    {"temperature", 0}};
            req.headers.emplace_back("Authorization", "Bearer " + *credential);
            break;
        case ProviderKind::gemini_style:
            body = {{"contents", json::array({{{"role", "user"}, {"parts", json::array({{{"text", prompt.text}}})}}})}};
            req.headers.emplace_back("x-goog-api-key", *credential);
            break;
        case ProviderKind::local_llama_style:
            body = {{"model", profile.model_id}, {"prompt", prompt.text}, {"stream", false}};
            if (credential) req.headers.emplace_back("Authorization", "Bearer " + *credential);
            break;
        case ProviderKind::replay: break;
        }
        req.body = body.dump();
        return req;
    }

    CompletionResult send_with_retry(const ProviderProfile& profile, const HttpRequest& request) {
        const auto attempts = profile.max_retries + 1;
        std::string last_error;
        bool last_timed_out = false;
        for (std::int64_t attempt = 1; attempt <= attempts; ++attempt) {
            if (attempt > 1) sleeper_(backoff_delay(static_cast<int>(attempt - 1)));
            auto start = std::chrono::steady_clock::now();
            HttpResponse res;
            try {
                res = transport_->post(request);
            } catch (const TransportError& e) {
                if (!e.timed_out())
                    throw ProviderError(ProviderErrorKind::transport,
                                        "provider '" + profile.name + "': " + e.what());
                last_error = e.what();
                last_timed_out = true;
                continue;
            }
            auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
            if (is_retryable_status(res.status)) {
                last_error = "HTTP " + std::to_string(res.status);
                last_timed_out = false;
                continue;
            }
            if (res.status < 200 || res.status >= 300)
                throw ProviderError(ProviderErrorKind::http_status,
                                    "provider '" + profile.name + "' returned HTTP " + std::to_string(res.status));
            auto body = json::parse(res.body, nullptr, false);
            std::string text;
            try {
                if (body.is_discarded()) throw Error("body is not JSON");
                text = detail::extract_text(profile.kind, body);
            } catch (const std::exception&) {
                throw ProviderError(ProviderErrorKind::malformed_response,
                                    "provider '" + profile.name + "' returned an unexpected response shape");
            }
            return {std::move(text), std::max<std::int64_t>(0, latency.count()), profile.name, profile.model_id,
                    attempt};
        }
        throw ProviderError(last_timed_out ? ProviderErrorKind::timeout_exhausted : ProviderErrorKind::transport,
                            "provider '" + profile.name + "' failed after " + std::to_string(attempts) +
                                " attempt(s): " + last_error);
    }

    detail::Limiter& limiter_for(const ProviderProfile& profile) {
        std::lock_guard lock(mutex_);
        auto& slot = limiters_[profile.name];
        if (!slot) slot = std::make_unique<detail::Limiter>(profile.max_concurrent);
        return *slot;
    }

    std::shared_ptr<const Cassette> cassette_for(const std::string& path) {
        std::lock_guard lock(mutex_);
        auto it = cassettes_.find(path);
        if (it != cassettes_.end()) return it->second;
        auto loaded = std::make_shared<const Cassette>(Cassette::load(path));
        cassettes_.emplace(path, loaded);
        return loaded;
    }

    std::shared_ptr<Transport> transport_;
    Sleeper sleeper_;
    EnvLookup env_;
    std::mutex mutex_;
    std::map<std::string, std::unique_ptr<detail::Limiter>> limiters_;
    std::map<std::string, std::shared_ptr<const Cassette>> cassettes_;
};

/// Sends every prompt through `profile` and writes the completions as a
/// replayable cassette. Duplicate digests keep the last completion.
inline Cassette record_cassette(Gateway& gateway, const ProviderProfile& profile,
                                const std::vector<RenderedPrompt>& prompts, const std::string& out_path,
                                const WarningSink& warn = [](const std::string& m) { std::cerr << "warning: " << m << "\n"; }) {
    Cassette cassette;
    for (const auto& prompt : prompts) {
        auto result = gateway.complete(profile, prompt);
        bool replaced = cassette.put({prompt.spec_digest, result.text, result.latency_ms, result.model_id});
        if (replaced && warn) warn("duplicate digest " + prompt.spec_digest + " recorded; keeping the last completion");
    }
    cassette.save(out_path);
    return cassette;
}

/// Provider config file: a JSON list of profiles.
inline std::vector<ProviderProfile> load_provider_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open provider config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    auto j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw ValidationError("provider config must be a JSON list of profiles",
                              {{{ViolationCode::malformed_document, "$", "expected a JSON array"}}});
    ValidationFeedback fb;
    std::vector<ProviderProfile> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(decode_profile(j[i], detail::index_path("", i), fb));
    if (!fb.ok()) throw ValidationError("invalid provider config '" + path + "'", std::move(fb));
    // Relative cassette paths are resolved against the config file's directory.
    auto dir = std::filesystem::path(path).parent_path();
    for (auto& p : out)
        if (!p.cassette_path.empty() && std::filesystem::path(p.cassette_path).is_relative())
            p.cassette_path = (dir / p.cassette_path).lexically_normal().string();
    return out;
}

inline const ProviderProfile& find_profile(const std::vector<ProviderProfile>& profiles, const std::string& name) {
    for (const auto& p : profiles)
        if (p.name == name) return p;
    throw NotFoundError("provider '" + name + "' is not defined in the provider config");
}

} // namespace spade
