#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spade/codec.hpp"
#include "spade/domain.hpp"
#include "spade/run_record.hpp"

namespace spade {

struct MatchPair {
    std::string entry_id;
    std::string ploy_id;
    bool operator==(const MatchPair&) const = default;
};

struct MatchReport {
    std::int64_t true_positives = 0;
    std::int64_t false_negatives = 0;
    /// Generated ploys matching no ground-truth entry.
    std::int64_t novel_feasible = 0;
    std::vector<MatchPair> pairs;

    bool operator==(const MatchReport&) const = default;
};

struct EntryScore {
    std::string entry_id;
    bool matched = false;
    bool em = false;
    double bleu = 0.0;
    bool operator==(const EntryScore&) const = default;
};

struct EvaluationReport {
    std::string model_id;
    double recall = 0.0;
    double exact_match = 0.0;
    double bleu_avg = 0.0;
    /// False when no pair matched, in which case bleu_avg is reported as 0.
    bool bleu_defined = false;
    double iteration_avg = 1.0;
    double latency_avg_ms = 0.0;
    std::int64_t run_count = 0;
    std::int64_t corpus_size = 0;
    std::int64_t true_positives = 0;
    std::int64_t false_negatives = 0;
    std::int64_t novel_feasible = 0;
    /// Filled only when the runs' ploys were exercised in the simulator.
    std::optional<double> engagement_rate;
    std::optional<double> accuracy;
    std::vector<EntryScore> per_entry;

    bool operator==(const EvaluationReport&) const = default;
};

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// An entry pairs with the first generated ploy (in generation order) whose
/// canonical objective equals the entry's on all four fields.
inline MatchReport match_ploys(const std::vector<DeceptionPloy>& generated, const std::vector<GroundTruthEntry>& corpus) {
    if (corpus.empty()) throw Error("ground-truth corpus is empty");
    std::vector<PloyObjective> canon;
    canon.reserve(generated.size());
    for (const auto& p : generated) canon.push_back(canonicalize_objective(p.objective));

    MatchReport report;
    std::vector<bool> used(generated.size(), false);
    for (const auto& entry : corpus) {
        auto target = canonicalize_objective(entry.objective);
        bool matched = false;
        for (std::size_t i = 0; i < generated.size(); ++i) {
            if (canon[i] != target) continue;
            used[i] = true;
            if (!matched) {
                report.pairs.push_back({entry.entry_id, generated[i].ploy_id});
                matched = true;
            }
        }
        if (matched)
            ++report.true_positives;
        else
            ++report.false_negatives;
    }
    for (bool u : used)
        if (!u) ++report.novel_feasible;
    return report;
}

inline double compute_recall(const MatchReport& report) {
    auto total = report.true_positives + report.false_negatives;
    if (total == 0) return 0.0;
    return static_cast<double>(report.true_positives) / static_cast<double>(total);
}

/// Canonical anchor of a generated ploy: the artifact field that pins down
/// where the deception lives.
inline std::string ploy_anchor(const DeceptionPloy& p) {
    return std::visit(
        [&](const auto& a) -> std::string {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, HoneyfileArtifact>)
                return canonicalize_resource(a.target_directory);
            else if constexpr (std::is_same_v<A, HoneytokenArtifact>)
                return canonicalize_resource(a.placement);
            else if constexpr (std::is_same_v<A, ApiHookArtifact>)
                return canonicalize_resource(a.api_name);
            else if constexpr (std::is_same_v<A, DecoyServiceArtifact>)
                return std::to_string(a.port);
            else
                return canonicalize_resource(p.objective.target_resource);
        },
        p.artifact);
}

/// Ground-truth entries carry no artifact; their anchor is the canonical
/// target_resource, or for decoy services the port after its last ':'.
inline std::string entry_anchor(const GroundTruthEntry& e) {
    auto target = canonicalize_resource(e.objective.target_resource);
    if (e.objective.ploy_kind.is(PloyKindTag::decoy_service)) {
        auto colon = target.rfind(':');
        return colon == std::string::npos ? target : target.substr(colon + 1);
    }
    return target;
}

/// Per-entry exact-match flags, in corpus order.
inline std::vector<bool> exact_match_flags(const std::vector<DeceptionPloy>& generated,
                                           const std::vector<GroundTruthEntry>& corpus) {
    if (corpus.empty()) throw Error("ground-truth corpus is empty");
    std::vector<PloyObjective> canon;
    std::vector<std::string> anchors;
    for (const auto& p : generated) {
        canon.push_back(canonicalize_objective(p.objective));
        anchors.push_back(ploy_anchor(p));
    }
    std::vector<bool> flags;
    flags.reserve(corpus.size());
    for (const auto& entry : corpus) {
        auto target = canonicalize_objective(entry.objective);
        auto anchor = entry_anchor(entry);
        bool em = false;
        for (std::size_t i = 0; i < generated.size() && !em; ++i) em = canon[i] == target && anchors[i] == anchor;
        flags.push_back(em);
    }
    return flags;
}

inline double compute_exact_match(const std::vector<DeceptionPloy>& generated,
                                  const std::vector<GroundTruthEntry>& corpus) {
    auto flags = exact_match_flags(generated, corpus);
    std::size_t hits = 0;
    for (bool f : flags) hits += f ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_split_punct(char c) {
    switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?': case '(': case ')':
    case '[': case ']': case '{': case '}': case '"': case '\'': case '`':
        return true;
    default:
        return false;
    }
}

inline bool is_word_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u >= 0x80;
}

} // namespace detail

/// Lowercases and splits on whitespace; punctuation becomes its own token.
/// A '.' between two word characters stays inside the token (file names,
/// sub-technique ids).
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (detail::is_split_punct(c)) {
            bool inner_dot = c == '.' && i > 0 && i + 1 < text.size() && detail::is_word_char(text[i - 1]) &&
                             detail::is_word_char(text[i + 1]);
            if (inner_dot) {
                current.push_back(c);
            } else {
                flush();
                tokens.emplace_back(1, c);
            }
        } else {
            current.push_back(c);
        }
    }
    flush();
    return tokens;
}

namespace detail {

inline std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    std::unordered_map<std::string, int> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t k = 0; k < n; ++k) {
            if (k) key.push_back('\x1f');
            key += tokens[i + k];
        }
        ++counts[key];
    }
    return counts;
}

} // namespace detail

/// Sentence BLEU with uniform weights and brevity penalty. A zero-count
/// precision of order >= 2 is smoothed to 1/(total+1); a zero unigram
/// precision yields 0.
inline double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                   int max_n = 4) {
    if (reference.empty()) throw Error("BLEU reference is empty");
    if (max_n < 1) throw Error("BLEU max_n must be >= 1");
    if (candidate.empty()) return 0.0;

    double log_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        auto cand = detail::ngram_counts(candidate, static_cast<std::size_t>(n));
        auto ref = detail::ngram_counts(reference, static_cast<std::size_t>(n));
        long matches = 0;
        for (const auto& [gram, count] : cand) {
            auto it = ref.find(gram);
            if (it != ref.end()) matches += std::min(count, it->second);
        }
        long total = candidate.size() >= static_cast<std::size_t>(n)
                         ? static_cast<long>(candidate.size()) - n + 1
                         : 0;
        double p;
        if (matches == 0) {
            if (n == 1) return 0.0;
            p = 1.0 / static_cast<double>(total + 1);
        } else {
            p = static_cast<double>(matches) / static_cast<double>(total);
        }
        log_sum += std::log(p) / max_n;
    }
    double c = static_cast<double>(candidate.size());
    double r = static_cast<double>(reference.size());
    double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum);
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

inline EvaluationReport aggregate_report(const std::vector<RunRecord>& runs, const std::vector<GroundTruthEntry>& corpus) {
    if (runs.empty()) throw Error("no runs to evaluate");
    if (corpus.empty()) throw Error("ground-truth corpus is empty");
    const auto& model = runs.front().model_id;
    for (const auto& r : runs)
        if (r.model_id != model)
            throw Error("runs mix model ids '" + model + "' and '" + r.model_id + "'; evaluate one model at a time");

    std::vector<DeceptionPloy> pooled;
    for (const auto& r : runs) {
        auto ploys = r.all_ploys();
        pooled.insert(pooled.end(), ploys.begin(), ploys.end());
    }

    EvaluationReport report;
    report.model_id = model;
    report.run_count = static_cast<std::int64_t>(runs.size());
    report.corpus_size = static_cast<std::int64_t>(corpus.size());

    auto match = match_ploys(pooled, corpus);
    report.true_positives = match.true_positives;
    report.false_negatives = match.false_negatives;
    report.novel_feasible = match.novel_feasible;
    report.recall = compute_recall(match);
    auto em_flags = exact_match_flags(pooled, corpus);
    std::size_t em_hits = 0;
    for (bool f : em_flags) em_hits += f ? 1 : 0;
    report.exact_match = static_cast<double>(em_hits) / static_cast<double>(corpus.size());

    std::map<std::string, const DeceptionPloy*> by_id;
    for (const auto& p : pooled) by_id.emplace(p.ploy_id, &p);
    std::map<std::string, double> entry_bleu;
    double bleu_sum = 0.0;
    for (const auto& pair : match.pairs) {
        const auto* ploy = by_id.at(pair.ploy_id);
        const GroundTruthEntry* entry = nullptr;
        for (const auto& e : corpus)
            if (e.entry_id == pair.entry_id) {
                entry = &e;
                break;
            }
        double score = bleu(tokenize(render_ploy_text(*ploy)), tokenize(entry->reference_text));
        entry_bleu[pair.entry_id] = score;
        bleu_sum += score;
    }
    report.bleu_defined = !match.pairs.empty();
    report.bleu_avg = report.bleu_defined ? bleu_sum / static_cast<double>(match.pairs.size()) : 0.0;

    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& id = corpus[i].entry_id;
        auto it = entry_bleu.find(id);
        report.per_entry.push_back({id, it != entry_bleu.end(), em_flags[i], it != entry_bleu.end() ? it->second : 0.0});
    }

    double iter_sum = 0.0, latency_sum = 0.0;
    std::size_t counted = 0;
    for (const auto& r : runs) {
        if (r.iterations.empty()) continue;
        iter_sum += static_cast<double>(r.final_iteration());
        latency_sum += static_cast<double>(r.total_latency_ms());
        ++counted;
    }
    if (counted == 0) throw Error("no run completed an iteration");
    report.iteration_avg = iter_sum / static_cast<double>(counted);
    report.latency_avg_ms = latency_sum / static_cast<double>(counted);
    return report;
}

/// Runs grouped by model id, in first-appearance order.
inline std::vector<std::vector<RunRecord>> group_by_model(const std::vector<RunRecord>& runs) {
    std::vector<std::vector<RunRecord>> groups;
    std::map<std::string, std::size_t> index;
    for (const auto& r : runs) {
        auto [it, inserted] = index.emplace(r.model_id, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(r);
    }
    return groups;
}

struct DimensionMeans {
    double relevance = 0, actionability = 0, feasibility = 0, realism = 0;
    std::size_t count = 0;
};

inline DimensionMeans expert_means(const std::vector<ExpertScore>& scores) {
    DimensionMeans m;
    for (const auto& s : scores) {
        m.relevance += static_cast<double>(s.relevance);
        m.actionability += static_cast<double>(s.actionability);
        m.feasibility += static_cast<double>(s.feasibility);
        m.realism += static_cast<double>(s.realism);
    }
    m.count = scores.size();
    if (m.count) {
        auto n = static_cast<double>(m.count);
        m.relevance /= n;
        m.actionability /= n;
        m.feasibility /= n;
        m.realism /= n;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline json to_json(const MatchReport& m) {
    json pairs = json::array();
    for (const auto& p : m.pairs) pairs.push_back({{"entry_id", p.entry_id}, {"ploy_id", p.ploy_id}});
    return {{"true_positives", m.true_positives},
            {"false_negatives", m.false_negatives},
            {"novel_feasible", m.novel_feasible},
            {"pairs", pairs}};
}

inline json to_json(const EvaluationReport& r) {
    json entries = json::array();
    for (const auto& e : r.per_entry)
        entries.push_back({{"entry_id", e.entry_id}, {"matched", e.matched}, {"em", e.em}, {"bleu", e.bleu}});
    return {{"model_id", r.model_id},
            {"recall", r.recall},
            {"exact_match", r.exact_match},
            {"bleu_avg", r.bleu_avg},
            {"bleu_defined", r.bleu_defined},
            {"iteration_avg", r.iteration_avg},
            {"latency_avg_ms", r.latency_avg_ms},
            {"run_count", r.run_count},
            {"corpus_size", r.corpus_size},
            {"true_positives", r.true_positives},
            {"false_negatives", r.false_negatives},
            {"novel_feasible", r.novel_feasible},
            {"engagement_rate", r.engagement_rate ? json(*r.engagement_rate) : json(nullptr)},
            {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)},
            {"per_entry", entries}};
}

inline EntryScore decode_entry_score(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    EntryScore e;
    e.entry_id = r.string("entry_id");
    e.matched = r.boolean("matched");
    e.em = r.boolean("em");
    e.bleu = r.number("bleu");
    r.finish();
    return e;
}

inline EvaluationReport decode_report(const json& j, const std::string& path, ValidationFeedback& fb) {
    FieldReader r(j, path, fb);
    EvaluationReport rep;
    rep.model_id = r.string("model_id", true, true);
    rep.recall = r.number("recall");
    rep.exact_match = r.number("exact_match");
    rep.bleu_avg = r.number("bleu_avg");
    rep.bleu_defined = r.boolean("bleu_defined");
    rep.iteration_avg = r.number("iteration_avg");
    rep.latency_avg_ms = r.number("latency_avg_ms");
    rep.run_count = r.integer("run_count");
    rep.corpus_size = r.integer("corpus_size");
    rep.true_positives = r.integer("true_positives");
    rep.false_negatives = r.integer("false_negatives");
    rep.novel_feasible = r.integer("novel_feasible");
    if (r.has("engagement_rate")) rep.engagement_rate = r.number("engagement_rate");
    else r.node("engagement_rate");
    if (r.has("accuracy")) rep.accuracy = r.number("accuracy");
    else r.node("accuracy");
    rep.per_entry = r.array<EntryScore>("per_entry", decode_entry_score);
    r.finish();
    return rep;
}

template <>
inline EvaluationReport from_json<EvaluationReport>(const json& j) {
    return decode_strict(j, decode_report);
}

namespace detail {

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

} // namespace detail

/// Two text tables: retrieval quality (recall, EM, BLEU) and engagement
/// (engagement rate, accuracy, iteration count, response time).
inline std::string render_report_table(const std::vector<EvaluationReport>& reports) {
    std::size_t w = 5;
    for (const auto& r : reports) w = std::max(w, r.model_id.size());
    std::ostringstream out;
    out << detail::pad("Model", w) << " | Recall (%) | EM Score (%) | BLEU Score (Avg)\n";
    out << std::string(w, '-') << "-|------------|--------------|-----------------\n";
    for (const auto& r : reports) {
        out << detail::pad(r.model_id, w) << " | " << detail::pad(detail::fixed(r.recall * 100.0, 1), 10) << " | "
            << detail::pad(detail::fixed(r.exact_match * 100.0, 1), 12) << " | "
            << (r.bleu_defined ? detail::fixed(r.bleu_avg, 2) : std::string("0.00 (no matches)")) << "\n";
    }
    out << "\n";
    out << detail::pad("Model", w)
        << " | Engagement Rate (%) | Accuracy (%) | Iteration Count (Avg) | Response Time (s)\n";
    out << std::string(w, '-')
        << "-|---------------------|--------------|-----------------------|------------------\n";
    for (const auto& r : reports) {
        out << detail::pad(r.model_id, w) << " | "
            << detail::pad(r.engagement_rate ? detail::fixed(*r.engagement_rate * 100.0, 1) : "n/a", 19) << " | "
            << detail::pad(r.accuracy ? detail::fixed(*r.accuracy * 100.0, 1) : "n/a", 12) << " | "
            << detail::pad(detail::fixed(r.iteration_avg, 2), 21) << " | "
            << detail::fixed(r.latency_avg_ms / 1000.0, 2) << "\n";
    }
    return out.str();
}

} // namespace spade
