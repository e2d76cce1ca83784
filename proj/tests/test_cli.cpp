#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <regex>
#include <sys/wait.h>

#include "support/test_util.hpp"

using namespace spade;
using namespace spade::testing;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Result run_cli(const std::vector<std::string>& args) {
    std::string cmd = quote(SPADE_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    while (auto n = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string path(const std::string& rel) { return fixture(rel).string(); }

Result generate(const std::string& context, const std::string& provider, const std::filesystem::path& out,
                std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"--no-timestamps", "generate", "--context", path("contexts/" + context + ".json"),
                                  "--provider",      provider,   "--config",  path("providers.json"),
                                  "--out",           out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
}

} // namespace

TEST(CliGenerate, SucceededRunExitsZero) {
    TempDir tmp;
    auto r = generate("credential_stealer", "replay-valid", tmp.path());
    EXPECT_EQ(r.code, 0) << r.out;
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(^(run-\S+) succeeded\n$)"))) << r.out;
    Store store(tmp.path());
    auto run = store.load_run(m[1]);
    EXPECT_EQ(run.iterations.size(), 1u);
    EXPECT_EQ(run.created_at, "1970-01-01T00:00:00.000Z");
}

TEST(CliGenerate, ExhaustedRunExitsTwo) {
    TempDir tmp;
    auto r = generate("credential_stealer", "replay-exhaust", tmp.path(), {"--max-iterations", "2"});
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_NE(r.out.find(" exhausted"), std::string::npos) << r.out;
}

TEST(CliGenerate, CassetteMissExitsOne) {
    TempDir tmp;
    auto r = generate("ransomware", "replay-valid", tmp.path());
    EXPECT_EQ(r.code, 1) << r.out;
    EXPECT_NE(r.out.find("provider_failed"), std::string::npos) << r.out;
}

TEST(CliGenerate, UnknownProfileExitsOne) {
    TempDir tmp;
    auto r = generate("credential_stealer", "no-such-profile", tmp.path());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("error:"), std::string::npos);
}

TEST(CliGenerate, JsonListing) {
    TempDir tmp;
    auto r = run_cli({"--json", "--no-timestamps", "generate", "--context", path("contexts/credential_stealer.json"),
                      "--provider", "replay-refine", "--config", path("providers.json"), "--out", tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.out;
    auto j = json::parse(r.out);
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j[0].at("final_status"), "succeeded");
    EXPECT_EQ(j[0].at("iterations"), 2);
}

TEST(CliEval, WritesOracleReport) {
    TempDir tmp;
    auto out = tmp.path() / "report.json";
    auto r = run_cli({"eval", "--runs", path("runs"), "--corpus", path("corpus.jsonl"), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.out;
    for (const auto* col : {"Recall (%)", "EM Score (%)", "BLEU Score (Avg)", "Engagement Rate (%)", "Accuracy (%)",
                            "Iteration Count (Avg)", "Response Time (s)"})
        EXPECT_NE(r.out.find(col), std::string::npos) << col;

    auto got = read_json_file(out).at("reports");
    auto want = fixture_json("golden/eval_fixture_runs.json").at("reports");
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(got[i].at("model_id"), want[i].at("model_id"));
        for (const auto* k : {"recall", "exact_match", "bleu_avg", "iteration_avg", "latency_avg_ms"})
            EXPECT_NEAR(got[i].at(k).get<double>(), want[i].at(k).get<double>(), 1e-9) << k;
    }
}

TEST(CliEval, ScenarioFillsEngagementColumns) {
    TempDir tmp;
    auto out = tmp.path() / "report.json";
    auto r = run_cli({"eval", "--runs", path("runs"), "--corpus", path("corpus.jsonl"), "--out", out.string(),
                      "--scenario", path("sim/scenario_bundled.json")});
    ASSERT_EQ(r.code, 0) << r.out;
    for (const auto& rep : read_json_file(out).at("reports")) EXPECT_TRUE(rep.at("engagement_rate").is_number());
}

TEST(CliEval, MissingRunsDirExitsOne) {
    TempDir tmp;
    auto r = run_cli({"eval", "--runs", (tmp.path() / "nope").string(), "--corpus", path("corpus.jsonl"), "--out",
                      (tmp.path() / "r.json").string()});
    EXPECT_EQ(r.code, 1);
}

TEST(CliSimulate, BundledScenarioSummary) {
    auto r = run_cli({"simulate", "--scenario", path("sim/scenario_bundled.json"), "--ploys",
                      path("sim/ploys_bundled.json")});
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("engagement: 0.733 (11/15)\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("accuracy: 0.818 (9/11)\n"), std::string::npos) << r.out;
}

TEST(CliSimulate, EmptyDeploymentAndTraceFiles) {
    TempDir tmp;
    auto r = run_cli({"simulate", "--scenario", path("sim/scenario_bundled.json"), "--ploys",
                      path("sim/ploys_empty.json"), "--out", tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("engagement: 0.000 (0/15)\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("accuracy: n/a\n"), std::string::npos) << r.out;
    auto summary = read_json_file(tmp.path() / "summary.json");
    EXPECT_EQ(summary.at("engaged"), 0);
    EXPECT_TRUE(summary.at("accuracy").is_null());
    EXPECT_TRUE(std::filesystem::exists(tmp.path() / "traces.jsonl"));
}

TEST(CliSimulate, StoredRunById) {
    TempDir tmp;
    auto g = generate("credential_stealer", "replay-valid", tmp.path());
    ASSERT_EQ(g.code, 0) << g.out;
    auto id = g.out.substr(0, g.out.find(' '));
    auto r = run_cli({"--json", "simulate", "--scenario", path("sim/scenario_bundled.json"), "--ploys", id, "--root",
                      tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(json::parse(r.out).at("ploys"), 2);
}

TEST(CliServe, OccupiedPortExitsOne) {
    httplib::Server blocker;
    auto port = blocker.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    TempDir tmp;
    auto r = run_cli({"serve", "--port", std::to_string(port), "--root", tmp.path().string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("port unavailable"), std::string::npos) << r.out;
}

TEST(CliUsage, MissingSubcommandAndBadArgs) {
    EXPECT_EQ(run_cli({}).code, 1);
    EXPECT_EQ(run_cli({"simulate"}).code, 1);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}
