#include <doctest.h>

#include <array>
#include <fstream>
#include <cstdio>
#include <sys/wait.h>

#include <json.hpp>

#include "corpus_io.hpp"
#include "synth.hpp"

using curate::testing::Synth;
using curate::testing::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(CURATE_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

void corpus(const TempDir& dir) {
    Synth synth(8);
    std::vector<curate::Document> a, b;
    for (int i = 0; i < 30; ++i) a.emplace_back("a" + std::to_string(i), synth.clean_document(), "A");
    for (int i = 0; i < 5; ++i) b.emplace_back("b" + std::to_string(i), a[static_cast<std::size_t>(i)].text(), "B");
    b.emplace_back("b-bad", "{ not arabic prose }", "B");
    curate::testing::write_corpus(dir / "a", "a", a);
    curate::testing::write_corpus(dir / "b", "b", b);
}

} // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run("").code == 1);
    CHECK(run("--bogus").code == 1);
    CHECK(run("filter --output x").code == 1);
    CHECK(run("--config /nonexistent/config.json").code == 1);
    CHECK(run("--help").code == 0);
}

TEST_CASE("standalone stages chain through their output directories") {
    TempDir dir;
    corpus(dir);
    auto f = run("filter --input 'A=" + (dir / "a") + "/*.jsonl' --input 'B=" + (dir / "b") + "/*.jsonl' --output " +
                 (dir / "f") + " --min-words 10 --set min_chars=50");
    REQUIRE(f.code == 0);
    const auto fj = nlohmann::json::parse(f.out);
    CHECK(fj.at("total").at("output_docs") == 35);
    CHECK(fj.at("total").at("reasons").at("curly_brackets") == 1);

    auto m = run("minhash --input " + (dir / "f") + " --output " + (dir / "m") + " --priority B,A");
    REQUIRE(m.code == 0);
    CHECK(nlohmann::json::parse(m.out).at("removed_docs") == 5);

    auto s = run("sentdedup --input " + (dir / "m") + " --output " + (dir / "s") + " --sources B,A");
    REQUIRE(s.code == 0);
    CHECK(nlohmann::json::parse(s.out).at("stage") == "sentdedup");

    auto a = run("analyze --consensus " + (dir / "m/consensus.jsonl") + " --stats " + (dir / "m/stats.json") +
                 " --output " + (dir / "an"));
    REQUIRE(a.code == 0);
    CHECK(std::filesystem::exists(dir / "an/overlap_raw.csv"));

    CHECK(run("minhash --input '" + (dir / "nothing") + "/*.jsonl' --output " + (dir / "m2") + " --priority A").code == 3);
    CHECK(run("filter --input 'A=" + (dir / "a") + "/*.jsonl' --output " + (dir / "f2") + " --set min_words=-3").code == 1);
}

TEST_CASE("config-driven run with seed override") {
    TempDir dir;
    corpus(dir);
    const nlohmann::json cfg = {
        {"output", "out"},
        {"sources", {{{"name", "A"}, {"path", "a/*.jsonl"}}, {{"name", "B"}, {"path", "b/*.jsonl"}}}},
    };
    std::ofstream(dir / "cfg.json") << cfg.dump(2);
    auto r = run("--config " + (dir / "cfg.json") + " --seed 5 --threads 2");
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("stages").size() == 3);
    CHECK(std::filesystem::exists(dir / "out/report/stage_report.md"));

    auto partial = run("--config " + (dir / "cfg.json") + " --stages analyze");
    CHECK(partial.code == 0);
    std::ofstream(dir / "out/minhash/stats.json") << "garbage";
    CHECK(run("--config " + (dir / "cfg.json") + " --stages analyze").code == 2);
}
