// One line per acceptance criterion: PASS/FAIL, a name, and what was measured.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "corpus_io.hpp"
#include "minhash.hpp"
#include "oracles.hpp"
#include "overlap.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "quality_filter.hpp"
#include "sentence_dedup.hpp"
#include "synth.hpp"

using namespace curate;
using curate::testing::Synth;
using curate::testing::TempDir;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Outcome banding_curve() {
    const auto t0 = Clock::now();
    const MinHashParams params;  // 14 bands x 8 rows
    const MinHasher hasher(params);
    std::mt19937_64 rng(20240601);
    const std::size_t pairs = 2000;
    struct Level {
        double s;
        std::size_t shared, own;  // |A∩B| = shared, |A\B| = |B\A| = own
    };
    const std::vector<Level> levels = {{0.2, 40, 80}, {0.5, 100, 50}, {0.8, 160, 20}};
    bool ok = true;
    std::string detail;
    for (const auto& lv : levels) {
        SignatureTable table(hasher.width());
        for (std::size_t p = 0; p < pairs; ++p) {
            std::vector<std::uint64_t> a, b;
            for (std::size_t i = 0; i < lv.shared; ++i) {
                const auto x = rng();
                a.push_back(x);
                b.push_back(x);
            }
            for (std::size_t i = 0; i < lv.own; ++i) a.push_back(rng());
            for (std::size_t i = 0; i < lv.own; ++i) b.push_back(rng());
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            table.append(hasher.sign(a));
            table.append(hasher.sign(b));
        }
        std::size_t hits = 0;
        for (const auto& [x, y] : candidate_pairs(table, params).pairs) {
            if (x % 2 == 0 && y == x + 1) ++hits;
        }
        const double rate = static_cast<double>(hits) / static_cast<double>(pairs);
        const double expect = curate::testing::banding_probability(lv.s, 14, 8);
        ok = ok && std::fabs(rate - expect) <= 0.05;
        detail += fmt("s=%.1f ", lv.s) + fmt("rate=%.6f ", rate) + fmt("expected=%.6f; ", expect);
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 120.0;
    return {ok, detail + fmt("%.1fs", secs)};
}

Outcome clustering_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    int matched = 0;
    for (int g = 0; g < 100; ++g) {
        const std::size_t n = 1 + rng() % 1000;
        const std::size_t m = rng() % (2 * n);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        for (std::size_t e = 0; e < m; ++e) {
            const auto a = static_cast<std::uint32_t>(rng() % n);
            const auto b = static_cast<std::uint32_t>(rng() % n);
            if (a != b) edges.emplace_back(std::min(a, b), std::max(a, b));
        }
        if (connected_components(n, edges) == curate::testing::bfs_components(n, edges)) ++matched;
    }
    const double secs = seconds_since(t0);
    return {matched == 100 && secs < 60.0, std::to_string(matched) + "/100 graphs match, " + fmt("%.2fs", secs)};
}

Outcome filter_accounting() {
    TempDir dir;
    Synth synth(31);
    const std::size_t total = 10000;
    const std::size_t per_reason = 400;
    const std::size_t zero_punct = 800;
    std::vector<Document> docs;
    std::map<Reason, std::size_t> planted;
    std::set<std::string> zero_punct_ids;
    for (std::size_t r = 0; r < kReasonCount; ++r) {
        for (std::size_t i = 0; i < per_reason; ++i) {
            docs.emplace_back("p" + std::to_string(docs.size()), synth.planted(static_cast<Reason>(r)), "S");
        }
        planted[static_cast<Reason>(r)] = per_reason;
    }
    for (std::size_t i = 0; i < zero_punct; ++i) {
        docs.emplace_back("z" + std::to_string(docs.size()), synth.unpunctuated_document(), "S");
        zero_punct_ids.insert(docs.back().id());
    }
    while (docs.size() < total) docs.emplace_back("c" + std::to_string(docs.size()), synth.clean_document(), "S");
    std::shuffle(docs.begin(), docs.end(), synth.rng());

    FilterStageOptions o;
    o.inputs = {{"S", curate::testing::write_corpus(dir / "in", "q", docs, 1000)}};
    o.output_dir = dir / "out";
    const auto r = run_filter_stage(o);
    const auto t = r.stats.total();
    std::uint64_t sum = t.output_docs;
    for (auto n : t.reasons) sum += n;

    bool tallies_ok = true;
    std::string short_of;
    for (const auto& [reason, n] : planted) {
        if (t.reasons[static_cast<std::size_t>(reason)] < n) {
            tallies_ok = false;
            short_of += " " + std::string(reason_name(reason));
        }
    }

    const FilterConfig cfg;
    std::size_t punct_rejections = 0;
    for (const auto& d : docs) {
        if (!zero_punct_ids.count(d.id())) continue;
        const auto v = evaluate_document(filter_lines(d, cfg).doc, cfg);
        if (v.reason == Reason::terminal_punct_ratio) ++punct_rejections;
    }
    const bool ok = t.input_docs == total && sum == total && tallies_ok && punct_rejections == 0;
    return {ok, "kept+reasons=" + std::to_string(sum) + "/" + std::to_string(total) +
                    (tallies_ok ? ", every planted tally covered" : ", short:" + short_of) +
                    ", zero-punct docs rejected for punctuation: " + std::to_string(punct_rejections)};
}

// Documents mixing unique sentences, short sentences and recurring
// boilerplate blocks.
std::vector<std::string> boilerplate_corpus(std::uint64_t seed, std::size_t n) {
    Synth synth(seed);
    std::vector<std::vector<std::string>> blocks(25);
    for (auto& b : blocks) {
        for (std::size_t k = 0, len = synth.uniform(3, 5); k < len; ++k) b.push_back(synth.arabic_words(7) + ".");
    }
    std::vector<std::string> docs;
    for (std::size_t d = 0; d < n; ++d) {
        std::vector<std::string> lines;
        for (std::size_t l = 0, nl = synth.uniform(2, 6); l < nl; ++l) {
            std::string line;
            auto add = [&](const std::string& s) {
                if (!line.empty()) line += ' ';
                line += s;
            };
            for (std::size_t k = 0, ns = synth.uniform(1, 4); k < ns; ++k) {
                const auto roll = synth.uniform(0, 9);
                if (roll < 2) {
                    for (const auto& s : blocks[synth.uniform(0, blocks.size() - 1)]) add(s);
                } else if (roll < 3) {
                    add(synth.arabic_words(2) + "!");
                } else {
                    add(synth.arabic_words(synth.uniform(5, 12)) + ".");
                }
            }
            lines.push_back(line);
        }
        docs.push_back(curate::testing::join_lines(lines));
    }
    return docs;
}

Outcome sentence_dedup() {
    TempDir dir;
    const auto texts = boilerplate_corpus(41, 8000);
    std::vector<Document> docs;
    for (std::size_t i = 0; i < texts.size(); ++i) docs.emplace_back("d" + std::to_string(i), texts[i], "S");
    SentDedupStageOptions o;
    o.inputs = expand_glob(curate::testing::write_corpus(dir / "in", "s", docs, 1000));
    o.output_dir = dir / "first";
    const auto first = run_sentdedup_stage(o);

    std::uint64_t oracle_removed = 0;
    const auto oracle = curate::testing::brute_sentence_dedup(texts, {}, &oracle_removed);
    std::map<std::string, std::string> got;
    std::vector<std::string> first_shards;
    for (const auto& p : first.manifest.shard_paths) first_shards.push_back(dir / ("first/" + p));
    for (const auto& path : first_shards) {
        read_shard(path, 0, {}, [&](Document&& d) { got[d.id()] = d.text(); });
    }
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto it = got.find("d" + std::to_string(i));
        if (oracle[i].has_value() != (it != got.end()) || (oracle[i] && *oracle[i] != it->second)) ++mismatches;
    }

    SentDedupStageOptions again = o;
    again.inputs = first_shards;
    again.output_dir = dir / "second";
    const auto second = run_sentdedup_stage(again);
    const auto removed1 = first.stats.total().removed_sentences;
    const auto removed2 = second.stats.total().removed_sentences;
    const bool ok = mismatches == 0 && removed1 == oracle_removed && removed1 > 0 && removed2 == 0 &&
                    second.stats.total().output_docs == first.stats.total().output_docs;
    return {ok, std::to_string(texts.size()) + " docs, oracle mismatches " + std::to_string(mismatches) +
                    ", first run removed " + std::to_string(removed1) + " (oracle " + std::to_string(oracle_removed) +
                    "), second run removed " + std::to_string(removed2)};
}

PipelineConfig planted_config(const TempDir& dir, const std::string& out, unsigned threads) {
    const nlohmann::json j = {
        {"output", out},
        {"seed", 1234},
        {"threads", threads},
        {"sources",
         {{{"name", "A"}, {"path", "a/*.jsonl"}},
          {{"name", "B"}, {"path", "b/*.jsonl"}},
          {{"name", "C"}, {"path", "c/*.jsonl"}}}},
        {"analysis", {{"mode", "documents"}}},
    };
    return PipelineConfig::from_json(j, dir.path().string());
}

Outcome planted_reconstruction() {
    TempDir dir;
    const auto pc = curate::testing::planted_three_sources(51, 1000, 600, 500, 0.40, 0.10);
    curate::testing::write_corpus(dir / "a", "a", pc.a, 250);
    curate::testing::write_corpus(dir / "b", "b", pc.b, 250);
    curate::testing::write_corpus(dir / "c", "c", pc.c, 250);
    const auto config = planted_config(dir, "out", 0);
    run_pipeline(config, parse_stages("filter,minhash,analyze"));

    const PipelineLayout layout(config.output_root);
    const auto records = read_consensus(layout.minhash_dir + "/consensus.jsonl");
    const auto stats = MinHashStats::from_json(nlohmann::json::parse(read_file(layout.minhash_dir + "/stats.json")));
    const auto r = analyze(records, stats, CountMode::documents);

    // Ground truth straight from the construction: A-i for i < in_c sits in
    // all three sources, the rest of the first in_b only in A and B.
    const std::uint64_t b = pc.in_b, c = pc.in_c;
    bool ok = true;
    std::string why;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            why += " " + what;
        }
    };
    expect(r.histogram.bins.size() == 2, "bins");
    if (r.histogram.bins.size() == 2) {
        expect(r.histogram.bins[0].clusters == b - c && r.histogram.bins[0].units == b - c, "depth2");
        expect(r.histogram.bins[1].clusters == c && r.histogram.bins[1].units == 2 * c, "depth3");
    }
    expect(r.histogram.single_source_clusters == 0, "single-source");
    expect(r.matrix.at("A", "B") == b + c, "AB");
    expect(r.matrix.at("A", "C") == 2 * c, "AC");
    expect(r.matrix.at("B", "C") == 2 * c, "BC");
    expect(r.matrix.at("A", "A") == b && r.matrix.at("B", "B") == b && r.matrix.at("C", "C") == c, "diagonal");
    const std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> survival = {
        {"A", {pc.a.size(), pc.a.size()}},
        {"B", {pc.b.size(), pc.b_unique}},
        {"C", {pc.c.size(), pc.c_unique}},
    };
    for (const auto& row : r.survival.rows) {
        const auto [before, after] = survival.at(row.source);
        expect(row.before == before && row.after == after &&
                   row.survival == static_cast<double>(after) / static_cast<double>(before),
               "survival " + row.source);
    }
    return {ok, ok ? "depth {2: " + std::to_string(b - c) + ", 3: " + std::to_string(c) + "}, AB=" +
                         std::to_string(b + c) + " AC=BC=" + std::to_string(2 * c) +
                         ", survival B=" + fmt("%.4f", static_cast<double>(pc.b_unique) / pc.b.size()) +
                         " C=" + fmt("%.4f", static_cast<double>(pc.c_unique) / pc.c.size())
                   : "mismatch:" + why};
}

std::map<std::string, std::string> snapshot(const std::string& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path().string());
    }
    return files;
}

Outcome determinism() {
    TempDir dir;
    const auto pc = curate::testing::planted_three_sources(61, 600, 300, 300, 0.4, 0.1);
    auto b = pc.b;
    Synth synth(62);
    for (std::size_t i = 0; i < 60; ++i) b.emplace_back("Bp" + std::to_string(i), synth.planted(Reason::bullet_ratio), "B");
    curate::testing::write_corpus(dir / "a", "a", pc.a, 100);
    curate::testing::write_corpus(dir / "b", "b", b, 100);
    curate::testing::write_corpus(dir / "c", "c", pc.c, 100);

    const auto one = planted_config(dir, "out", 4);
    run_pipeline(one, parse_stages(""));
    const auto first = snapshot(one.output_root);
    fs::remove_all(one.output_root);
    run_pipeline(planted_config(dir, "out", 3), parse_stages(""));
    const auto second = snapshot(one.output_root);

    std::size_t differing = 0;
    for (const auto& [name, body] : first) {
        const auto it = second.find(name);
        if (it == second.end() || it->second != body) ++differing;
    }
    differing += second.size() > first.size() ? second.size() - first.size() : 0;
    return {differing == 0 && !first.empty(),
            std::to_string(first.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

Outcome throughput() {
    Synth synth(71);
    std::vector<Document> docs;
    const std::size_t n = 60000;
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < n; ++i) {
        docs.emplace_back("t" + std::to_string(i), synth.clean_document(), "S");
        bytes += docs.back().text().size();
    }
    const FilterConfig cfg;
    const MinHasher hasher(MinHashParams{});
    const unsigned threads = resolve_threads(0);
    const std::size_t chunk = 1000;
    std::vector<std::size_t> kept_per_chunk((n + chunk - 1) / chunk, 0);
    const auto t0 = Clock::now();
    parallel_for(kept_per_chunk.size(), threads, [&](std::size_t c) {
        std::vector<std::uint64_t> sig(hasher.width());
        for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
            const auto scrub = filter_lines(docs[i], cfg);
            if (!evaluate_document(scrub.doc, cfg).kept) continue;
            hasher.sign_text(scrub.doc.text(), sig);
            ++kept_per_chunk[c];
        }
    });
    const double secs = seconds_since(t0);
    std::size_t kept = 0;
    for (auto k : kept_per_chunk) kept += k;
    const double rate = static_cast<double>(n) / secs;
    return {rate >= 20000.0 && kept == n,
            fmt("%.0f docs/s", rate) + " on " + std::to_string(threads) + " thread(s), " +
                fmt("mean %.0f bytes/doc", static_cast<double>(bytes) / n)};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 lsh-banding-curve", banding_curve},
        {"2 clustering-oracle", clustering_oracle},
        {"3 filter-accounting", filter_accounting},
        {"4 sentence-dedup-oracle-idempotence", sentence_dedup},
        {"5 planted-three-source-reconstruction", planted_reconstruction},
        {"6 determinism", determinism},
        {"7 throughput", throughput},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
