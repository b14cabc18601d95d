#include "synth.hpp"

#include <stdlib.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "corpus_io.hpp"
#include "utf8.hpp"

namespace curate::testing {

TempDir::TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "curate-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::size_t Synth::uniform(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
}

std::string Synth::arabic_word(std::size_t min_len, std::size_t max_len) {
    std::string w;
    const std::size_t n = uniform(min_len, max_len);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = uniform(0, 29);
        text::append_utf8(w, k < 20 ? char32_t(0x0627 + k) : char32_t(0x0641 + (k - 20)));
    }
    return w;
}

std::string Synth::latin_word(std::size_t min_len, std::size_t max_len) {
    std::string w;
    const std::size_t n = uniform(min_len, max_len);
    for (std::size_t i = 0; i < n; ++i) w.push_back(static_cast<char>('a' + uniform(0, 25)));
    return w;
}

std::string Synth::arabic_words(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) s.push_back(' ');
        s += arabic_word();
    }
    return s;
}

std::string Synth::clean_line() { return arabic_words(uniform(8, 12)) + "."; }

std::string Synth::clean_line_unpunctuated() { return arabic_words(uniform(8, 12)); }

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

std::string Synth::clean_document(std::size_t lines) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < lines; ++i) v.push_back(clean_line());
    return join_lines(v);
}

std::string Synth::unpunctuated_document(std::size_t lines) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < lines; ++i) v.push_back(clean_line_unpunctuated());
    return join_lines(v);
}

std::string Synth::planted(Reason r) {
    std::vector<std::string> v;
    switch (r) {
    case Reason::empty_after_line_filter:
        for (int i = 0; i < 4; ++i) v.push_back(arabic_words(4) + " javascript " + arabic_words(3) + ".");
        break;
    case Reason::no_alpha:
        for (int i = 0; i < 6; ++i) {
            std::string line;
            for (int k = 0; k < 6; ++k) line += std::to_string(uniform(100, 99999)) + " ";
            v.push_back(line + "١٢٣.");
        }
        break;
    case Reason::lorem_ipsum:
        v = {clean_line(), "Lorem ipsum dolor sit amet, " + arabic_words(5) + ".", clean_line(), clean_line()};
        break;
    case Reason::curly_brackets:
        v = {clean_line(), "{ \"key\": \"" + arabic_word() + "\" } " + arabic_words(5) + ".", clean_line(), clean_line()};
        break;
    case Reason::too_short_chars:
        v = {arabic_words(4) + "."};
        break;
    case Reason::too_few_words:
    {
        std::string line = arabic_word(20, 20);
        for (int i = 0; i < 5; ++i) line += " " + arabic_word(20, 20);
        v = {line + "."};
        break;
    }
    case Reason::low_arabic_ratio:
        for (int i = 0; i < 8; ++i) {
            std::string line;
            for (std::size_t k = 0, n = uniform(8, 12); k < n; ++k) line += (k ? " " : "") + latin_word();
            v.push_back(line + ".");
        }
        break;
    case Reason::char_dup_ratio: {
        for (int i = 0; i < 8; ++i) v.push_back(clean_line());
        v.push_back(v[2]);
        break;
    }
    case Reason::excessive_repetition: {
        std::string laugh;
        for (int i = 0; i < 25; ++i) laugh += "ه";
        v = {clean_line(), arabic_words(3) + " " + laugh + " " + arabic_words(3) + ".", clean_line(), clean_line()};
        break;
    }
    case Reason::terminal_punct_ratio:
        v.push_back(clean_line());
        for (int i = 0; i < 24; ++i) v.push_back(clean_line_unpunctuated());
        break;
    case Reason::short_line_ratio:
        for (int i = 0; i < 21; ++i) v.push_back(arabic_word(3, 4) + " " + arabic_word(3, 4) + ".");
        for (int i = 0; i < 9; ++i) v.push_back(clean_line());
        break;
    case Reason::bullet_ratio:
        for (int i = 0; i < 10; ++i) v.push_back("• " + clean_line());
        break;
    case Reason::newline_ratio:
        for (int i = 0; i < 25; ++i) v.push_back(arabic_word(32, 32) + ".");
        break;
    }
    return join_lines(v);
}

std::string write_corpus(const std::string& dir, const std::string& prefix, const std::vector<Document>& docs,
                         std::size_t per_shard) {
    std::filesystem::create_directories(dir);
    std::size_t shard = 0;
    for (std::size_t start = 0; start < docs.size() || (docs.empty() && shard == 0); start += per_shard, ++shard) {
        char name[64];
        std::snprintf(name, sizeof name, "%s-%03zu.jsonl", prefix.c_str(), shard);
        std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
        for (std::size_t i = start; i < std::min(docs.size(), start + per_shard); ++i) {
            out << serialize_record(docs[i]) << "\n";
        }
        if (docs.empty()) break;
    }
    return (std::filesystem::path(dir) / (prefix + "-*.jsonl")).string();
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PlantedCorpus planted_three_sources(std::uint64_t seed, std::size_t a_docs, std::size_t b_unique, std::size_t c_unique,
                                    double frac_in_b, double frac_in_c) {
    Synth synth(seed);
    PlantedCorpus pc;
    pc.a_unique = a_docs;
    pc.b_unique = b_unique;
    pc.c_unique = c_unique;
    pc.in_b = static_cast<std::size_t>(frac_in_b * static_cast<double>(a_docs) + 0.5);
    pc.in_c = static_cast<std::size_t>(frac_in_c * static_cast<double>(a_docs) + 0.5);
    if (pc.in_c > pc.in_b) throw std::invalid_argument("C copies must be a subset of B copies");

    auto make = [](const std::string& src, std::size_t i, std::string text) {
        return Document(src + "-" + std::to_string(i), std::move(text), src);
    };
    for (std::size_t i = 0; i < a_docs; ++i) pc.a.push_back(make("A", i, synth.clean_document()));
    std::size_t bi = 0;
    std::size_t ci = 0;
    for (std::size_t i = 0; i < b_unique; ++i) pc.b.push_back(make("B", bi++, synth.clean_document()));
    for (std::size_t i = 0; i < c_unique; ++i) pc.c.push_back(make("C", ci++, synth.clean_document()));
    // Spread the copies through the shards rather than appending them.
    for (std::size_t i = 0; i < pc.in_b; ++i) {
        const std::size_t at = synth.uniform(0, pc.b.size());
        pc.b.insert(pc.b.begin() + static_cast<std::ptrdiff_t>(at), make("B", bi++, pc.a[i].text()));
    }
    for (std::size_t i = 0; i < pc.in_c; ++i) {
        const std::size_t at = synth.uniform(0, pc.c.size());
        pc.c.insert(pc.c.begin() + static_cast<std::ptrdiff_t>(at), make("C", ci++, pc.a[i].text()));
    }
    return pc;
}

} // namespace curate::testing
