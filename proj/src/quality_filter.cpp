#include "quality_filter.hpp"

#include <algorithm>
#include <bitset>
#include <charconv>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <unordered_set>

#include "error.hpp"
#include "parallel.hpp"
#include "utf8.hpp"

namespace curate {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, kReasonCount> kReasonNames = {
    "empty_after_line_filter", "no_alpha",          "lorem_ipsum",
    "curly_brackets",          "too_short_chars",   "too_few_words",
    "low_arabic_ratio",        "char_dup_ratio",    "excessive_repetition",
    "terminal_punct_ratio",    "short_line_ratio",  "bullet_ratio",
    "newline_ratio",
};

constexpr std::array<std::string_view, kReasonCount> kReasonLabels = {
    "Empty after line filtering", "No alphabetic characters", "Lorem ipsum",
    "Curly brackets (code/templates)", "Too short (characters)", "Too few words",
    "Low Arabic ratio", "Character duplicate ratio", "Excessive repetition",
    "Terminal punctuation ratio", "Short line ratio", "Bullet ratio",
    "Newline ratio",
};

constexpr std::array<Reason, kReasonCount> kReportOrder = {
    Reason::char_dup_ratio,       Reason::excessive_repetition, Reason::curly_brackets,
    Reason::short_line_ratio,     Reason::terminal_punct_ratio, Reason::too_short_chars,
    Reason::too_few_words,        Reason::bullet_ratio,         Reason::empty_after_line_filter,
    Reason::low_arabic_ratio,     Reason::lorem_ipsum,          Reason::no_alpha,
    Reason::newline_ratio,
};

bool is_bullet(char32_t c) noexcept {
    return c == U'•' || c == U'-' || c == U'*' || c == U'▪' || c == U'◦';
}

bool is_digit_any(char32_t c) noexcept {
    return (c >= U'0' && c <= U'9') || (c >= 0x0660 && c <= 0x0669) || (c >= 0x06F0 && c <= 0x06F9);
}

// "[12]", "[١٢]", "[edit]", "[citation needed]" and the Arabic edit links.
bool has_citation_marker(std::string_view line_lower) {
    static constexpr std::string_view kWordMarkers[] = {
        "[edit]", "[citation needed]", "[\xD8\xB9\xD8\xAF\xD9\x84]",
        "[\xD8\xAA\xD8\xB9\xD8\xAF\xD9\x8A\xD9\x84]",
    };
    for (auto m : kWordMarkers) {
        if (line_lower.find(m) != std::string_view::npos) return true;
    }
    for (std::size_t open = line_lower.find('['); open != std::string_view::npos;
         open = line_lower.find('[', open + 1)) {
        std::size_t pos = open + 1;
        std::size_t digits = 0;
        while (pos < line_lower.size()) {
            std::size_t next = pos;
            const char32_t c = text::next_scalar(line_lower, next);
            if (!is_digit_any(c)) break;
            ++digits;
            pos = next;
        }
        if (digits > 0 && pos < line_lower.size() && line_lower[pos] == ']') return true;
    }
    return false;
}

bool has_long_word(std::string_view line, std::size_t max_chars) {
    std::size_t run = 0;
    for (std::size_t pos = 0; pos < line.size();) {
        if (text::is_space(text::next_scalar(line, pos))) {
            run = 0;
        } else if (++run > max_chars) {
            return true;
        }
    }
    return false;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) fn(text.substr(start));
            return;
        }
        fn(text.substr(start, nl - start));
        start = nl + 1;
    }
}

// Every document-level statistic, gathered in one pass over the text.
struct Profile {
    std::size_t chars = 0;
    std::size_t non_newline_chars = 0;
    std::size_t dup_chars = 0;
    std::size_t words = 0;
    std::size_t newlines = 0;
    std::size_t nonblank_lines = 0;
    std::size_t punct_lines = 0;
    std::size_t short_lines = 0;
    std::size_t bullet_lines = 0;
    std::size_t alpha = 0;
    std::size_t arabic_alpha = 0;
    bool curly = false;
    bool lorem = false;
    bool excessive = false;

    double dup_ratio() const {
        return non_newline_chars == 0 ? 0.0 : static_cast<double>(dup_chars) / non_newline_chars;
    }
    double punct_ratio() const {
        return nonblank_lines == 0 ? 0.0 : static_cast<double>(punct_lines) / nonblank_lines;
    }
    double short_ratio() const {
        return nonblank_lines == 0 ? 0.0 : static_cast<double>(short_lines) / nonblank_lines;
    }
    double bullet_ratio() const {
        return nonblank_lines == 0 ? 0.0 : static_cast<double>(bullet_lines) / nonblank_lines;
    }
    double arabic_ratio() const {
        return alpha == 0 ? 0.0 : static_cast<double>(arabic_alpha) / alpha;
    }
    double newline_ratio() const {
        return words == 0 ? 0.0 : static_cast<double>(newlines) / words;
    }
};

// Tracks single-character runs and short periodic patterns over the scalar
// stream of a document.
class RepetitionScanner {
public:
    explicit RepetitionScanner(std::size_t max_run) : max_run_(max_run) {}

    void push(char32_t c) {
        if (hit_) return;
        if (count_ > 0 && c == window_[0]) {
            ++run_;
        } else {
            run_ = 1;
        }
        if (run_ > max_run_ && !text::is_space(c)) hit_ = true;

        for (std::size_t p = 2; p <= 4; ++p) {
            if (count_ >= p && window_[p - 1] == c) {
                ++period_match_[p];
            } else {
                period_match_[p] = 0;
            }
        }
        for (std::size_t i = 3; i > 0; --i) window_[i] = window_[i - 1];
        window_[0] = c;
        ++count_;

        for (std::size_t p = 2; p <= 4; ++p) {
            const std::size_t repeats = (period_match_[p] + p) / p;
            if (period_match_[p] > 0 && repeats > max_run_ / 2 && pattern_has_content(p)) {
                hit_ = true;
            }
        }
    }

    bool hit() const noexcept { return hit_; }

private:
    bool pattern_has_content(std::size_t p) const {
        for (std::size_t i = 0; i < p; ++i) {
            if (!text::is_space(window_[i])) return true;
        }
        return false;
    }

    std::size_t max_run_;
    std::array<char32_t, 4> window_{};
    std::array<std::size_t, 5> period_match_{};
    std::size_t count_ = 0;
    std::size_t run_ = 0;
    bool hit_ = false;
};

bool contains_lorem(std::string_view text) {
    static constexpr std::string_view kNeedle = "lorem ipsum";
    if (text.size() < kNeedle.size()) return false;
    for (std::size_t i = 0; i + kNeedle.size() <= text.size(); ++i) {
        if ((text[i] | 0x20) != 'l') continue;
        std::size_t k = 1;
        for (; k < kNeedle.size(); ++k) {
            char c = text[i + k];
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
            if (c != kNeedle[k]) break;
        }
        if (k == kNeedle.size()) return true;
    }
    return false;
}

Profile profile(std::string_view text, const FilterConfig& cfg) {
    Profile p;
    RepetitionScanner reps(cfg.max_char_run);
    std::unordered_set<std::string_view> seen_lines;
    bool in_word = false;

    for_each_line(text, [&](std::string_view line) {
        std::size_t line_chars = 0;
        char32_t first = 0;
        char32_t last = 0;
        for (std::size_t pos = 0; pos < line.size();) {
            const char32_t c = text::next_scalar(line, pos);
            ++line_chars;
            reps.push(c);
            const bool space = text::is_space(c);
            if (!space) {
                if (first == 0) first = c;
                last = c;
                if (!in_word) ++p.words;
                if (text::is_alpha(c)) {
                    ++p.alpha;
                    if (text::in_arabic_block(c)) ++p.arabic_alpha;
                } else if (c == U'{') {
                    p.curly = true;
                }
            }
            in_word = !space;
        }
        reps.push(U'\n');
        in_word = false;

        p.non_newline_chars += line_chars;
        if (!seen_lines.insert(line).second) p.dup_chars += line_chars;
        if (last != 0) {
            ++p.nonblank_lines;
            if (cfg.is_terminal(last)) ++p.punct_lines;
            if (line_chars <= cfg.short_line_max_chars) ++p.short_lines;
            if (is_bullet(first)) ++p.bullet_lines;
        }
    });
    p.newlines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    p.chars = p.non_newline_chars + p.newlines;
    p.lorem = contains_lorem(text);
    p.excessive = reps.hit();
    return p;
}

bool fails(Reason r, const Profile& p, const FilterConfig& cfg) {
    switch (r) {
    case Reason::empty_after_line_filter: return p.nonblank_lines == 0;
    case Reason::no_alpha: return p.alpha == 0;
    case Reason::lorem_ipsum: return p.lorem;
    case Reason::curly_brackets: return cfg.reject_curly && p.curly;
    case Reason::too_short_chars: return p.chars < cfg.min_chars;
    case Reason::too_few_words: return p.words < cfg.min_words;
    case Reason::low_arabic_ratio: return p.arabic_ratio() < cfg.min_arabic_alpha_ratio;
    case Reason::char_dup_ratio: return p.dup_ratio() > cfg.max_char_dup_ratio;
    case Reason::excessive_repetition: return p.excessive;
    case Reason::terminal_punct_ratio: {
        const double r = p.punct_ratio();
        if (r == 0.0) return !cfg.allow_zero_punct;
        return r < cfg.min_terminal_punct_ratio;
    }
    case Reason::short_line_ratio: return p.short_ratio() > cfg.max_short_line_ratio;
    case Reason::bullet_ratio: return p.bullet_ratio() > cfg.max_bullet_line_ratio;
    case Reason::newline_ratio: return p.newline_ratio() > cfg.max_newlines_per_word;
    }
    return false;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw UsageError("invalid value for " + std::string(key) + ": " + std::string(value));
    }
    return out;
}

bool parse_flag(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw UsageError("invalid flag for " + std::string(key) + ": " + std::string(value));
}

std::vector<std::string> split_list(std::string_view value, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        const std::size_t end = std::min(value.find(sep, start), value.size());
        auto item = text::trim(value.substr(start, end - start));
        if (!item.empty()) out.emplace_back(item);
        start = end + 1;
    }
    return out;
}

} // namespace

std::string_view reason_name(Reason r) noexcept { return kReasonNames[static_cast<std::size_t>(r)]; }
std::string_view reason_label(Reason r) noexcept { return kReasonLabels[static_cast<std::size_t>(r)]; }

std::optional<Reason> parse_reason(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kReasonCount; ++i) {
        if (kReasonNames[i] == name) return static_cast<Reason>(i);
    }
    return std::nullopt;
}

const std::array<Reason, kReasonCount>& reason_report_order() noexcept { return kReportOrder; }

std::vector<std::string> FilterConfig::default_policy_phrases() {
    return {
        "privacy policy",
        "cookie policy",
        "use cookies",
        "uses cookies",
        "use of cookies",
        "accept cookies",
        "terms of use",
        "terms and conditions",
        "log in to",
        "sign in to",
        "forgot your password",
        // privacy policy
        "\xD8\xB3\xD9\x8A\xD8\xA7\xD8\xB3\xD8\xA9 \xD8\xA7\xD9\x84\xD8\xAE\xD8\xB5\xD9\x88\xD8\xB5\xD9\x8A\xD8\xA9",
        // cookies
        "\xD9\x85\xD9\x84\xD9\x81\xD8\xA7\xD8\xAA \xD8\xAA\xD8\xB9\xD8\xB1\xD9\x8A\xD9\x81 \xD8\xA7\xD9\x84\xD8\xA7\xD8\xB1\xD8\xAA\xD8\xA8\xD8\xA7\xD8\xB7",
        "\xD8\xA7\xD9\x84\xD9\x83\xD9\x88\xD9\x83\xD9\x8A\xD8\xB2",
        // terms of use
        "\xD8\xB4\xD8\xB1\xD9\x88\xD8\xB7 \xD8\xA7\xD9\x84\xD8\xA7\xD8\xB3\xD8\xAA\xD8\xAE\xD8\xAF\xD8\xA7\xD9\x85",
        // log in
        "\xD8\xAA\xD8\xB3\xD8\xAC\xD9\x8A\xD9\x84 \xD8\xA7\xD9\x84\xD8\xAF\xD8\xAE\xD9\x88\xD9\x84",
        // forgot password
        "\xD9\x86\xD8\xB3\xD9\x8A\xD8\xAA \xD9\x83\xD9\x84\xD9\x85\xD8\xA9 \xD8\xA7\xD9\x84\xD9\x85\xD8\xB1\xD9\x88\xD8\xB1",
    };
}

std::u32string FilterConfig::default_terminal_punct() {
    return U".!?؟\"“”‘’«»'";
}

bool FilterConfig::is_terminal(char32_t c) const noexcept {
    return terminal_punct_set.find(c) != std::u32string::npos;
}

void FilterConfig::validate() const {
    auto fraction = [](const char* name, double v) {
        if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(name) + " must be in [0,1]");
    };
    auto positive = [](const char* name, std::size_t v) {
        if (v == 0) throw UsageError(std::string(name) + " must be positive");
    };
    fraction("min_terminal_punct_ratio", min_terminal_punct_ratio);
    fraction("max_char_dup_ratio", max_char_dup_ratio);
    fraction("max_short_line_ratio", max_short_line_ratio);
    fraction("min_arabic_alpha_ratio", min_arabic_alpha_ratio);
    fraction("max_bullet_line_ratio", max_bullet_line_ratio);
    if (!(max_newlines_per_word >= 0.0)) throw UsageError("max_newlines_per_word must be non-negative");
    positive("short_line_max_chars", short_line_max_chars);
    positive("min_chars", min_chars);
    positive("min_words", min_words);
    positive("max_word_chars", max_word_chars);
    positive("max_char_run", max_char_run);
}

void FilterConfig::set(std::string_view key, std::string_view value) {
    if (key == "min_terminal_punct_ratio") min_terminal_punct_ratio = parse_number<double>(key, value);
    else if (key == "allow_zero_punct") allow_zero_punct = parse_flag(key, value);
    else if (key == "max_char_dup_ratio") max_char_dup_ratio = parse_number<double>(key, value);
    else if (key == "max_short_line_ratio") max_short_line_ratio = parse_number<double>(key, value);
    else if (key == "short_line_max_chars") short_line_max_chars = parse_number<std::size_t>(key, value);
    else if (key == "max_newlines_per_word") max_newlines_per_word = parse_number<double>(key, value);
    else if (key == "min_chars") min_chars = parse_number<std::size_t>(key, value);
    else if (key == "min_words") min_words = parse_number<std::size_t>(key, value);
    else if (key == "min_arabic_alpha_ratio") min_arabic_alpha_ratio = parse_number<double>(key, value);
    else if (key == "reject_curly") reject_curly = parse_flag(key, value);
    else if (key == "max_word_chars") max_word_chars = parse_number<std::size_t>(key, value);
    else if (key == "max_bullet_line_ratio") max_bullet_line_ratio = parse_number<double>(key, value);
    else if (key == "max_char_run") max_char_run = parse_number<std::size_t>(key, value);
    else if (key == "policy_phrases") policy_phrases = split_list(value, '|');
    else if (key == "terminal_punct_set") terminal_punct_set = text::decode(value);
    else throw UsageError("unknown filter setting: " + std::string(key));
}

void FilterConfig::merge_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("filter config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "policy_phrases") {
                policy_phrases = value.get<std::vector<std::string>>();
            } else if (key == "terminal_punct_set") {
                terminal_punct_set = text::decode(value.get<std::string>());
            } else if (value.is_boolean()) {
                set(key, value.get<bool>() ? "true" : "false");
            } else if (value.is_number()) {
                set(key, value.dump());
            } else if (value.is_string()) {
                set(key, value.get<std::string>());
            } else {
                throw UsageError("invalid value type for filter setting " + key);
            }
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("invalid value for filter setting " + key + ": " + e.what());
        }
    }
}

nlohmann::json FilterConfig::to_json() const {
    return {
        {"min_terminal_punct_ratio", min_terminal_punct_ratio},
        {"allow_zero_punct", allow_zero_punct},
        {"max_char_dup_ratio", max_char_dup_ratio},
        {"max_short_line_ratio", max_short_line_ratio},
        {"short_line_max_chars", short_line_max_chars},
        {"max_newlines_per_word", max_newlines_per_word},
        {"min_chars", min_chars},
        {"min_words", min_words},
        {"min_arabic_alpha_ratio", min_arabic_alpha_ratio},
        {"reject_curly", reject_curly},
        {"max_word_chars", max_word_chars},
        {"max_bullet_line_ratio", max_bullet_line_ratio},
        {"max_char_run", max_char_run},
        {"policy_phrases", policy_phrases},
        {"terminal_punct_set", text::encode(terminal_punct_set)},
    };
}

FilterConfig FilterConfig::from_json(const nlohmann::json& j) {
    FilterConfig cfg;
    cfg.merge_json(j);
    cfg.validate();
    return cfg;
}

FilterConfig FilterConfig::load(const std::string& path) {
    auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw UsageError("filter config is not valid JSON: " + path);
    return from_json(j);
}

namespace {

// Lowercased policy phrases, indexed by their first four bytes.
class PhraseMatcher {
public:
    explicit PhraseMatcher(const FilterConfig& cfg) {
        for (const auto& p : cfg.policy_phrases) {
            if (p.empty()) continue;
            std::string lower = text::ascii_lower(p);
            if (lower.size() < 4) {
                short_.push_back(std::move(lower));
            } else {
                const std::uint32_t k = prefix(lower.data());
                starts_.set(slot(k));
                long_.push_back({k, std::move(lower)});
            }
        }
    }

    bool matches(std::string_view lower) const {
        for (const auto& p : short_) {
            if (lower.find(p) != std::string_view::npos) return true;
        }
        if (long_.empty()) return false;
        for (std::size_t i = 0; i + 4 <= lower.size(); ++i) {
            const std::uint32_t k = prefix(lower.data() + i);
            if (!starts_.test(slot(k))) continue;
            for (const auto& [pk, p] : long_) {
                if (pk == k && lower.substr(i).starts_with(p)) return true;
            }
        }
        return false;
    }

private:
    static std::uint32_t prefix(const char* p) {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    static std::size_t slot(std::uint32_t k) { return (k * 0x9E3779B1u) >> 16; }

    std::vector<std::string> short_;
    std::vector<std::pair<std::uint32_t, std::string>> long_;
    std::bitset<65536> starts_;
};

std::optional<LineRule> line_rule_with(std::string_view line, const FilterConfig& cfg,
                                       const PhraseMatcher& phrases, std::string& lower) {
    if (has_long_word(line, cfg.max_word_chars)) return LineRule::long_word;
    lower.assign(line);
    for (auto& c : lower) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    if (lower.find("javascript") != std::string::npos) return LineRule::javascript;
    if (phrases.matches(lower)) return LineRule::policy_phrase;
    if (text::count_words(line, 2) < 2 && !cfg.is_terminal(text::last_non_space(line))) {
        return LineRule::too_few_words;
    }
    if (has_citation_marker(lower)) return LineRule::citation;
    return std::nullopt;
}

} // namespace

std::optional<LineRule> line_rule(std::string_view line, const FilterConfig& cfg) {
    std::string lower;
    return line_rule_with(line, cfg, PhraseMatcher(cfg), lower);
}

LineScrub filter_lines(const Document& doc, const FilterConfig& cfg) {
    const PhraseMatcher phrases(cfg);
    std::string lower;
    std::vector<std::string_view> kept;
    std::size_t removed = 0;
    for_each_line(doc.text(), [&](std::string_view line) {
        if (line_rule_with(line, cfg, phrases, lower)) {
            ++removed;
        } else {
            kept.push_back(line);
        }
    });
    LineScrub out{doc, removed};
    if (removed > 0) {
        std::string joined;
        joined.reserve(doc.text().size());
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (i > 0) joined.push_back('\n');
            joined.append(kept[i]);
        }
        out.doc.set_text(std::move(joined));
    }
    return out;
}

double char_duplicate_ratio(std::string_view text) { return profile(text, FilterConfig{}).dup_ratio(); }

double terminal_punct_line_ratio(std::string_view text, const FilterConfig& cfg) {
    return profile(text, cfg).punct_ratio();
}

double arabic_alpha_ratio(std::string_view text) { return profile(text, FilterConfig{}).arabic_ratio(); }

double short_line_ratio(std::string_view text, const FilterConfig& cfg) {
    return profile(text, cfg).short_ratio();
}

double bullet_line_ratio(std::string_view text) { return profile(text, FilterConfig{}).bullet_ratio(); }

double newlines_per_word(std::string_view text) { return profile(text, FilterConfig{}).newline_ratio(); }

RepetitionFlags repetition_flags(std::string_view text, const FilterConfig& cfg) {
    const Profile p = profile(text, cfg);
    return {p.excessive, p.lorem, p.alpha == 0};
}

FilterVerdict evaluate_document(const Document& doc, const FilterConfig& cfg) {
    const Profile p = profile(doc.text(), cfg);
    for (std::size_t i = 0; i < kReasonCount; ++i) {
        const auto r = static_cast<Reason>(i);
        if (fails(r, p, cfg)) return FilterVerdict::reject(r);
    }
    return FilterVerdict::keep();
}

std::vector<Reason> failing_checks(const Document& doc, const FilterConfig& cfg) {
    const Profile p = profile(doc.text(), cfg);
    std::vector<Reason> out;
    for (std::size_t i = 0; i < kReasonCount; ++i) {
        const auto r = static_cast<Reason>(i);
        if (fails(r, p, cfg)) out.push_back(r);
    }
    return out;
}

void SourceFilterStats::merge(const SourceFilterStats& o) {
    input_docs += o.input_docs;
    output_docs += o.output_docs;
    input_units += o.input_units;
    output_units += o.output_units;
    removed_lines += o.removed_lines;
    malformed += o.malformed;
    for (std::size_t i = 0; i < kReasonCount; ++i) reasons[i] += o.reasons[i];
}

void FilterStats::merge(const FilterStats& o) {
    for (const auto& name : o.source_order) {
        if (std::find(source_order.begin(), source_order.end(), name) == source_order.end()) {
            source_order.push_back(name);
        }
    }
    for (const auto& [name, s] : o.sources) sources[name].merge(s);
}

SourceFilterStats FilterStats::total() const {
    SourceFilterStats t;
    for (const auto& [name, s] : sources) t.merge(s);
    return t;
}

namespace {

nlohmann::json source_stats_json(const SourceFilterStats& s) {
    nlohmann::json reasons = nlohmann::json::object();
    std::optional<Reason> primary;
    for (Reason r : kReportOrder) {
        const auto n = s.reasons[static_cast<std::size_t>(r)];
        reasons[std::string(reason_name(r))] = n;
        if (n > 0 && (!primary || n > s.reasons[static_cast<std::size_t>(*primary)])) primary = r;
    }
    const double drop = s.input_docs == 0 ? 0.0 : static_cast<double>(s.removed()) / s.input_docs;
    return {
        {"input_docs", s.input_docs},
        {"output_docs", s.output_docs},
        {"input_units", s.input_units},
        {"output_units", s.output_units},
        {"removed_lines", s.removed_lines},
        {"malformed", s.malformed},
        {"drop_rate", drop},
        {"primary_cause", primary ? nlohmann::json(std::string(reason_name(*primary))) : nlohmann::json()},
        {"reasons", reasons},
    };
}

SourceFilterStats source_stats_from_json(const nlohmann::json& j) {
    SourceFilterStats s;
    s.input_docs = j.at("input_docs").get<std::uint64_t>();
    s.output_docs = j.at("output_docs").get<std::uint64_t>();
    s.input_units = j.at("input_units").get<std::uint64_t>();
    s.output_units = j.at("output_units").get<std::uint64_t>();
    s.removed_lines = j.value("removed_lines", std::uint64_t{0});
    s.malformed = j.value("malformed", std::uint64_t{0});
    for (const auto& [name, n] : j.at("reasons").items()) {
        if (auto r = parse_reason(name)) s.reasons[static_cast<std::size_t>(*r)] = n.get<std::uint64_t>();
    }
    return s;
}

} // namespace

nlohmann::json FilterStats::to_json() const {
    nlohmann::json src = nlohmann::json::array();
    for (const auto& name : source_order) {
        auto j = source_stats_json(sources.at(name));
        j["name"] = name;
        src.push_back(std::move(j));
    }
    const SourceFilterStats t = total();
    nlohmann::json table = nlohmann::json::array();
    for (Reason r : kReportOrder) {
        table.push_back({{"reason", std::string(reason_name(r))},
                         {"label", std::string(reason_label(r))},
                         {"docs", t.reasons[static_cast<std::size_t>(r)]}});
    }
    return {
        {"stage", "filter"},
        {"unit", unit_label},
        {"sources", src},
        {"total", source_stats_json(t)},
        {"removals", table},
    };
}

FilterStats FilterStats::from_json(const nlohmann::json& j) {
    try {
        FilterStats stats;
        stats.unit_label = j.at("unit").get<std::string>();
        for (const auto& s : j.at("sources")) {
            const auto name = s.at("name").get<std::string>();
            stats.source_order.push_back(name);
            stats.sources[name] = source_stats_from_json(s);
        }
        return stats;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid filter stats: ") + e.what());
    }
}

std::string shard_file_name(std::size_t index, bool compress) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "shard-%05zu.jsonl%s", index, compress ? ".gz" : "");
    return buf;
}

FilterStageResult run_filter_stage(const FilterStageOptions& options) {
    options.config.validate();
    if (options.inputs.empty()) throw UsageError("filter stage needs at least one input source");

    struct Task {
        std::string source;
        std::string path;
        std::size_t source_shard = 0;
    };
    std::vector<Task> tasks;
    std::vector<std::string> order;
    for (const auto& in : options.inputs) {
        if (in.name.empty()) throw UsageError("source name must not be empty");
        if (std::find(order.begin(), order.end(), in.name) != order.end()) {
            throw UsageError("duplicate source name: " + in.name);
        }
        order.push_back(in.name);
        const auto paths = expand_glob(in.pattern);
        for (std::size_t i = 0; i < paths.size(); ++i) tasks.push_back({in.name, paths[i], i});
    }

    clear_stage_shards(options.output_dir);

    std::vector<SourceFilterStats> partial(tasks.size());
    std::vector<ShardManifest> manifests(tasks.size());
    parallel_for(tasks.size(), options.threads, [&](std::size_t i) {
        const Task& task = tasks[i];
        ReadOptions ro;
        ro.source = task.source;
        ro.required_field = options.unit.field;
        const auto name = shard_file_name(i, options.compress);
        ShardWriter writer((fs::path(options.output_dir) / name).string(), options.unit);
        SourceFilterStats& st = partial[i];
        const ReadStats rs = read_shard(task.path, task.source_shard, ro, [&](Document&& doc) {
            ++st.input_docs;
            st.input_units += options.unit.of(doc);
            LineScrub scrub = filter_lines(doc, options.config);
            st.removed_lines += scrub.removed_lines;
            const FilterVerdict v = evaluate_document(scrub.doc, options.config);
            if (v.kept) {
                ++st.output_docs;
                st.output_units += options.unit.of(scrub.doc);
                writer.write(scrub.doc);
            } else {
                ++st.reasons[static_cast<std::size_t>(*v.reason)];
            }
        });
        st.malformed = rs.malformed;
        manifests[i] = writer.commit();
        manifests[i].shard_paths = {name};
        manifests[i].malformed = rs.malformed;
    });

    FilterStageResult result;
    result.stats.unit_label = options.unit.label();
    result.stats.source_order = order;
    for (const auto& name : order) result.stats.sources[name];
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        result.stats.sources[tasks[i].source].merge(partial[i]);
        result.manifest.merge(manifests[i]);
    }
    result.manifest.save((fs::path(options.output_dir) / "manifest.json").string());
    write_file_atomic((fs::path(options.output_dir) / "stats.json").string(),
                      result.stats.to_json().dump(2) + "\n");
    return result;
}

} // namespace curate
