#include "document.hpp"

#include "error.hpp"
#include "utf8.hpp"

namespace curate {

UnitCounts count_units(std::string_view text) noexcept {
    UnitCounts counts;
    bool in_word = false;
    std::size_t newlines = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        const char32_t c = text::next_scalar(text, pos);
        ++counts.chars;
        if (c == U'\n') ++newlines;
        const bool space = text::is_space(c);
        if (!space && !in_word) ++counts.words;
        in_word = !space;
    }
    counts.lines = newlines + ((!text.empty() && text.back() != '\n') ? 1 : 0);
    return counts;
}

Document::Document(std::string id, std::string text, std::string source, nlohmann::json extra)
    : id_(std::move(id)), text_(std::move(text)), source_(std::move(source)),
      extra_(std::move(extra)), counts_(count_units(text_)) {}

void Document::set_text(std::string text) {
    text_ = std::move(text);
    counts_ = count_units(text_);
}

CountUnit CountUnit::parse(std::string_view spec) {
    if (spec.empty() || spec == "words") return words();
    if (spec == "id" || spec == "text" || spec == "source") {
        throw UsageError("count unit field cannot be a reserved record field: " + std::string(spec));
    }
    return from_field(std::string(spec));
}

std::uint64_t CountUnit::of(const Document& doc) const {
    if (is_words()) return doc.counts().words;
    const auto it = doc.extra().find(field);
    const bool valid = it != doc.extra().end() &&
                       (it->is_number_unsigned() ||
                        (it->is_number_integer() && it->get<std::int64_t>() >= 0));
    if (!valid) {
        throw DataError("document " + doc.id() + " lacks a non-negative integer '" + field + "' field");
    }
    return it->get<std::uint64_t>();
}

} // namespace curate
