#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace curate {

struct UnitCounts {
    std::size_t chars = 0;
    std::size_t words = 0;
    std::size_t lines = 0;

    friend bool operator==(const UnitCounts&, const UnitCounts&) = default;
};

// chars: Unicode scalars. words: maximal non-whitespace runs. lines:
// newline-separated segments, not counting a trailing empty segment.
UnitCounts count_units(std::string_view text) noexcept;

// One text record. Counts are derived from the text and recomputed whenever
// it changes. Fields other than id/text/source ride along in `extra`.
class Document {
public:
    Document() = default;
    Document(std::string id, std::string text, std::string source,
             nlohmann::json extra = nlohmann::json::object());

    const std::string& id() const noexcept { return id_; }
    const std::string& text() const noexcept { return text_; }
    const std::string& source() const noexcept { return source_; }
    const UnitCounts& counts() const noexcept { return counts_; }
    const nlohmann::json& extra() const noexcept { return extra_; }
    nlohmann::json& extra() noexcept { return extra_; }

    void set_text(std::string text);
    void set_source(std::string source) { source_ = std::move(source); }

    friend bool operator==(const Document& a, const Document& b) {
        return a.id_ == b.id_ && a.text_ == b.text_ && a.source_ == b.source_ &&
               a.extra_ == b.extra_;
    }

private:
    std::string id_;
    std::string text_;
    std::string source_;
    nlohmann::json extra_ = nlohmann::json::object();
    UnitCounts counts_;
};

// What a report counts. Whitespace words unless `field` names a numeric
// passthrough field carrying an externally computed count (e.g. tokens).
struct CountUnit {
    std::string field;

    static CountUnit words() { return {}; }
    static CountUnit from_field(std::string name) { return {std::move(name)}; }
    static CountUnit parse(std::string_view spec);

    bool is_words() const noexcept { return field.empty(); }
    std::string label() const { return is_words() ? "words" : field; }

    // Throws DataError when the passthrough field is missing or not a
    // non-negative integer.
    std::uint64_t of(const Document& doc) const;
};

} // namespace curate
