#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vpsim::text {

// Lowercase (ASCII), trim, and collapse runs of internal whitespace to a
// single space. Idempotent.
std::string normalize(std::string_view s);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Splits one line of delimited text. Double-quoted fields may contain the
// delimiter; "" inside quotes is a literal quote.
std::vector<std::string> split_delimited(std::string_view line, char delimiter);

// Plain split with no quoting rules.
std::vector<std::string> split(std::string_view s, char delimiter);

// Words for lexicon matching: lowercase runs of letters, digits and
// apostrophes. Curly apostrophes are folded to '\''.
std::vector<std::string> words(std::string_view s);

// Cuts to at most max_bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view s, std::size_t max_bytes);

// Replaces every {{name}} with vars[name]. Throws Error(invalid_argument)
// on a placeholder with no binding or an unterminated "{{".
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& vars);

// Non-empty, non-comment ('#') trimmed lines.
std::vector<std::string> catalog_lines(std::string_view content);

std::string read_file(const std::string& path);

}  // namespace vpsim::text
