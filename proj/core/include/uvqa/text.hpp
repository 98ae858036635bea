#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace uvqa {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& words, std::string_view sep = " ");

/// Word-cloud style tokenization: lowercase, drop every ASCII punctuation
/// character, split on whitespace. "What what WHAT?" -> {what, what, what}.
std::vector<std::string> normalize_words(std::string_view s);

/// Answer comparison form: lowercase, trim, collapse whitespace runs, strip
/// leading and trailing ASCII punctuation from each word. Words that become
/// empty are dropped. " STOP " -> "stop", "30." -> "30".
std::string normalize_answer(std::string_view s);

}  // namespace uvqa
