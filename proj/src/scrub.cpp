#include "cmrx/scrub.hpp"

#include <cctype>

namespace cmrx {
namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool iequal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

}  // namespace

bool line_has_phi(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size()) {
    if (!is_word_char(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && is_word_char(static_cast<unsigned char>(line[j]))) ++j;
    const auto word = line.substr(i, j - i);
    for (auto kw : kPhiKeywords)
      if (iequal(word, kw)) return true;
    i = j;
  }
  return false;
}

std::string scrub_phi(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool first = true;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    const bool last = nl == std::string_view::npos;
    auto line = text.substr(pos, last ? std::string_view::npos : nl - pos);
    if (last && line.empty() && pos == text.size() && pos != 0) break;  // trailing newline
    if (!line_has_phi(line)) {
      if (!first) out += '\n';
      out += line;
      first = false;
    }
    if (last) break;
    pos = nl + 1;
  }
  if (!first && text.back() == '\n') out += '\n';
  return out;
}

}  // namespace cmrx
