// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/prompts.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pipeforge/error.hpp"

namespace pipeforge {

namespace {

bool is_placeholder_char(char c) {
  return std::islower(static_cast<unsigned char>(c)) != 0 || c == '_' || c == ' ';
}

// Finds the next "<token>" at or after `from`; returns npos when none.
std::size_t next_placeholder(const std::string& body, std::size_t from, std::size_t& end) {
  for (auto open = body.find('<', from); open != std::string::npos; open = body.find('<', open + 1)) {
    std::size_t i = open + 1;
    while (i < body.size() && is_placeholder_char(body[i])) {
      ++i;
    }
    if (i < body.size() && body[i] == '>' && i > open + 1 && body[open + 1] != ' ' &&
        body[i - 1] != ' ') {
      end = i + 1;
      return open;
    }
  }
  return std::string::npos;
}

std::string_view or_sentinel(std::string_view text) {
  return text.empty() ? kEmptySentinel : text;
}

bool is_separator(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0 || c == ':' || c == '=';
}

bool is_edge_punct(char c) {
  static constexpr std::string_view kPunct = "*_`'\"()[]{}.,;!?<>#";
  return kPunct.find(c) != std::string_view::npos;
}

// Number-looking token: optional sign, digits, optional fraction/exponent.
bool looks_numeric(std::string_view token) {
  std::size_t i = 0;
  if (i < token.size() && (token[i] == '+' || token[i] == '-')) {
    ++i;
  }
  bool digits = false;
  while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i])) != 0) {
    ++i;
    digits = true;
  }
  if (i < token.size() && token[i] == '.') {
    ++i;
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i])) != 0) {
      ++i;
      digits = true;
    }
  }
  if (digits && i < token.size() && (token[i] == 'e' || token[i] == 'E')) {
    ++i;
    if (i < token.size() && (token[i] == '+' || token[i] == '-')) {
      ++i;
    }
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i])) != 0) {
      ++i;
    }
  }
  return digits && i == token.size();
}

std::optional<std::size_t> plain_index(std::string_view token) {
  if (token.empty() || token.size() > 9) {
    return std::nullopt;
  }
  for (char c : token) {
    if (std::isdigit(static_cast<unsigned char>(c)) == 0) {
      return std::nullopt;
    }
  }
  std::size_t value = 0;
  std::from_chars(token.data(), token.data() + token.size(), value);
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())) != 0) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())) != 0) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string body) : body_(std::move(body)) {
  std::size_t end = 0;
  for (auto pos = next_placeholder(body_, 0, end); pos != std::string::npos;
       pos = next_placeholder(body_, end, end)) {
    placeholders_.insert(body_.substr(pos, end - pos));
  }
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(fmt::format("cannot open prompt template {}", path.string()));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return PromptTemplate(buffer.str());
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  for (const auto& token : placeholders_) {
    if (values.find(token) == values.end()) {
      throw ConfigError(fmt::format("prompt placeholder {} was not supplied", token));
    }
  }
  std::string out;
  out.reserve(body_.size());
  std::size_t pos = 0;
  std::size_t end = 0;
  for (auto open = next_placeholder(body_, 0, end); open != std::string::npos;
       open = next_placeholder(body_, end, end)) {
    out.append(body_, pos, open - pos);
    out += values.at(body_.substr(open, end - open));
    pos = end;
  }
  out.append(body_, pos);
  return out;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  return TemplateSet{PromptTemplate::load(dir / "action_type_selection.txt"),
                     PromptTemplate::load(dir / "object_selection.txt"),
                     PromptTemplate::load(dir / "memory_update.txt")};
}

std::filesystem::path TemplateSet::default_directory() {
  if (const char* env = std::getenv("PIPEFORGE_TEMPLATE_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
#ifdef PIPEFORGE_SOURCE_TEMPLATE_DIR
  if (std::filesystem::exists(PIPEFORGE_SOURCE_TEMPLATE_DIR)) {
    return PIPEFORGE_SOURCE_TEMPLATE_DIR;
  }
#endif
#ifdef PIPEFORGE_INSTALLED_TEMPLATE_DIR
  return PIPEFORGE_INSTALLED_TEMPLATE_DIR;
#else
  return "templates";
#endif
}

std::string numbered_list(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) {
      out += '\n';
    }
    out += fmt::format("{}: {}", i, items[i]);
  }
  return out;
}

std::string render_type_prompt(const PromptTemplate& tmpl, std::string_view memory,
                               std::span<const std::string> action_types) {
  if (action_types.empty()) {
    throw ConfigError("cannot render an action-type prompt without action types");
  }
  return tmpl.render({{"<reflection>", std::string(or_sentinel(memory))},
                      {"<action_types>", numbered_list(action_types)}});
}

std::string render_object_prompt(const PromptTemplate& tmpl, std::string_view memory,
                                 std::span<const SlotCandidates> slots) {
  std::string blocks;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].labels.empty()) {
      throw ConfigError(fmt::format("object slot {} ({}) has no candidates", s, slots[s].kind));
    }
    if (s > 0) {
      blocks += "\n\n";
    }
    blocks += fmt::format("Object type {}: {}\n{}", s, slots[s].kind, numbered_list(slots[s].labels));
  }
  return tmpl.render({{"<reflection>", std::string(or_sentinel(memory))}, {"<object_cands>", blocks}});
}

std::size_t parse_type_selection(std::string_view text, std::size_t n_types) {
  std::optional<std::string_view> last;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && is_separator(text[pos])) {
      ++pos;
    }
    const auto start = pos;
    while (pos < text.size() && !is_separator(text[pos])) {
      ++pos;
    }
    auto token = text.substr(start, pos - start);
    while (!token.empty() && is_edge_punct(token.front())) {
      token.remove_prefix(1);
    }
    while (!token.empty() && is_edge_punct(token.back())) {
      token.remove_suffix(1);
    }
    if (looks_numeric(token)) {
      last = token;
    }
  }
  if (!last) {
    throw ParseError("no action type number found", std::string(text));
  }
  auto index = plain_index(*last);
  if (!index) {
    throw ParseError(fmt::format("'{}' is not a nonnegative integer", *last), std::string(text));
  }
  if (*index >= n_types) {
    throw ParseError(fmt::format("action type {} is out of range [0, {})", *index, n_types),
                     std::string(text));
  }
  return *index;
}

std::vector<std::size_t> parse_object_selection(std::string_view text,
                                                std::span<const std::size_t> slot_sizes) {
  const auto open = text.rfind("[[");
  if (open == std::string_view::npos) {
    throw ParseError("no [[ ... ]] selection found", std::string(text));
  }
  const auto close = text.find("]]", open + 2);
  if (close == std::string_view::npos) {
    throw ParseError("unterminated [[ ... ]] selection", std::string(text));
  }
  const auto inner = text.substr(open + 2, close - open - 2);
  std::vector<std::size_t> indices;
  std::size_t pos = 0;
  while (true) {
    const auto comma = inner.find(',', pos);
    const auto item = trim(inner.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                             : comma - pos));
    auto value = plain_index(item);
    if (!value) {
      throw ParseError(fmt::format("'{}' is not an object index", item), std::string(text));
    }
    indices.push_back(*value);
    if (comma == std::string_view::npos) {
      break;
    }
    pos = comma + 1;
  }
  if (indices.size() != slot_sizes.size()) {
    throw ParseError(fmt::format("expected {} object indices, got {}", slot_sizes.size(), indices.size()),
                     std::string(text));
  }
  for (std::size_t s = 0; s < indices.size(); ++s) {
    if (indices[s] >= slot_sizes[s]) {
      throw ParseError(fmt::format("object index {} for slot {} is out of range [0, {})", indices[s], s,
                                   slot_sizes[s]),
                       std::string(text));
    }
  }
  return indices;
}

std::string format_object_selection(std::span<const std::size_t> indices) {
  return fmt::format("[[{}]]", fmt::join(indices, ", "));
}

}  // namespace pipeforge
