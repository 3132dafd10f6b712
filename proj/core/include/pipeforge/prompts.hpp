// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pipeforge {

/// Text with `<token>` placeholders. Rendering substitutes values verbatim in
/// a single pass, so placeholder-like text inside a value is left alone.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string body);

  static PromptTemplate load(const std::filesystem::path& path);

  const std::string& body() const { return body_; }
  const std::set<std::string>& placeholders() const { return placeholders_; }

  /// Throws ConfigError unless every placeholder in the body has a value.
  std::string render(const std::map<std::string, std::string>& values) const;

 private:
  std::string body_;
  std::set<std::string> placeholders_;
};

/// The three agent prompts.
struct TemplateSet {
  PromptTemplate type_selection;
  PromptTemplate object_selection;
  PromptTemplate memory_update;

  /// Loads action_type_selection.txt, object_selection.txt and
  /// memory_update.txt from `dir`.
  static TemplateSet load(const std::filesystem::path& dir);

  /// Directory holding the shipped templates: $PIPEFORGE_TEMPLATE_DIR, then
  /// the source tree, then the install prefix.
  static std::filesystem::path default_directory();
};

/// Literal used for an empty memory or an empty results block.
inline constexpr std::string_view kEmptySentinel = "None";

struct SlotCandidates {
  std::string kind;
  std::vector<std::string> labels;
};

/// "0: name\n1: name..." (no trailing newline).
std::string numbered_list(std::span<const std::string> items);

std::string render_type_prompt(const PromptTemplate& tmpl, std::string_view memory,
                               std::span<const std::string> action_types);

/// One block per slot: a header "Object type <i>: <kind>" followed by the
/// numbered candidates; blocks are separated by a blank line.
std::string render_object_prompt(const PromptTemplate& tmpl, std::string_view memory,
                                 std::span<const SlotCandidates> slots);

/// The last number in `text` must be a plain integer in [0, n_types).
std::size_t parse_type_selection(std::string_view text, std::size_t n_types);

/// The last "[[i, j, ...]]" group in `text`, one in-range index per slot.
std::vector<std::size_t> parse_object_selection(std::string_view text,
                                                std::span<const std::size_t> slot_sizes);

/// "[[1, 0, 2]]".
std::string format_object_selection(std::span<const std::size_t> indices);

}  // namespace pipeforge
