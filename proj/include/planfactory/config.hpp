#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace planfactory {

/// Plain-text configuration: `[section]` headers followed by `key = value`
/// lines. `#` starts a comment. Keys may contain spaces so hyper-parameter
/// tables can be pasted in with their original row names. Sections may
/// repeat (the chain file lists one `[joint]` section per joint).
class KeyValueFile {
 public:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    std::optional<std::string> get(std::string_view key) const;
    bool has(std::string_view key) const { return get(key).has_value(); }
  };

  static KeyValueFile parse(std::string_view text);
  static KeyValueFile load(const std::filesystem::path& path);

  const std::vector<Section>& sections() const { return sections_; }
  /// First section with this name, if any.
  const Section* find(std::string_view name) const;
  std::vector<const Section*> find_all(std::string_view name) const;

  std::string dump() const;
  Section& add_section(std::string name);

 private:
  std::vector<Section> sections_;
};

/// Extracts every number in a value string, ignoring brackets and commas.
/// Unit suffixes are converted to SI: `cm`, `mm`, `m`, `ms`, `s`, `%`, and the
/// multipliers `k`, `M`. Unknown suffixes throw InvalidInput.
std::vector<double> parse_numbers(std::string_view value);

/// Formats a double so that it parses back to the identical value.
std::string format_double(double v);

}  // namespace planfactory
