#include "planfactory/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "planfactory/common.hpp"

namespace planfactory {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<std::string> KeyValueFile::Section::get(std::string_view key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  return std::nullopt;
}

KeyValueFile KeyValueFile::parse(std::string_view text) {
  KeyValueFile out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string_view::npos) {
      out.add_section(std::string(trim(line.substr(1, line.size() - 2))));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw IoError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    if (out.sections_.empty()) out.add_section("");
    out.sections_.back().entries.emplace_back(std::string(trim(line.substr(0, eq))),
                                              std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const KeyValueFile::Section* KeyValueFile::find(std::string_view name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

std::vector<const KeyValueFile::Section*> KeyValueFile::find_all(std::string_view name) const {
  std::vector<const Section*> out;
  for (const auto& s : sections_)
    if (s.name == name) out.push_back(&s);
  return out;
}

KeyValueFile::Section& KeyValueFile::add_section(std::string name) {
  sections_.push_back(Section{std::move(name), {}});
  return sections_.back();
}

std::string KeyValueFile::dump() const {
  std::string out;
  for (const auto& s : sections_) {
    if (!s.name.empty()) out += "[" + s.name + "]\n";
    for (const auto& [k, v] : s.entries) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

std::vector<double> parse_numbers(std::string_view value) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < value.size()) {
    char c = value[i];
    bool starts = std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
    if (!starts) {
      ++i;
      continue;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data() + i, value.data() + value.size(), v);
    if (ec != std::errc{}) {
      ++i;
      continue;
    }
    i = static_cast<std::size_t>(ptr - value.data());
    std::size_t j = i;
    while (j < value.size() && std::isalpha(static_cast<unsigned char>(value[j]))) ++j;
    std::string_view unit = value.substr(i, j - i);
    if (j < value.size() && value[j] == '%' && unit.empty()) {
      unit = "%";
      j = i + 1;
    }
    if (unit == "cm") v *= 1e-2;
    else if (unit == "mm") v *= 1e-3;
    else if (unit == "ms") v *= 1e-3;
    else if (unit == "%") v *= 1e-2;
    else if (unit == "k") v *= 1e3;
    else if (unit == "M") v *= 1e6;
    else if (unit == "m" || unit == "s" || unit.empty()) {
    } else {
      throw InvalidInput("unknown unit '" + std::string(unit) + "' in value: " + std::string(value));
    }
    out.push_back(v);
    i = j;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace planfactory
