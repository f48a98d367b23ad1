#pragma once

#include <string>
#include <utility>
#include <vector>

namespace caol {

/// Flat key = value configuration. Grammar: one `key = value` pair per
/// line ('=' required, whitespace around tokens ignored), '#' starts a
/// comment, blank lines allowed. Keys are long option names without the
/// leading dashes. parse(serialize(parse(text))) == parse(text).
struct KeyValueConfig {
  std::vector<std::pair<std::string, std::string>> entries;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);
  std::string serialize() const;

  bool operator==(const KeyValueConfig&) const = default;
};

}  // namespace caol
