#include "caol/kvconfig.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace caol {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    out.entries.emplace_back(key, value);
  }
  return out;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument(path + ": cannot open config file");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string KeyValueConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [key, value] : entries) os << key << " = " << value << "\n";
  return os.str();
}

}  // namespace caol
