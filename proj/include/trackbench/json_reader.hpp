#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "trackbench/error.hpp"

namespace trackbench {

// Strict reader over one JSON object. Keys are reported with their dotted
// path; finish() rejects anything that was never read. Keys starting with
// "_comment" are ignored.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path);

  bool has(const std::string& key) const;
  const nlohmann::json& required(const std::string& key);
  const nlohmann::json* optional(const std::string& key);
  ObjectReader object(const std::string& key);
  std::optional<ObjectReader> optional_object(const std::string& key);

  double number(const std::string& key);
  double number(const std::string& key, double fallback);
  std::optional<double> optional_number(const std::string& key);
  long long integer(const std::string& key);
  long long integer(const std::string& key, long long fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key);
  std::optional<std::string> optional_string(const std::string& key);

  std::string key_path(const std::string& key) const;
  void finish() const;

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace trackbench
