#include "trackbench/json_reader.hpp"

#include <cmath>

namespace trackbench {

using nlohmann::json;

ObjectReader::ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) {
    throw Error(ErrorKind::InvalidConfig,
                (path_.empty() ? std::string("document") : path_) + " must be a JSON object");
  }
}

std::string ObjectReader::key_path(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

bool ObjectReader::has(const std::string& key) const {
  return j_.contains(key) && !j_.at(key).is_null();
}

const json& ObjectReader::required(const std::string& key) {
  seen_.insert(key);
  if (!has(key)) throw Error(ErrorKind::MissingKey, "missing required key " + key_path(key));
  return j_.at(key);
}

const json* ObjectReader::optional(const std::string& key) {
  seen_.insert(key);
  return has(key) ? &j_.at(key) : nullptr;
}

ObjectReader ObjectReader::object(const std::string& key) {
  return ObjectReader(required(key), key_path(key));
}

std::optional<ObjectReader> ObjectReader::optional_object(const std::string& key) {
  if (const auto* v = optional(key)) return ObjectReader(*v, key_path(key));
  return std::nullopt;
}

double ObjectReader::number(const std::string& key) {
  const auto& v = required(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    throw Error(ErrorKind::InvalidConfig, key_path(key) + " must be a finite number");
  }
  return v.get<double>();
}

double ObjectReader::number(const std::string& key, double fallback) {
  return has(key) ? number(key) : (seen_.insert(key), fallback);
}

std::optional<double> ObjectReader::optional_number(const std::string& key) {
  if (!has(key)) {
    seen_.insert(key);
    return std::nullopt;
  }
  return number(key);
}

long long ObjectReader::integer(const std::string& key) {
  const auto& v = required(key);
  if (!v.is_number_integer()) {
    throw Error(ErrorKind::InvalidConfig, key_path(key) + " must be an integer");
  }
  return v.get<long long>();
}

long long ObjectReader::integer(const std::string& key, long long fallback) {
  return has(key) ? integer(key) : (seen_.insert(key), fallback);
}

bool ObjectReader::boolean(const std::string& key, bool fallback) {
  const auto* v = optional(key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw Error(ErrorKind::InvalidConfig, key_path(key) + " must be a boolean");
  return v->get<bool>();
}

std::string ObjectReader::string(const std::string& key) {
  const auto& v = required(key);
  if (!v.is_string()) throw Error(ErrorKind::InvalidConfig, key_path(key) + " must be a string");
  return v.get<std::string>();
}

std::optional<std::string> ObjectReader::optional_string(const std::string& key) {
  if (!has(key)) {
    seen_.insert(key);
    return std::nullopt;
  }
  return string(key);
}

void ObjectReader::finish() const {
  for (const auto& item : j_.items()) {
    if (item.key().rfind("_comment", 0) == 0) continue;
    if (!seen_.count(item.key())) {
      throw Error(ErrorKind::UnknownKey, "unknown key " + key_path(item.key()));
    }
  }
}

}  // namespace trackbench
