// Copyright 2026 The poirec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "poirec/error.hpp"
#include "poirec/ingest.hpp"

namespace poirec {

namespace {

using nlohmann::json;

std::string describe(const GeoPoint& p) {
  return "(" + std::to_string(p.lat()) + ", " + std::to_string(p.lon()) + ")";
}

std::vector<std::string> string_list(const json& j) {
  std::vector<std::string> out;
  if (j.is_null()) return out;
  for (const auto& t : j) out.push_back(t.get<std::string>());
  return out;
}

Address make_address(const std::string& postal, const std::string& formatted) {
  std::string code = normalize_postal_code(postal);
  if (code.empty()) code = extract_postal_code(formatted);
  if (code.empty()) {
    throw ValidationError("no postal code in address '" + formatted + "'");
  }
  return {code, formatted};
}

std::string url_encode(std::string_view s) {
  static const char* kHex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 15]);
    }
  }
  return out;
}

}  // namespace

std::string extract_postal_code(std::string_view s) {
  auto digit = [&](std::size_t i) {
    return i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]));
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!digit(i) || (i > 0 && digit(i - 1))) continue;
    std::size_t n = 0;
    while (digit(i + n)) ++n;
    if (n == 3 && i + 3 < s.size() && s[i + 3] == '-') {
      std::size_t m = 0;
      while (digit(i + 4 + m)) ++m;
      if (m == 4) return std::string(s.substr(i, 3)) + std::string(s.substr(i + 4, 4));
    } else if (n == 7) {
      return std::string(s.substr(i, 7));
    }
  }
  return {};
}

PointKey point_key(const GeoPoint& p) {
  return {std::llround(p.lat() * 1e6), std::llround(p.lon() * 1e6)};
}

// ---------------------------------------------------------------------------

std::unique_ptr<FixtureBackend> FixtureBackend::load(std::istream& in) {
  auto backend = std::make_unique<FixtureBackend>();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const GeoPoint p(j.at("lat").get<double>(), j.at("lon").get<double>());
      const Address a = make_address(j.value("postal_code", ""),
                                     j.value("formatted", ""));
      backend->addresses_[point_key(p)] = a;
      if (j.contains("name")) {
        PlaceInfo place{j.at("name").get<std::string>(),
                        string_list(j.value("types", json::array()))};
        if (place.name.empty()) throw ValidationError("empty place name");
        if (j.contains("category")) {
          backend->places_by_category_[{a.formatted,
                                        j.at("category").get<std::string>()}] = place;
        } else {
          backend->places_[a.formatted] = std::move(place);
        }
      }
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return backend;
}

Address FixtureBackend::reverse_geocode(const GeoPoint& point) {
  const auto it = addresses_.find(point_key(point));
  if (it == addresses_.end()) {
    throw LookupMiss("no fixture address for point " + describe(point));
  }
  return it->second;
}

PlaceInfo FixtureBackend::resolve_place(const Address& address,
                                        std::string_view category_name) {
  const auto c = places_by_category_.find(
      {address.formatted, std::string(category_name)});
  if (c != places_by_category_.end()) return c->second;
  const auto it = places_.find(address.formatted);
  if (it == places_.end()) {
    throw LookupMiss("no fixture place for address '" + address.formatted + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------

HttpBackendConfig HttpBackendConfig::from_environment(int timeout_ms,
                                                      int max_retries) {
  HttpBackendConfig c;
  const char* base = std::getenv("GEOCODER_BASE_URL");
  if (base == nullptr || *base == '\0') {
    throw ConfigError("GEOCODER_BASE_URL is not set");
  }
  c.base_url = base;
  if (const char* key = std::getenv("GEOCODER_API_KEY")) c.api_key = key;
  c.timeout_ms = timeout_ms;
  c.max_retries = max_retries;
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("empty geocoder base URL");
  if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::string HttpBackend::get(const std::string& path) {
  httplib::Client client(config_.base_url);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  const std::string full =
      path + (config_.api_key.empty() ? "" : "&key=" + url_encode(config_.api_key));

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50 << (attempt - 1)));
    }
    const auto res = client.Get(full);
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 404) throw LookupMiss("geocoder miss: " + path);
    if (res->status == 200) return res->body;
    last_error = "HTTP status " + std::to_string(res->status);
  }
  throw TransportError(last_error, config_.max_retries);
}

Address HttpBackend::reverse_geocode(const GeoPoint& point) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "/reverse?lat=%.7f&lon=%.7f", point.lat(),
                point.lon());
  try {
    const json j = json::parse(get(buf));
    return make_address(j.value("postal_code", ""), j.value("formatted", ""));
  } catch (const json::exception& e) {
    throw TransportError(std::string("bad geocoder response: ") + e.what(), 0);
  }
}

PlaceInfo HttpBackend::resolve_place(const Address& address,
                                     std::string_view category_name) {
  const std::string path = "/place?address=" + url_encode(address.formatted) +
                           "&category=" + url_encode(category_name);
  try {
    const json j = json::parse(get(path));
    PlaceInfo p{j.at("name").get<std::string>(),
                string_list(j.value("types", json::array()))};
    if (p.name.empty()) throw LookupMiss("empty place name for " + address.formatted);
    return p;
  } catch (const json::exception& e) {
    throw TransportError(std::string("bad place response: ") + e.what(), 0);
  }
}

// ---------------------------------------------------------------------------

GeocoderClient::GeocoderClient(std::unique_ptr<GeocoderBackend> backend)
    : backend_(std::move(backend)) {
  if (!backend_) throw ConfigError("geocoder client needs a backend");
}

Address GeocoderClient::reverse_geocode(const GeoPoint& point) {
  const PointKey key = point_key(point);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = address_cache_.find(key); it != address_cache_.end()) {
      ++hits_;
      return it->second;
    }
    ++calls_;
  }
  Address a = backend_->reverse_geocode(point);
  std::lock_guard<std::mutex> lock(mu_);
  return address_cache_.emplace(key, std::move(a)).first->second;
}

PlaceInfo GeocoderClient::resolve_place(const Address& address,
                                        std::string_view category_name) {
  auto key = std::make_pair(address.formatted, std::string(category_name));
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = place_cache_.find(key); it != place_cache_.end()) {
      ++hits_;
      return it->second;
    }
    ++calls_;
  }
  PlaceInfo p = backend_->resolve_place(address, category_name);
  std::lock_guard<std::mutex> lock(mu_);
  return place_cache_.emplace(std::move(key), std::move(p)).first->second;
}

std::size_t GeocoderClient::cache_hits() const {
  std::lock_guard<std::mutex> lock(mu_);
  return hits_;
}

std::size_t GeocoderClient::backend_calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

Address reverse_geocode(GeocoderClient& client, const GeoPoint& point) {
  return client.reverse_geocode(point);
}

PlaceInfo resolve_place(GeocoderClient& client, const Address& address,
                        std::string_view category_name) {
  return client.resolve_place(address, category_name);
}

}  // namespace poirec
