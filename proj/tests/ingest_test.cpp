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

#include "poirec/ingest.hpp"

#include <random>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "poirec/error.hpp"

namespace poirec {
namespace {

const char* kThreeLines =
    "u1\tv1\tc1\tRamen /  Noodle House\t35.6938\t139.7034\t540\t"
    "Tue Apr 03 18:00:09 +0000 2012\n"
    "u1\tv2\tc2\tCafé\t35.70\t139.70\t540\tTue Apr 03 19:00:09 +0000 2012\n"
    "u2\tv1\tc1\tRamen /  Noodle House\t35.6938\t139.7034\t540\t"
    "2012-04-04T09:30:00+09:00\n";

CheckIn make(std::string user, std::string category) {
  CheckIn c;
  c.user_id = std::move(user);
  c.venue_id = "v";
  c.category_name = std::move(category);
  c.geo = GeoPoint(35.0, 139.0);
  return c;
}

TEST_CASE("parse well-formed check-ins") {
  std::istringstream in(kThreeLines);
  const auto r = parse_checkins(in);
  REQUIRE(r.checkins.size() == 3);
  CHECK(r.malformed.empty());
  CHECK(r.checkins[0].category_name == "Ramen /  Noodle House");
  CHECK(r.checkins[0].tz_offset_min == 540);
  CHECK(r.checkins[0].geo == GeoPoint(35.6938, 139.7034));
  CHECK(format_timestamp(r.checkins[0].timestamp_utc) ==
        "Tue Apr 03 18:00:09 +0000 2012");
  // ISO fallback with offset converts to UTC.
  CHECK(format_timestamp(r.checkins[2].timestamp_utc) ==
        "Wed Apr 04 00:30:00 +0000 2012");
}

TEST_CASE("malformed lines follow the line policy") {
  const std::string text = std::string(kThreeLines) +
                           "u3\tv3\tc3\tBar\t35.0\t139.0\t540\n" +
                           "u3\tv3\tc3\tBar\t95.0\t139.0\t540\t"
                           "Tue Apr 03 18:00:09 +0000 2012\n";
  std::istringstream in(text);
  const auto r = parse_checkins(in);
  CHECK(r.checkins.size() == 3);
  REQUIRE(r.malformed.size() == 2);
  CHECK(r.malformed[0].line == 4);
  CHECK(r.malformed[1].line == 5);
  CHECK(r.malformed[1].reason.find("range") != std::string::npos);

  std::istringstream again(text);
  try {
    parse_checkins(again, {LinePolicy::kAbort, true});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("timestamp parsing") {
  CHECK(parse_timestamp("Sat Feb 16 02:35:29 +0000 2013").has_value());
  CHECK(parse_timestamp("Sat Feb 16 11:35:29 +0900 2013") ==
        parse_timestamp("Sat Feb 16 02:35:29 +0000 2013"));
  CHECK_FALSE(parse_timestamp("Sat Feb 30 02:35:29 +0000 2013").has_value());
  CHECK_FALSE(parse_timestamp("Sat Feb 16 02:35:29 +0000 1969").has_value());
  CHECK_FALSE(parse_timestamp("Sat Feb 16 02:35:29 +0000 2100").has_value());
  CHECK_FALSE(parse_timestamp("2013-02-16T02:35:29Z", false).has_value());
  CHECK(parse_timestamp("2013-02-16T02:35:29Z") ==
        parse_timestamp("Sat Feb 16 02:35:29 +0000 2013"));
}

TEST_CASE("serialize then parse is stable") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-90.0, 90.0), lon(-180.0, 180.0);
  std::uniform_int_distribution<long long> t(0, 4102444799LL);
  std::ostringstream raw;
  for (int i = 0; i < 300; ++i) {
    CheckIn c = make("u" + std::to_string(i % 17), "Sushi Restaurant");
    c.venue_id = "4b" + std::to_string(rng() % 1000);
    c.category_id = "4bf58dd8d48988d1d2941735";
    c.geo = GeoPoint(lat(rng), lon(rng));
    c.tz_offset_min = static_cast<int>(rng() % 1441) - 720;
    c.timestamp_utc = Timestamp(std::chrono::seconds(t(rng)));
    serialize_checkins({c}, raw);
  }
  std::istringstream in1(raw.str());
  const auto first = parse_checkins(in1);
  REQUIRE(first.malformed.empty());
  std::ostringstream out;
  serialize_checkins(first.checkins, out);
  std::istringstream in2(out.str());
  const auto second = parse_checkins(in2);
  CHECK(second.checkins == first.checkins);
  CHECK(out.str() == raw.str());
}

TEST_CASE("category allowlist") {
  const auto food = CategoryAllowlist::food_categories();
  CHECK(food.size() == 80);
  CHECK(food.contains("Ramen /  Noodle House"));
  CHECK(food.contains("Café"));
  CHECK_FALSE(food.contains("Ramen / Noodle House"));
  CHECK_FALSE(food.contains("Train Station"));

  const std::vector<CheckIn> in{make("a", "Ramen /  Noodle House"),
                                make("a", "Train Station"),
                                make("b", "Café")};
  const auto kept = filter_by_category(in, food);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].category_name == "Ramen /  Noodle House");
  CHECK(kept[1].category_name == "Café");
  CHECK(filter_by_category(in, CategoryAllowlist({})).empty());

  std::istringstream file("# comment\nBar\n\nSushi Restaurant\n");
  CHECK(CategoryAllowlist::load(file).size() == 2);
  std::istringstream empty("");
  CHECK_THROWS_AS(CategoryAllowlist::load(empty), ConfigError);
  CHECK_THROWS_AS(CategoryAllowlist({"Bar", "Bar"}), ConfigError);
}

TEST_CASE("loyal user threshold") {
  std::vector<CheckIn> in;
  for (int i = 0; i < 99; ++i) in.push_back(make("short", "Bar"));
  for (int i = 0; i < 100; ++i) in.push_back(make("loyal", "Bar"));
  const auto out = filter_loyal_users(in, 100);
  CHECK(out.size() == 100);
  for (const auto& c : out) CHECK(c.user_id == "loyal");
  CHECK(filter_loyal_users(in, 1) == in);
  CHECK_THROWS_AS(filter_loyal_users(in, 0), ConfigError);
}

TEST_CASE("postal table in the Japan Post layout") {
  std::istringstream in(
      "13104,\"160  \",\"1600022\",\"ﾄｳｷｮｳﾄ\",\"ｼﾝｼﾞｭｸｸ\",\"ｼﾝｼﾞｭｸ\","
      "\"東京都\",\"新宿区\",\"新宿\",0,0,1,0,0,0\n"
      "13103,\"105  \",\"1050011\",\"ﾄｳｷｮｳﾄ\",\"ﾐﾅﾄｸ\",\"ｼﾊﾞｺｳｴﾝ\","
      "\"東京都\",\"旧名\",\"芝公園\",0,0,1,0,0,0\n"
      "13103,\"105  \",\"1050011\",\"ﾄｳｷｮｳﾄ\",\"ﾐﾅﾄｸ\",\"ｼﾊﾞｺｳｴﾝ\","
      "\"東京都\",\"港区\",\"芝公園\",0,0,1,0,0,0\n"
      "broken,row\n");
  const auto r = parse_postal_table(in);
  CHECK(r.table.size() == 2);
  CHECK(r.duplicate_keys == 1);
  CHECK(r.skipped_rows == 1);
  CHECK(municipality_of("160-0022", r.table) == "新宿区");
  CHECK(municipality_of("1050011", r.table) == "港区");

  std::istringstream empty("");
  CHECK(parse_postal_table(empty).table.empty());

  CHECK(split_csv_line("a,\"b,c\",\"d\"\"e\"") ==
        std::vector<std::string>{"a", "b,c", "d\"e"});
}

TEST_CASE("postal code extraction") {
  CHECK(extract_postal_code("日本、〒160-0022 東京都新宿区新宿３丁目") == "1600022");
  CHECK(extract_postal_code("Tokyo 1050011 Japan") == "1050011");
  CHECK(extract_postal_code("Building 12345678") == "");
  CHECK(extract_postal_code("no code") == "");
}

const char* kFixtures =
    R"({"lat":35.6938,"lon":139.7034,"postal_code":"160-0022","formatted":"〒160-0022 東京都新宿区新宿３丁目","name":"Ramen Ichiban","types":["food","meal_takeaway","establishment"]})"
    "\n"
    R"({"lat":35.6581,"lon":139.7017,"postal_code":"150-0043","formatted":"〒150-0043 東京都渋谷区道玄坂","name":"Nameless","types":[]})"
    "\n";

TEST_CASE("fixture geocoder") {
  std::istringstream in(kFixtures);
  auto backend = FixtureBackend::load(in);
  CHECK(backend->size() == 2);
  GeocoderClient client(std::move(backend));

  const Address a = reverse_geocode(client, GeoPoint(35.6938, 139.7034));
  CHECK(a.postal_code == "1600022");
  CHECK(reverse_geocode(client, GeoPoint(35.6938, 139.7034)) == a);
  CHECK(client.cache_hits() == 1);
  CHECK(client.backend_calls() == 1);
  // Rounding to 1e-6 degrees.
  CHECK(reverse_geocode(client, GeoPoint(35.69380004, 139.7034)) == a);

  const PlaceInfo p = resolve_place(client, a, "Ramen /  Noodle House");
  CHECK(p.name == "Ramen Ichiban");
  CHECK(p.types ==
        std::vector<std::string>{"food", "meal_takeaway", "establishment"});

  const Address b = reverse_geocode(client, GeoPoint(35.6581, 139.7017));
  CHECK(resolve_place(client, b, "Bar").types.empty());

  CHECK_THROWS_AS(reverse_geocode(client, GeoPoint(0.0, 0.0)), LookupMiss);
  CHECK_THROWS_AS(resolve_place(client, Address{"1000001", "nowhere"}, "Bar"),
                  LookupMiss);

  std::istringstream bad("{\"lat\": 1}\n");
  CHECK_THROWS_AS(FixtureBackend::load(bad), ParseError);
}

TEST_CASE("http geocoder against a local server") {
  httplib::Server server;
  int failures_left = 1;
  server.Get("/reverse", [&](const httplib::Request& req, httplib::Response& res) {
    if (failures_left-- > 0) {
      res.status = 503;
      return;
    }
    if (req.get_param_value("key") != "secret") {
      res.status = 403;
      return;
    }
    if (req.get_param_value("lat").rfind("35.69", 0) != 0) {
      res.status = 404;
      return;
    }
    res.set_content(R"({"postal_code":"160-0022","formatted":"東京都新宿区"})",
                    "application/json");
  });
  server.Get("/place", [](const httplib::Request& req, httplib::Response& res) {
    const std::string body = std::string(R"({"name":"At )") +
                             req.get_param_value("address") +
                             R"(","types":["food"]})";
    res.set_content(body, "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  if (port <= 0) {
    MESSAGE("cannot bind a local port; skipping");
    return;
  }
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.api_key = "secret";
  config.timeout_ms = 2000;
  config.max_retries = 2;
  HttpBackend http(config);

  const Address a = http.reverse_geocode(GeoPoint(35.6938, 139.7034));
  CHECK(a.postal_code == "1600022");
  CHECK(http.resolve_place(a, "Café").name == "At 東京都新宿区");
  CHECK_THROWS_AS(http.reverse_geocode(GeoPoint(10.0, 10.0)), LookupMiss);

  config.api_key = "wrong";
  config.max_retries = 1;
  HttpBackend unauthorized(config);
  try {
    unauthorized.reverse_geocode(GeoPoint(35.6938, 139.7034));
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.retries() == 1);
  }

  server.stop();
  worker.join();

  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.max_retries = 0;
  CHECK_THROWS_AS(HttpBackend(config).reverse_geocode(GeoPoint(35.0, 139.0)),
                  TransportError);
}

}  // namespace
}  // namespace poirec
