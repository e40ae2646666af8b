#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "exposcope/error.hpp"
#include "exposcope/pageviews.hpp"
#include "support/synthetic.hpp"

using namespace exposcope;
namespace chr = std::chrono;

namespace {

Date ymd(int y, unsigned m, unsigned d) { return Date{chr::year{y}, chr::month{m}, chr::day{d}}; }

AggregationWindow window(Date a, Date b) {
  AggregationWindow w;
  w.start = a;
  w.end = b;
  return w;
}

std::string body(Date first, const std::vector<std::int64_t>& views) {
  nlohmann::json items = nlohmann::json::array();
  auto day = chr::sys_days(first);
  for (auto v : views) {
    const auto s = format_date(Date(day));
    items.push_back({{"timestamp", s.substr(0, 4) + s.substr(5, 2) + s.substr(8, 2) + "00"}, {"views", v}});
    day += chr::days{1};
  }
  return nlohmann::json{{"items", items}}.dump();
}

class MapClient : public PageviewClient {
 public:
  std::map<std::string, PageviewResponse> responses;
  std::atomic<int> calls{0};
  PageviewResponse get(const std::string& title, const AggregationWindow&) override {
    ++calls;
    auto it = responses.find(title);
    return it == responses.end() ? PageviewResponse{404, "{}"} : it->second;
  }
};

FetchOptions fast() { return FetchOptions{3, chr::milliseconds(0), 1e6}; }

}  // namespace

TEST(Dates, ParseAndFormat) {
  EXPECT_EQ(parse_date("2015-07-01"), ymd(2015, 7, 1));
  EXPECT_EQ(parse_date("2015070100"), ymd(2015, 7, 1));
  EXPECT_EQ(parse_date("20240229"), ymd(2024, 2, 29));
  EXPECT_FALSE(parse_date("2023-02-29"));
  EXPECT_FALSE(parse_date("yesterday"));
  EXPECT_EQ(format_date(ymd(2024, 12, 31)), "2024-12-31");
}

TEST(Window, DefaultsAndValidation) {
  const AggregationWindow w;
  EXPECT_EQ(format_date(w.start), "2015-07-01");
  EXPECT_EQ(format_date(w.end), "2024-12-31");
  EXPECT_EQ(window(ymd(2020, 1, 1), ymd(2020, 1, 1)).days(), 1);
  EXPECT_THROW(window(ymd(2020, 1, 2), ymd(2020, 1, 1)).validate(), ConfigError);
}

TEST(Aggregate, SumsDailyCounts) {
  const auto w = window(ymd(2020, 1, 1), ymd(2020, 1, 3));
  const auto s = parse_pageview_body("X", body(ymd(2020, 1, 1), {5, 0, 7}), w);
  EXPECT_EQ(aggregate_pageviews(s, w), 12u);
  EXPECT_TRUE(s.complete());
  const auto empty = parse_pageview_body("X", R"({"items":[]})", w);
  EXPECT_EQ(aggregate_pageviews(empty, w), 0u);
  EXPECT_EQ(empty.missing_days, 3);
}

TEST(Aggregate, DaysOutsideWindowIgnored) {
  const auto w = window(ymd(2015, 7, 1), ymd(2015, 7, 15));
  std::vector<std::int64_t> v(45, 10);
  const auto s = parse_pageview_body("X", body(ymd(2015, 6, 1), v), w);
  EXPECT_EQ(aggregate_pageviews(s, w), 150u);
  EXPECT_EQ(s.daily.size(), 15u);
}

TEST(Aggregate, RejectsMalformedBodies) {
  const AggregationWindow w;
  EXPECT_THROW(parse_pageview_body("X", "not json", w), DomainError);
  EXPECT_THROW(parse_pageview_body("X", body(ymd(2020, 1, 1), {-1}), w), DomainError);
}

TEST(Aggregate, MatchesReferenceSumAndIsAdditive) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto first = ymd(2016, 1, 1);
    const auto n = 1 + rng() % 200;
    std::vector<std::int64_t> views(n);
    for (auto& v : views) v = static_cast<std::int64_t>(rng() % 100000);
    const auto start = chr::sys_days(first) + chr::days(rng() % n);
    const auto end = start + chr::days(rng() % (n + 10));
    const auto w = window(Date(start), Date(end));
    const auto s = parse_pageview_body("X", body(first, views), w);

    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto day = chr::sys_days(first) + chr::days(i);
      if (day >= start && day <= end) expected += views[i];
    }
    EXPECT_EQ(aggregate_pageviews(s, w), expected);

    const auto split = start + chr::days(rng() % ((end - start).count() + 1));
    if (split < end) {
      const auto left = window(Date(start), Date(split)), right = window(Date(split + chr::days(1)), Date(end));
      EXPECT_EQ(aggregate_pageviews(s, left) + aggregate_pageviews(s, right), expected);
    }
  }
}

TEST(Titles, UnderscoresAndOverrides) {
  EntityRecord e;
  e.qid = "Q90";
  e.label = "New York City";
  EXPECT_EQ(article_title(e), "New_York_City");
  EXPECT_EQ(article_title(e, {{"Q90", "NYC_(city)"}}), "NYC_(city)");
}

TEST(Fetcher, CachesOkAndNotFound) {
  fixture::TempDir dir("pv");
  MapClient client;
  const auto w = window(ymd(2020, 1, 1), ymd(2020, 1, 3));
  client.responses["A"] = {200, body(ymd(2020, 1, 1), {1, 2, 3})};
  PageviewFetcher fetcher(&client, dir.path(), fast());
  auto a = fetcher.fetch("A", w);
  ASSERT_EQ(a.status, PageviewFetch::Status::Ok);
  EXPECT_EQ(aggregate_pageviews(a.series, w), 6u);
  EXPECT_EQ(fetcher.fetch("B", w).status, PageviewFetch::Status::NotFound);
  EXPECT_EQ(client.calls, 2);

  // A second fetcher with no client serves both from the cache.
  PageviewFetcher offline(nullptr, dir.path(), fast());
  EXPECT_EQ(aggregate_pageviews(offline.fetch("A", w).series, w), 6u);
  EXPECT_EQ(offline.fetch("B", w).status, PageviewFetch::Status::NotFound);
  EXPECT_EQ(offline.fetch("C", w).status, PageviewFetch::Status::Unavailable);
  EXPECT_EQ(client.calls, 2);
}

TEST(Fetcher, CorruptCacheIsAnIntegrityError) {
  fixture::TempDir dir("pv");
  const AggregationWindow w;
  PageviewFetcher fetcher(nullptr, dir.path(), fast());
  std::filesystem::create_directories(dir.path());
  std::ofstream(fetcher.cache_path("A", w)) << "{broken";
  EXPECT_THROW(fetcher.fetch("A", w), IntegrityError);
}

TEST(Fetcher, HttpServerWithBackoff) {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Get(R"(/api/rest_v1/metrics/pageviews/per-article/en.wikipedia/all-access/user/([^/]+)/daily/(\d+)/(\d+))",
             [&](const httplib::Request& req, httplib::Response& res) {
               const auto title = req.matches[1].str();
               if (title == "Busy" && hits++ < 2) {
                 res.status = 429;
                 return;
               }
               if (title == "Missing") {
                 res.status = 404;
                 res.set_content(R"({"type":"not found"})", "application/json");
                 return;
               }
               if (title == "Broken") {
                 res.status = 500;
                 return;
               }
               EXPECT_EQ(req.matches[2].str(), "2020010100");
               EXPECT_EQ(req.matches[3].str(), "2020010300");
               res.set_content(body(ymd(2020, 1, 1), {5, 0, 7}), "application/json");
             });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  fixture::TempDir dir("pv");
  PageviewEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  HttpPageviewClient client(ep);
  PageviewFetcher fetcher(&client, dir.path(), FetchOptions{4, chr::milliseconds(1), 1000});
  const auto w = window(ymd(2020, 1, 1), ymd(2020, 1, 3));

  auto ok = fetcher.fetch("Busy", w);
  EXPECT_EQ(ok.status, PageviewFetch::Status::Ok);
  EXPECT_EQ(aggregate_pageviews(ok.series, w), 12u);
  EXPECT_EQ(hits, 3);
  EXPECT_EQ(fetcher.fetch("Missing", w).status, PageviewFetch::Status::NotFound);
  const auto broken = fetcher.fetch("Broken", w);
  EXPECT_EQ(broken.status, PageviewFetch::Status::Unavailable);
  EXPECT_EQ(broken.reason, "HTTP 500");

  server.stop();
  th.join();
}

TEST(Fetcher, RequestPathEncodesTitle) {
  HttpPageviewClient client(PageviewEndpoint{});
  EXPECT_EQ(client.request_path("AC/DC", window(ymd(2015, 7, 1), ymd(2024, 12, 31))),
            "/api/rest_v1/metrics/pageviews/per-article/en.wikipedia/all-access/user/AC%2FDC/daily/"
            "2015070100/2024123100");
}
