#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "exposcope/entity.hpp"

namespace exposcope {

using Date = std::chrono::year_month_day;

// Accepts YYYY-MM-DD or YYYYMMDD.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);  // YYYY-MM-DD

// Inclusive on both ends; defaults span the pageview API's first day to the
// training-data cutoff.
struct AggregationWindow {
  Date start{std::chrono::year{2015}, std::chrono::July, std::chrono::day{1}};
  Date end{std::chrono::year{2024}, std::chrono::December, std::chrono::day{31}};

  // Throws ConfigError unless both dates are valid and start <= end.
  void validate() const;
  bool contains(Date d) const;
  std::int64_t days() const;
};

struct PageviewSeries {
  std::string title;
  std::map<std::chrono::sys_days, std::uint64_t> daily;
  std::int64_t missing_days = 0;  // days in the window the API did not report
  bool complete() const { return missing_days == 0; }
};

struct PageviewFetch {
  enum class Status { Ok, NotFound, Unavailable } status = Status::Unavailable;
  PageviewSeries series;  // meaningful when status == Ok
  std::string reason;
};

struct PageviewResponse {
  int status = 0;
  std::string body;
};

class PageviewClient {
 public:
  virtual ~PageviewClient() = default;
  virtual PageviewResponse get(const std::string& title, const AggregationWindow& window) = 0;
};

struct PageviewEndpoint {
  std::string base_url = "https://wikimedia.org";
  std::string project = "en.wikipedia";
  std::string access = "all-access";
  std::string agent = "user";
  std::string user_agent = "exposcope/1.0 (pageview aggregation)";
};

// Per-article daily endpoint of the Wikimedia REST API.
class HttpPageviewClient : public PageviewClient {
 public:
  explicit HttpPageviewClient(PageviewEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  PageviewResponse get(const std::string& title, const AggregationWindow& window) override;

  std::string request_path(const std::string& title, const AggregationWindow& window) const;

 private:
  PageviewEndpoint endpoint_;
};

// Spaces out acquisitions to at most `per_second` per second across threads.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_;
};

struct FetchOptions {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{1000};
  double requests_per_second = 50;
};

// Cache-first fetching. Responses (including 404s) are stored as one JSON file
// per (title, window); with no client (offline) only the cache is read.
class PageviewFetcher {
 public:
  PageviewFetcher(PageviewClient* client, std::filesystem::path cache_dir, FetchOptions options = {});

  PageviewFetch fetch(const std::string& title, const AggregationWindow& window);
  std::filesystem::path cache_path(const std::string& title, const AggregationWindow& window) const;

 private:
  PageviewClient* client_;
  std::filesystem::path cache_dir_;
  FetchOptions options_;
  RateLimiter limiter_;
};

// Builds a series from an API body, keeping only days inside the window.
PageviewSeries parse_pageview_body(const std::string& title, std::string_view body, const AggregationWindow& window);

// Sum of daily counts within the window; missing days contribute nothing.
std::uint64_t aggregate_pageviews(const PageviewSeries& series, const AggregationWindow& window);

// Label with spaces replaced by underscores, unless overridden by qid.
std::string article_title(const EntityRecord& e, const std::map<std::string, std::string>& overrides = {});

}  // namespace exposcope
