#include "exposcope/pageviews.hpp"

#include <cstdio>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "exposcope/checksum.hpp"
#include "exposcope/error.hpp"
#include "exposcope/io.hpp"

namespace exposcope {

namespace chr = std::chrono;

std::optional<Date> parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  std::string s(text);
  if (s.size() == 10 && std::sscanf(s.c_str(), "%4d-%2u-%2u", &y, &m, &d) == 3) {
  } else if (s.size() >= 8 && std::sscanf(s.substr(0, 8).c_str(), "%4d%2u%2u", &y, &m, &d) == 3) {
  } else {
    return std::nullopt;
  }
  const Date date{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

namespace {
std::string compact_date(Date d) {
  auto s = format_date(d);
  s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
  return s;
}

std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}
}  // namespace

void AggregationWindow::validate() const {
  if (!start.ok() || !end.ok()) throw ConfigError("aggregation window has an invalid date");
  if (end < start) throw ConfigError("aggregation window ends before it starts");
}

bool AggregationWindow::contains(Date d) const { return !(d < start) && !(end < d); }

std::int64_t AggregationWindow::days() const {
  return (chr::sys_days(end) - chr::sys_days(start)).count() + 1;
}

std::string HttpPageviewClient::request_path(const std::string& title, const AggregationWindow& window) const {
  return "/api/rest_v1/metrics/pageviews/per-article/" + endpoint_.project + "/" + endpoint_.access + "/" +
         endpoint_.agent + "/" + percent_encode(title) + "/daily/" + compact_date(window.start) + "00/" +
         compact_date(window.end) + "00";
}

PageviewResponse HttpPageviewClient::get(const std::string& title, const AggregationWindow& window) {
  httplib::Client cli(endpoint_.base_url);
  cli.set_read_timeout(60, 0);
  cli.set_follow_location(true);
  auto res = cli.Get(request_path(title, window), {{"User-Agent", endpoint_.user_agent}});
  if (!res) return {0, "transport error: " + httplib::to_string(res.error())};
  return {res->status, res->body};
}

RateLimiter::RateLimiter(double per_second)
    : interval_(per_second > 0 ? chr::duration_cast<chr::steady_clock::duration>(chr::duration<double>(1.0 / per_second))
                               : chr::steady_clock::duration::zero()),
      next_(chr::steady_clock::now()) {}

void RateLimiter::acquire() {
  chr::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = chr::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

PageviewFetcher::PageviewFetcher(PageviewClient* client, std::filesystem::path cache_dir, FetchOptions options)
    : client_(client), cache_dir_(std::move(cache_dir)), options_(options), limiter_(options.requests_per_second) {}

std::filesystem::path PageviewFetcher::cache_path(const std::string& title, const AggregationWindow& window) const {
  Fnv1a64 h;
  h.update(title);
  h.update("|" + format_date(window.start) + "|" + format_date(window.end));
  return cache_dir_ / (h.hex() + ".json");
}

PageviewSeries parse_pageview_body(const std::string& title, std::string_view body, const AggregationWindow& window) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("items")) throw DomainError("unexpected pageview body for " + title);
  PageviewSeries s;
  s.title = title;
  for (const auto& item : j.at("items")) {
    const auto date = parse_date(item.at("timestamp").get<std::string>());
    if (!date || !window.contains(*date)) continue;
    const auto views = item.at("views").get<std::int64_t>();
    if (views < 0) throw DomainError("negative pageview count for " + title);
    s.daily[chr::sys_days(*date)] += static_cast<std::uint64_t>(views);
  }
  s.missing_days = window.days() - static_cast<std::int64_t>(s.daily.size());
  return s;
}

PageviewFetch PageviewFetcher::fetch(const std::string& title, const AggregationWindow& window) {
  if (title.empty()) throw ConfigError("empty article title");
  window.validate();
  const auto path = cache_path(title, window);
  PageviewFetch out;
  auto from_cached = [&](const nlohmann::json& j) {
    if (j.at("status").get<int>() == 404) {
      out.status = PageviewFetch::Status::NotFound;
      out.reason = "no article";
      return;
    }
    out.status = PageviewFetch::Status::Ok;
    out.series = parse_pageview_body(title, j.at("body").dump(), window);
  };
  if (std::filesystem::exists(path)) {
    auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || j.value("title", "") != title) throw IntegrityError("corrupt pageview cache " + path.string());
    from_cached(j);
    return out;
  }
  if (client_ == nullptr) {
    out.reason = "not cached (offline)";
    return out;
  }
  auto backoff = options_.initial_backoff;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    limiter_.acquire();
    const auto res = client_->get(title, window);
    if (res.status == 200 || res.status == 404) {
      nlohmann::json rec = {{"title", title},
                            {"start", format_date(window.start)},
                            {"end", format_date(window.end)},
                            {"status", res.status}};
      if (res.status == 200) {
        auto body = nlohmann::json::parse(res.body, nullptr, false);
        if (body.is_discarded()) throw DomainError("unparseable pageview body for " + title);
        rec["body"] = std::move(body);
      }
      write_file_atomic(path, rec.dump() + "\n");
      from_cached(rec);
      return out;
    }
    out.reason = res.status == 0 ? res.body : "HTTP " + std::to_string(res.status);
    if (res.status != 429 && res.status < 500 && res.status != 0) break;
  }
  spdlog::warn("pageviews for '{}' unavailable: {}", title, out.reason);
  out.status = PageviewFetch::Status::Unavailable;
  return out;
}

std::uint64_t aggregate_pageviews(const PageviewSeries& series, const AggregationWindow& window) {
  std::uint64_t total = 0;
  for (const auto& [day, views] : series.daily) {
    if (window.contains(Date(day))) total += views;
  }
  return total;
}

std::string article_title(const EntityRecord& e, const std::map<std::string, std::string>& overrides) {
  if (auto it = overrides.find(e.qid); it != overrides.end()) return it->second;
  std::string t = e.label;
  std::replace(t.begin(), t.end(), ' ', '_');
  return t;
}

}  // namespace exposcope
