#include "exposcope/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "exposcope/error.hpp"
#include "exposcope/exposure.hpp"
#include "exposcope/io.hpp"
#include "exposcope/spearman.hpp"

namespace exposcope {

namespace {

std::string shortest(double v) { return fmt::format("{}", v); }

std::optional<double> parse_optional_double(const std::string& field, std::string_view what) {
  if (field.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || !std::isfinite(v)) throw IntegrityError("bad " + std::string(what) + " value: " + field);
  return v;
}

std::uint64_t parse_count(const std::string& field, std::string_view what) {
  std::uint64_t v = 0;
  std::size_t used = 0;
  try {
    if (!field.empty() && field[0] != '-') v = std::stoull(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (field.empty() || used != field.size()) throw IntegrityError("bad " + std::string(what) + " value: " + field);
  return v;
}

template <typename F>
void for_each_record(std::string_view text, std::string_view header, F&& fn) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) throw IntegrityError("unexpected CSV header: " + line);
      seen_header = true;
      continue;
    }
    fn(split_csv_record(line), no);
  }
  if (!seen_header) throw IntegrityError("CSV input has no header");
}

std::string_view section_title(Section s) {
  switch (s) {
    case Section::All: return "All Entities";
    case Section::Sparse: return "Sparse Entities";
    case Section::Popular: return "Popular Entities";
  }
  return "?";
}

bool in_section(const SignalRow& r, Section s) {
  switch (s) {
    case Section::All: return true;
    case Section::Sparse: return r.stratum == Stratum::Sparse;
    case Section::Popular: return r.stratum == Stratum::Popular;
  }
  return false;
}

class Footnotes {
 public:
  int mark(const std::string& reason) {
    auto [it, added] = ids_.emplace(reason, static_cast<int>(order_.size()) + 1);
    if (added) order_.push_back(reason);
    return it->second;
  }
  void render(std::string& out) const {
    if (order_.empty()) return;
    out += '\n';
    for (std::size_t i = 0; i < order_.size(); ++i) out += fmt::format("[^{}]: {}\n", i + 1, order_[i]);
  }

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> order_;
};

std::string render_markdown(const CorrelationReport& report) {
  std::set<Section> sections;
  std::set<Signal> signals;
  std::set<EntityType> type_set;
  for (const auto& m : report.models) {
    for (const auto& [key, _] : m.cells) {
      sections.insert(key.section);
      signals.insert(key.signal);
      type_set.insert(key.type);
    }
  }
  const std::vector<EntityType> types(type_set.begin(), type_set.end());
  const bool with_average = types.size() > 1;
  const bool multi_model = report.models.size() > 1;

  std::string out = "Spearman correlation (rho) between popularity signals and exposure.\n\n";
  std::string header = "| Method |";
  std::string rule = "| :--- |";
  for (const auto& m : report.models) {
    auto label = [&](std::string_view col) {
      return multi_model ? fmt::format("{}: {}", m.model, col) : std::string(col);
    };
    for (auto t : types) {
      header += " " + label(to_string(t)) + " |";
      rule += " ---: |";
    }
    if (with_average) {
      header += " " + label("Average") + " |";
      rule += " ---: |";
    }
  }
  const std::size_t columns = report.models.size() * (types.size() + (with_average ? 1 : 0));
  out += header + "\n" + rule + "\n";

  Footnotes notes;
  auto undefined = [&](const std::string& reason) { return fmt::format("—[^{}]", notes.mark(reason)); };

  for (auto section : sections) {
    out += fmt::format("| *{}* |", section_title(section));
    for (std::size_t c = 0; c < columns; ++c) out += " |";
    out += '\n';

    // Column maxima over displayed values, per model.
    std::vector<std::map<EntityType, double>> best(report.models.size());
    std::vector<std::optional<double>> best_avg(report.models.size());
    for (std::size_t mi = 0; mi < report.models.size(); ++mi) {
      const auto& m = report.models[mi];
      for (auto sig : signals) {
        for (auto t : types) {
          auto it = m.cells.find({section, sig, t});
          if (it == m.cells.end() || !it->second.rho) continue;
          const double shown = std::stod(format_rho(*it->second.rho));
          auto [b, added] = best[mi].emplace(t, shown);
          if (!added) b->second = std::max(b->second, shown);
        }
        if (with_average) {
          if (auto avg = m.average(section, sig, types)) {
            const double shown = std::stod(format_average(*avg));
            best_avg[mi] = best_avg[mi] ? std::max(*best_avg[mi], shown) : shown;
          }
        }
      }
    }

    for (auto sig : signals) {
      out += fmt::format("| {} |", to_string(sig));
      for (std::size_t mi = 0; mi < report.models.size(); ++mi) {
        const auto& m = report.models[mi];
        for (auto t : types) {
          auto it = m.cells.find({section, sig, t});
          std::string text;
          if (it == m.cells.end()) {
            text = undefined("not computed");
          } else if (!it->second.rho) {
            text = undefined(it->second.reason);
          } else {
            text = format_rho(*it->second.rho);
            if (std::stod(text) == best[mi].at(t)) text = "**" + text + "**";
          }
          out += " " + text + " |";
        }
        if (with_average) {
          std::string text;
          if (auto avg = m.average(section, sig, types)) {
            text = format_average(*avg);
            if (best_avg[mi] && std::stod(text) == *best_avg[mi]) text = "<u>" + text + "</u>";
          } else {
            text = undefined("average needs every entity type defined");
          }
          out += " " + text + " |";
        }
      }
      out += '\n';
    }
  }

  out += "\nBold marks the maximum of each column within a section; underline marks the highest average.\n";
  if (with_average) out += "Average is the unweighted mean over entity types, truncated to three decimals.\n";
  notes.render(out);
  return out;
}

std::string render_csv(const CorrelationReport& report) {
  std::string out = "model,section,signal,type,rho,n,dropped,reason\n";
  for (const auto& m : report.models) {
    for (const auto& [key, cell] : m.cells) {
      out += fmt::format("{},{},{},{},{},{},{},{}\n", csv_field(m.model), to_string(key.section),
                         to_string(key.signal), to_string(key.type), cell.rho ? shortest(*cell.rho) : "", cell.n,
                         cell.dropped, csv_field(cell.reason));
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Signal s) {
  switch (s) {
    case Signal::Wikipedia: return "Wikipedia";
    case Signal::Directly: return "Directly";
    case Signal::Comparison: return "Comparison";
  }
  return "?";
}

std::string_view to_string(Section s) {
  switch (s) {
    case Section::All: return "All";
    case Section::Sparse: return "Sparse";
    case Section::Popular: return "Popular";
  }
  return "?";
}

std::optional<Signal> parse_signal(std::string_view name) {
  for (auto s : kSignals) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::optional<Section> parse_section(std::string_view name) {
  for (auto s : kSections) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::optional<double> SignalRow::value(Signal s) const {
  switch (s) {
    case Signal::Wikipedia: return wikipedia;
    case Signal::Directly: return directly;
    case Signal::Comparison: return comparison;
  }
  return std::nullopt;
}

std::string serialize_signal_table(const SignalTable& t) {
  std::string out = "qid,type,stratum,exposure,wikipedia,directly,comparison\n";
  auto opt = [](const std::optional<double>& v) { return v ? shortest(*v) : std::string(); };
  for (const auto& r : t.rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", csv_field(r.qid), to_string(r.type),
                       r.stratum ? std::string(to_string(*r.stratum)) : std::string(), r.exposure, opt(r.wikipedia),
                       opt(r.directly), opt(r.comparison));
  }
  return out;
}

SignalTable parse_signal_table(std::string_view text) {
  SignalTable t;
  for_each_record(text, "qid,type,stratum,exposure,wikipedia,directly,comparison",
                  [&](const std::vector<std::string>& f, std::size_t no) {
                    if (f.size() != 7) throw IntegrityError("signal table line " + std::to_string(no) + ": expected 7 fields");
                    SignalRow r;
                    r.qid = f[0];
                    auto type = parse_entity_type(f[1]);
                    if (!type) throw IntegrityError("signal table line " + std::to_string(no) + ": bad type " + f[1]);
                    r.type = *type;
                    if (!f[2].empty()) {
                      r.stratum = parse_stratum(f[2]);
                      if (!r.stratum) throw IntegrityError("signal table line " + std::to_string(no) + ": bad stratum");
                    }
                    r.exposure = parse_count(f[3], "exposure");
                    r.wikipedia = parse_optional_double(f[4], "wikipedia");
                    r.directly = parse_optional_double(f[5], "directly");
                    r.comparison = parse_optional_double(f[6], "comparison");
                    t.rows.push_back(std::move(r));
                  });
  return t;
}

SignalTable read_signal_table(const std::filesystem::path& path) { return parse_signal_table(read_file(path)); }

std::optional<double> ModelReport::average(Section section, Signal signal, const std::vector<EntityType>& types) const {
  if (types.empty()) return std::nullopt;
  double sum = 0;
  for (auto t : types) {
    auto it = cells.find({section, signal, t});
    if (it == cells.end() || !it->second.rho) return std::nullopt;
    sum += *it->second.rho;
  }
  return sum / static_cast<double>(types.size());
}

ModelReport correlate_all(const SignalTable& table, std::string model) {
  std::vector<const SignalRow*> rows;
  for (const auto& r : table.rows) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(), [](const SignalRow* a, const SignalRow* b) { return a->qid < b->qid; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i]->qid == rows[i - 1]->qid) throw ConfigError("duplicate row in signal table: " + rows[i]->qid);
  }
  std::set<EntityType> types;
  for (const auto* r : rows) types.insert(r->type);

  ModelReport report;
  report.model = std::move(model);
  for (auto type : types) {
    for (auto section : kSections) {
      for (auto signal : kSignals) {
        Cell cell;
        std::vector<double> x, y;
        std::size_t members = 0;
        for (const auto* r : rows) {
          if (r->type != type || !in_section(*r, section)) continue;
          ++members;
          if (auto v = r->value(signal)) {
            x.push_back(static_cast<double>(r->exposure));
            y.push_back(*v);
          } else {
            ++cell.dropped;
          }
        }
        cell.n = x.size();
        if (members == 0) {
          cell.reason = "no entities in this stratum";
        } else if (x.size() < 2) {
          cell.reason = "fewer than 2 entities carry this signal";
        } else if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) {
          cell.reason = "exposure is constant";
        } else if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) {
          cell.reason = "signal is constant";
        } else {
          cell.rho = spearman(std::span<const double>(x), std::span<const double>(y));
        }
        report.cells.emplace(CellKey{section, signal, type}, std::move(cell));
      }
    }
  }
  return report;
}

std::string format_rho(double value) {
  auto s = fmt::format("{:.3f}", value);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string format_average(double value) {
  const double scaled = value * 1000.0;
  const double t = std::trunc(scaled + (scaled >= 0 ? 1e-7 : -1e-7)) / 1000.0;
  return format_rho(t);
}

std::string emit_report(const CorrelationReport& report, ReportFormat format) {
  return format == ReportFormat::Markdown ? render_markdown(report) : render_csv(report);
}

CorrelationReport parse_report_csv(std::string_view text) {
  CorrelationReport report;
  for_each_record(text, "model,section,signal,type,rho,n,dropped,reason",
                  [&](const std::vector<std::string>& f, std::size_t no) {
                    const auto where = "report line " + std::to_string(no);
                    if (f.size() != 8) throw IntegrityError(where + ": expected 8 fields");
                    auto section = parse_section(f[1]);
                    auto signal = parse_signal(f[2]);
                    auto type = parse_entity_type(f[3]);
                    if (!section || !signal || !type) throw IntegrityError(where + ": bad key");
                    if (report.models.empty() || report.models.back().model != f[0]) {
                      for (const auto& m : report.models) {
                        if (m.model == f[0]) throw IntegrityError(where + ": model rows are not contiguous");
                      }
                      report.models.push_back(ModelReport{f[0], {}});
                    }
                    Cell cell{parse_optional_double(f[4], "rho"), parse_count(f[5], "n"), parse_count(f[6], "dropped"),
                              f[7]};
                    if (!report.models.back().cells.emplace(CellKey{*section, *signal, *type}, std::move(cell)).second) {
                      throw IntegrityError(where + ": duplicate cell");
                    }
                  });
  return report;
}

std::string render_long_tail_csv(const Catalog& catalog) {
  std::string out = "type,rank,exposure\n";
  for (const auto& [type, series] : long_tail_distribution(catalog)) {
    for (const auto& [rank, exposure] : series) out += fmt::format("{},{},{}\n", to_string(type), rank, exposure);
  }
  return out;
}

std::string render_accuracy_csv(const std::vector<std::pair<std::string, AccuracyReport>>& by_model) {
  std::string out = "model,type,group,accuracy,correct,eligible,exposure_ties,vote_ties,unjudged\n";
  for (const auto& [model, report] : by_model) {
    for (const auto& c : report.cells) {
      const auto acc = c.accuracy();
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(model), to_string(c.type), to_string(c.group),
                         acc ? shortest(*acc) : "", c.correct, c.eligible, c.exposure_ties, c.vote_ties, c.unjudged);
    }
  }
  return out;
}

void emit_plot_data(const std::filesystem::path& dir, const Catalog& catalog,
                    const std::vector<std::pair<std::string, AccuracyReport>>& accuracies, bool force) {
  std::filesystem::create_directories(dir);
  const auto tail = dir / "long_tail.csv";
  const auto acc = dir / "accuracy.csv";
  ensure_writable(tail, force);
  ensure_writable(acc, force);
  write_file_atomic(tail, render_long_tail_csv(catalog));
  write_file_atomic(acc, render_accuracy_csv(accuracies));
}

}  // namespace exposcope
