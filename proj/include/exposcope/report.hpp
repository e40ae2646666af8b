#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exposcope/accuracy.hpp"
#include "exposcope/entity.hpp"

namespace exposcope {

enum class Signal { Wikipedia, Directly, Comparison };
enum class Section { All, Sparse, Popular };

inline constexpr std::array<Signal, 3> kSignals{Signal::Wikipedia, Signal::Directly, Signal::Comparison};
inline constexpr std::array<Section, 3> kSections{Section::All, Section::Sparse, Section::Popular};

std::string_view to_string(Signal s);
std::string_view to_string(Section s);
std::optional<Signal> parse_signal(std::string_view name);
std::optional<Section> parse_section(std::string_view name);

struct SignalRow {
  std::string qid;
  EntityType type = EntityType::Person;
  std::optional<Stratum> stratum;
  std::uint64_t exposure = 0;
  std::optional<double> wikipedia;
  std::optional<double> directly;
  std::optional<double> comparison;

  std::optional<double> value(Signal s) const;
  bool operator==(const SignalRow&) const = default;
};

struct SignalTable {
  std::vector<SignalRow> rows;
  bool operator==(const SignalTable&) const = default;
};

// CSV with header qid,type,stratum,exposure,wikipedia,directly,comparison;
// an empty field marks a missing value.
std::string serialize_signal_table(const SignalTable& t);
SignalTable parse_signal_table(std::string_view text);
SignalTable read_signal_table(const std::filesystem::path& path);

struct CellKey {
  Section section = Section::All;
  Signal signal = Signal::Wikipedia;
  EntityType type = EntityType::Person;
  auto operator<=>(const CellKey&) const = default;
};

struct Cell {
  std::optional<double> rho;  // nullopt: undefined, see reason
  std::size_t n = 0;          // rows correlated
  std::size_t dropped = 0;    // rows in the stratum lacking the signal
  std::string reason;
  bool operator==(const Cell&) const = default;
};

struct ModelReport {
  std::string model;
  std::map<CellKey, Cell> cells;

  // Unweighted mean of the row's cells over `types`; nullopt when a cell is
  // missing or undefined.
  std::optional<double> average(Section section, Signal signal, const std::vector<EntityType>& types) const;
  bool operator==(const ModelReport&) const = default;
};

struct CorrelationReport {
  std::vector<ModelReport> models;
  bool operator==(const CorrelationReport&) const = default;
};

// Spearman of each signal against exposure per (type, section). "All" uses
// every row of the type; Sparse/Popular use the rows carrying that stratum.
// Rows lacking the signal are dropped per cell.
ModelReport correlate_all(const SignalTable& table, std::string model = "model");

enum class ReportFormat { Markdown, Csv };

std::string emit_report(const CorrelationReport& report, ReportFormat format);
CorrelationReport parse_report_csv(std::string_view text);

// Display rule for row averages: truncated toward zero at three decimals.
std::string format_average(double value);
std::string format_rho(double value);

std::string render_long_tail_csv(const Catalog& catalog);
std::string render_accuracy_csv(const std::vector<std::pair<std::string, AccuracyReport>>& by_model);

// Writes long_tail.csv and accuracy.csv under `dir`.
void emit_plot_data(const std::filesystem::path& dir, const Catalog& catalog,
                    const std::vector<std::pair<std::string, AccuracyReport>>& accuracies, bool force);

}  // namespace exposcope
