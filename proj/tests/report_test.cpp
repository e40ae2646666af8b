#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "exposcope/error.hpp"
#include "exposcope/exposure.hpp"
#include "exposcope/report.hpp"
#include "exposcope/spearman.hpp"
#include "support/golden.hpp"
#include "support/oracles.hpp"
#include "support/reference_table.hpp"
#include "support/synthetic.hpp"

using namespace exposcope;

namespace {

std::vector<double> random_with_ties(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  const auto levels = 2 + rng() % (n + 3);
  for (auto& x : v) x = static_cast<double>(rng() % levels) * 0.5 - 3;
  return v;
}

std::vector<double> permutation(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

// A rank permutation of 1..n whose Spearman against the identity displays as `target`.
std::vector<double> ranks_with_rho(double target, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> y(n);
  std::iota(y.begin(), y.end(), 1.0);
  const double denom = static_cast<double>(n) * (static_cast<double>(n * n) - 1) / 6.0;
  auto sum_d2 = [&] {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (y[i] - static_cast<double>(i + 1)) * (y[i] - static_cast<double>(i + 1));
    return s;
  };
  const double want = (1 - target) * denom;
  double cur = sum_d2();
  while (format_rho(1 - cur / denom) != format_rho(target)) {
    const auto i = rng() % n, j = rng() % n;
    std::swap(y[i], y[j]);
    const double next = sum_d2();
    if (std::abs(next - want) < std::abs(cur - want)) {
      cur = next;
    } else {
      std::swap(y[i], y[j]);
    }
  }
  return y;
}

SignalRow row(std::string qid, EntityType type, std::optional<Stratum> stratum, std::uint64_t exposure,
              std::optional<double> wiki, std::optional<double> direct, std::optional<double> comp) {
  return {std::move(qid), type, stratum, exposure, wiki, direct, comp};
}

}  // namespace

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{30, 20, 10}), -1.0);
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-15);
  const Eigen::VectorXd r = average_ranks(Eigen::Vector4d(5, 1, 5, 2));
  EXPECT_EQ(r, Eigen::Vector4d(3.5, 1, 3.5, 2));
}

TEST(Spearman, Errors) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_THROW(spearman(x, std::vector<double>{4, 4, 4}), UndefinedCorrelation);
  EXPECT_THROW(spearman(std::vector<double>{2, 2}, std::vector<double>{1, 2}), UndefinedCorrelation);
  EXPECT_THROW(spearman(x, std::vector<double>{1, 2}), DomainError);
  EXPECT_THROW(spearman(std::vector<double>{1}, std::vector<double>{1}), DomainError);
  EXPECT_THROW(spearman(x, std::vector<double>{1, NAN, 2}), DomainError);
}

TEST(Spearman, MatchesReferenceWithTies) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng() % 60;
    auto x = random_with_ties(rng, n), y = random_with_ties(rng, n);
    if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) x[0] += 1;
    if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) y[0] += 1;
    EXPECT_NEAR(spearman(x, y), oracle::reference_spearman(x, y), 1e-12);
  }
}

TEST(Spearman, TieFreeMatchesClosedForm) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng() % 80;
    const auto x = permutation(rng, n), y = permutation(rng, n);
    EXPECT_NEAR(spearman(x, y), oracle::closed_form_spearman(x, y), 1e-12);
  }
}

TEST(Spearman, Properties) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 3 + rng() % 40;
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng);
    const double rho = spearman(x, y);
    EXPECT_GE(rho, -1.0);
    EXPECT_LE(rho, 1.0);
    EXPECT_DOUBLE_EQ(rho, spearman(y, x));
    EXPECT_NEAR(spearman(x, x), 1.0, 1e-15);
    // A strictly increasing map leaves ranks, and so rho, unchanged.
    const double a = 0.5 + static_cast<double>(rng() % 100) / 10;
    std::vector<double> fx(n);
    for (std::size_t i = 0; i < n; ++i) fx[i] = std::exp(a * x[i]) + x[i] * x[i] * x[i];
    EXPECT_NEAR(spearman(fx, y), rho, 1e-12);
  }
}

TEST(Correlate, MonotoneSignalsGiveOne) {
  SignalTable t;
  for (int i = 0; i < 12; ++i) {
    const auto stratum = i < 4 ? Stratum::Sparse : i >= 8 ? Stratum::Popular : Stratum::Unselected;
    t.rows.push_back(row("Q" + std::to_string(i), EntityType::Art, stratum, 10 + i * i, std::log(1.0 + i),
                         100.0 * i, std::exp(0.1 * i)));
  }
  const auto r = correlate_all(t);
  for (const auto& [key, cell] : r.cells) {
    ASSERT_TRUE(cell.rho) << cell.reason;
    EXPECT_DOUBLE_EQ(*cell.rho, 1.0);
  }
  EXPECT_EQ(r.cells.at({Section::All, Signal::Comparison, EntityType::Art}).n, 12u);
  EXPECT_EQ(r.cells.at({Section::Sparse, Signal::Comparison, EntityType::Art}).n, 4u);
}

TEST(Correlate, RowOrderInvariance) {
  std::mt19937_64 rng(23);
  SignalTable t;
  std::lognormal_distribution<double> ln(0, 1);
  for (int i = 0; i < 60; ++i) {
    const auto type = kEntityTypes[i % 3];
    const auto stratum = i % 4 == 0 ? Stratum::Sparse : i % 4 == 1 ? Stratum::Popular : Stratum::Unselected;
    std::optional<double> wiki;
    if (i % 7 != 0) wiki = ln(rng);
    t.rows.push_back(row("Q" + std::to_string(i), type, stratum, rng() % 50, wiki, ln(rng), ln(rng)));
  }
  const auto base = correlate_all(t);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(t.rows.begin(), t.rows.end(), rng);
    EXPECT_EQ(correlate_all(t), base);
  }
  EXPECT_GT(base.cells.at({Section::All, Signal::Wikipedia, EntityType::Person}).dropped, 0u);
}

TEST(Correlate, ReferencePersonColumn) {
  // Three signals whose ranks against exposure land on the reference Person/All values.
  const std::size_t n = 400;
  const auto wiki = ranks_with_rho(0.820, n, 1);
  const auto direct = ranks_with_rho(0.729, n, 2);
  const auto comp = ranks_with_rho(0.823, n, 3);
  SignalTable t;
  for (std::size_t i = 0; i < n; ++i) {
    t.rows.push_back(row("Q" + std::to_string(i), EntityType::Person, std::nullopt, 1000 + i, wiki[i], direct[i],
                         comp[i]));
  }
  const auto r = correlate_all(t, "OLMo-3-7B");
  EXPECT_EQ(format_rho(*r.cells.at({Section::All, Signal::Wikipedia, EntityType::Person}).rho), "0.820");
  EXPECT_EQ(format_rho(*r.cells.at({Section::All, Signal::Directly, EntityType::Person}).rho), "0.729");
  EXPECT_EQ(format_rho(*r.cells.at({Section::All, Signal::Comparison, EntityType::Person}).rho), "0.823");
  EXPECT_FALSE(r.cells.at({Section::Sparse, Signal::Wikipedia, EntityType::Person}).rho);
}

TEST(Correlate, PlantedCopulaRecovered) {
  // Gaussian copula: Spearman = (6 / pi) asin(r / 2).
  const double planted = 0.7;
  const double r = 2 * std::sin(planted * M_PI / 6);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  SignalTable t;
  for (int i = 0; i < 50; ++i) {
    const double z1 = g(rng), z2 = r * z1 + std::sqrt(1 - r * r) * g(rng);
    const auto exposure = static_cast<std::uint64_t>(std::llround(std::exp(3 + 2 * z1) * 100));
    t.rows.push_back(row("Q" + std::to_string(i), EntityType::Location, std::nullopt, exposure, std::exp(z2),
                         std::nullopt, std::nullopt));
  }
  const auto rep = correlate_all(t);
  EXPECT_NEAR(*rep.cells.at({Section::All, Signal::Wikipedia, EntityType::Location}).rho, planted, 0.15);
  EXPECT_EQ(rep.cells.at({Section::All, Signal::Directly, EntityType::Location}).reason,
            "fewer than 2 entities carry this signal");
}

TEST(Correlate, DuplicateRowRejected) {
  SignalTable t;
  t.rows.push_back(row("Q1", EntityType::Art, std::nullopt, 1, 1.0, 1.0, 1.0));
  t.rows.push_back(row("Q1", EntityType::Art, std::nullopt, 2, 2.0, 2.0, 2.0));
  EXPECT_THROW(correlate_all(t), ConfigError);
}

TEST(SignalTableCsv, RoundTrip) {
  SignalTable t;
  t.rows.push_back(row("Q1", EntityType::Art, Stratum::Sparse, 3, 0.1, std::nullopt, 1.0 / 3));
  t.rows.push_back(row("Q2", EntityType::Product, std::nullopt, 0, std::nullopt, 1e-300, 12345.678));
  const auto text = serialize_signal_table(t);
  EXPECT_EQ(text.substr(0, text.find('\n')), "qid,type,stratum,exposure,wikipedia,directly,comparison");
  EXPECT_EQ(parse_signal_table(text), t);
  EXPECT_THROW(parse_signal_table("qid,type\nQ1,Art\n"), IntegrityError);
}

TEST(Format, RhoAndAverage) {
  EXPECT_EQ(format_rho(0.8199), "0.820");
  EXPECT_EQ(format_rho(-0.0001), "0.000");
  EXPECT_EQ(format_rho(-0.0221), "-0.022");
  EXPECT_EQ(format_average(0.7558), "0.755");
  EXPECT_EQ(format_average(0.243), "0.243");
  EXPECT_EQ(format_average(-0.0229), "-0.022");
}

TEST(Markdown, ReferenceCellsHighlightsAndAverages) {
  const auto report = fixture::reference_report();
  const auto md = emit_report(report, ReportFormat::Markdown);
  fixture::expect_golden("reference_report.md", md);
  EXPECT_NE(md.find("| Method | OLMo-3-7B: Person |"), std::string::npos);

  const auto rows = fixture::markdown_rows(md);
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& ref : fixture::reference_rows()) {
    const auto key = std::string(ref.section == Section::All       ? "All Entities"
                                 : ref.section == Section::Sparse ? "Sparse Entities"
                                                                  : "Popular Entities") +
                     "/" + std::string(to_string(ref.signal));
    const auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.first == key; });
    ASSERT_NE(it, rows.end()) << key;
    const std::size_t offset = ref.model == fixture::reference_models()[0] ? 0 : 6;
    for (std::size_t t = 0; t < 5; ++t) {
      auto expected = format_rho(ref.values[t]);
      if (ref.highlighted[t]) expected = "**" + expected + "**";
      EXPECT_EQ(it->second[offset + t], expected) << ref.model << " " << key << " col " << t;
    }
    auto avg = format_average(report.models[offset / 6].average(ref.section, ref.signal,
                                                                std::vector<EntityType>(kEntityTypes.begin(), kEntityTypes.end()))
                                  .value());
    EXPECT_EQ(avg, format_rho(ref.printed_average)) << ref.model << " " << key;
    if (ref.average_highlighted) avg = "<u>" + avg + "</u>";
    EXPECT_EQ(it->second[offset + 5], avg) << ref.model << " " << key;
  }
}

TEST(Markdown, ComputedAveragesWithinAThousandth) {
  const auto report = fixture::reference_report();
  const std::vector<EntityType> types(kEntityTypes.begin(), kEntityTypes.end());
  for (const auto& ref : fixture::reference_rows()) {
    const auto& m = ref.model == report.models[0].model ? report.models[0] : report.models[1];
    EXPECT_NEAR(*m.average(ref.section, ref.signal, types), ref.printed_average, 0.001);
  }
}

TEST(Markdown, SingleCell) {
  CorrelationReport r;
  ModelReport m;
  m.model = "m";
  m.cells[{Section::All, Signal::Wikipedia, EntityType::Person}] = Cell{0.5, 10, 0, ""};
  r.models.push_back(m);
  const auto md = emit_report(r, ReportFormat::Markdown);
  fixture::expect_golden("single_cell.md", md);
  const auto rows = fixture::markdown_rows(md);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].first, "All Entities/Wikipedia");
  EXPECT_EQ(rows[0].second, std::vector<std::string>{"**0.500**"});
  EXPECT_EQ(md.find("Average"), std::string::npos);
}

TEST(Markdown, UndefinedCellsGetFootnotes) {
  CorrelationReport r;
  ModelReport m;
  m.model = "m";
  m.cells[{Section::Sparse, Signal::Wikipedia, EntityType::Person}] = Cell{std::nullopt, 1, 3, "fewer than 2 entities carry this signal"};
  m.cells[{Section::Sparse, Signal::Wikipedia, EntityType::Art}] = Cell{0.25, 20, 0, ""};
  m.cells[{Section::Sparse, Signal::Directly, EntityType::Person}] = Cell{std::nullopt, 1, 3, "fewer than 2 entities carry this signal"};
  m.cells[{Section::Sparse, Signal::Directly, EntityType::Art}] = Cell{std::nullopt, 20, 0, "signal is constant"};
  r.models.push_back(m);
  const auto md = emit_report(r, ReportFormat::Markdown);
  fixture::expect_golden("undefined_cells.md", md);
  const auto rows = fixture::markdown_rows(md);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].second[0], "—[^1]");
  EXPECT_EQ(rows[1].second[0], "—[^1]");
  EXPECT_EQ(rows[1].second[1], "—[^3]");
  EXPECT_EQ(rows[0].second[2], "—[^2]");
  EXPECT_NE(md.find("[^1]: fewer than 2 entities carry this signal"), std::string::npos);
  EXPECT_NE(md.find("[^3]: signal is constant"), std::string::npos);
}

TEST(ReportCsv, RoundTrip) {
  auto report = fixture::reference_report();
  report.models[0].cells[{Section::Sparse, Signal::Directly, EntityType::Art}] =
      Cell{std::nullopt, 1, 199, "fewer than 2 entities carry this signal, \"quoted\""};
  report.models[1].model = "name, with comma";
  report.models[1].cells[{Section::All, Signal::Wikipedia, EntityType::Person}].rho = 0.1 + 0.2;
  const auto csv = emit_report(report, ReportFormat::Csv);
  EXPECT_EQ(parse_report_csv(csv), report);
  EXPECT_EQ(emit_report(parse_report_csv(csv), ReportFormat::Csv), csv);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 50; ++k) {
    CorrelationReport random;
    random.models.resize(1 + rng() % 3);
    for (std::size_t mi = 0; mi < random.models.size(); ++mi) {
      random.models[mi].model = "m" + std::to_string(mi);
      for (int c = 0; c < 10; ++c) {
        const CellKey key{kSections[rng() % 3], kSignals[rng() % 3], kEntityTypes[rng() % 5]};
        random.models[mi].cells[key] = rng() % 4 ? Cell{u(rng), rng() % 400, rng() % 5, ""}
                                                 : Cell{std::nullopt, 0, 0, "no entities in this stratum"};
      }
    }
    EXPECT_EQ(parse_report_csv(emit_report(random, ReportFormat::Csv)), random);
  }
}

TEST(PlotData, LongTailAndAccuracy) {
  Catalog c;
  for (int i = 0; i < 3; ++i) {
    EntityRecord e;
    e.qid = "Q" + std::to_string(i + 1);
    e.label = "e";
    e.type = EntityType::Person;
    e.exposure = std::vector<std::uint64_t>{5, 10, 1}[i];
    c.entities.push_back(e);
  }
  const auto tail = render_long_tail_csv(c);
  EXPECT_EQ(tail, "type,rank,exposure\nPerson,1,10\nPerson,2,5\nPerson,3,1\n");

  AccuracyReport acc;
  acc.cells = {AccuracyCell{EntityType::Person, PairGroup::SparseSparse, 3, 3, 0, 0, 0},
               AccuracyCell{EntityType::Person, PairGroup::PopularPopular, 2, 4, 1, 0, 0},
               AccuracyCell{EntityType::Person, PairGroup::Cross, 0, 0, 0, 1, 2}};
  const auto csv = render_accuracy_csv({{"oracle-mock", acc}});
  fixture::expect_golden("accuracy.csv", csv);

  fixture::TempDir dir("plots");
  emit_plot_data(dir.path(), c, {{"oracle-mock", acc}}, false);
  EXPECT_EQ(read_file(dir.path() / "long_tail.csv"), tail);
  EXPECT_EQ(read_file(dir.path() / "accuracy.csv"), csv);
  EXPECT_THROW(emit_plot_data(dir.path(), c, {{"oracle-mock", acc}}, false), ConfigError);
  EXPECT_NO_THROW(emit_plot_data(dir.path(), c, {{"oracle-mock", acc}}, true));
}

TEST(PlotData, SyntheticLongTailGolden) {
  fixture::TempDir dir("fixture");
  const auto fx = fixture::write_synthetic_fixture(dir.path());
  Catalog c;
  for (const auto& [qid, exposure] : fx.exposure) {
    EntityRecord e;
    e.qid = qid;
    e.label = fx.label.at(qid);
    e.type = fx.type.at(qid);
    e.exposure = exposure;
    c.entities.push_back(e);
  }
  normalize_catalog(c);
  fixture::expect_golden("synthetic_long_tail.csv", render_long_tail_csv(c));
}
