#include "exposcope/bradley_terry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "exposcope/error.hpp"

namespace exposcope {

namespace {

using Index = Eigen::Index;

std::unordered_map<std::string, std::size_t> index_ids(const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!pos.emplace(ids[i], i).second) throw ConfigError("duplicate entity id in win matrix: " + ids[i]);
  }
  return pos;
}

struct ComparedPair {
  Index i, j;
  double w_ij, w_ji;  // regularized
};

// Each unordered pair with any wins in either direction, in column-major scan order of the upper triangle.
std::vector<ComparedPair> compared_pairs(const WinMatrix& m, double eps) {
  const Eigen::SparseMatrix<double> sym = m.w + Eigen::SparseMatrix<double>(m.w.transpose());
  std::vector<ComparedPair> pairs;
  for (Index k = 0; k < sym.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(sym, k); it; ++it) {
      const Index i = it.row(), j = it.col();
      if (i >= j || it.value() <= 0) continue;
      pairs.push_back({i, j, m.w.coeff(i, j) + eps, m.w.coeff(j, i) + eps});
    }
  }
  return pairs;
}

double pairs_log_likelihood(const std::vector<ComparedPair>& pairs, const Eigen::VectorXd& p) {
  double ll = 0;
  for (const auto& c : pairs) {
    const double denom = std::log(p[c.i] + p[c.j]);
    ll += c.w_ij * (std::log(p[c.i]) - denom) + c.w_ji * (std::log(p[c.j]) - denom);
  }
  return ll;
}

}  // namespace

WinMatrix WinMatrix::from_triplets(std::vector<std::string> ids, const std::vector<Eigen::Triplet<double>>& wins) {
  index_ids(ids);
  const auto n = static_cast<Index>(ids.size());
  for (const auto& t : wins) {
    if (t.row() < 0 || t.col() < 0 || t.row() >= n || t.col() >= n) throw ConfigError("win entry out of range");
    if (t.row() == t.col()) throw ConfigError("self-comparison in win matrix");
    if (!(t.value() >= 0) || !std::isfinite(t.value())) throw ConfigError("wins must be finite and non-negative");
  }
  WinMatrix m;
  m.ids = std::move(ids);
  m.w.resize(n, n);
  m.w.setFromTriplets(wins.begin(), wins.end());
  m.w.prune(0.0);
  return m;
}

WinMatrix WinMatrix::from_outcomes(std::vector<std::string> ids, const std::vector<PairOutcome>& outcomes) {
  const auto pos = index_ids(ids);
  std::vector<Eigen::Triplet<double>> wins;
  for (const auto& o : outcomes) {
    if (!o.judged) continue;
    auto a = pos.find(o.a);
    auto b = pos.find(o.b);
    if (a == pos.end() || b == pos.end()) continue;
    const auto ia = static_cast<Index>(a->second), ib = static_cast<Index>(b->second);
    if (o.w_ab > 0) wins.emplace_back(ia, ib, o.w_ab);
    if (o.w_ba > 0) wins.emplace_back(ib, ia, o.w_ba);
  }
  return from_triplets(std::move(ids), wins);
}

WinMatrix WinMatrix::transposed() const {
  WinMatrix t;
  t.ids = ids;
  t.w = w.transpose();
  return t;
}

WinMatrix WinMatrix::scaled(double c) const {
  if (!(c > 0)) throw ConfigError("scale factor must be positive");
  WinMatrix s;
  s.ids = ids;
  s.w = w * c;
  return s;
}

void BtConfig::validate() const {
  if (!(epsilon >= 0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be finite and >= 0");
  if (!(tolerance > 0)) throw ConfigError("tolerance must be > 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

double BtStrengths::strength(const std::string& id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw ConfigError("no strength for " + id);
  return p[it - ids.begin()];
}

std::vector<std::size_t> BtStrengths::ranks() const {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (p[static_cast<Index>(a)] != p[static_cast<Index>(b)]) return p[static_cast<Index>(a)] > p[static_cast<Index>(b)];
    return ids[a] < ids[b];
  });
  std::vector<std::size_t> rank(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  return rank;
}

std::vector<std::vector<std::size_t>> win_graph_components(const WinMatrix& w, double epsilon) {
  const auto n = w.size();
  std::vector<std::vector<std::size_t>> out_edges(n), in_edges(n);
  for (const auto& c : compared_pairs(w, epsilon)) {
    const auto i = static_cast<std::size_t>(c.i), j = static_cast<std::size_t>(c.j);
    if (c.w_ij > 0) {
      out_edges[i].push_back(j);
      in_edges[j].push_back(i);
    }
    if (c.w_ji > 0) {
      out_edges[j].push_back(i);
      in_edges[i].push_back(j);
    }
  }

  // Kosaraju, iterative.
  std::vector<std::size_t> finish;
  std::vector<char> seen(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{s, 0}};
    seen[s] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < out_edges[v].size()) {
        const auto u = out_edges[v][next++];
        if (!seen[u]) {
          seen[u] = 1;
          stack.emplace_back(u, 0);
        }
      } else {
        finish.push_back(v);
        stack.pop_back();
      }
    }
  }
  std::vector<std::vector<std::size_t>> comps;
  std::vector<char> assigned(n, 0);
  for (auto it = finish.rbegin(); it != finish.rend(); ++it) {
    if (assigned[*it]) continue;
    std::vector<std::size_t> comp, stack{*it};
    assigned[*it] = 1;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (auto u : in_edges[v]) {
        if (!assigned[u]) {
          assigned[u] = 1;
          stack.push_back(u);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  std::sort(comps.begin(), comps.end());
  return comps;
}

double bt_log_likelihood(const WinMatrix& w, const Eigen::VectorXd& p, double epsilon) {
  return pairs_log_likelihood(compared_pairs(w, epsilon), p);
}

BtStrengths fit_bradley_terry(const WinMatrix& w, const BtConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<Index>(w.size());
  if (n < 2) throw ConfigError("Bradley-Terry fit needs at least two entities");

  const auto comps = win_graph_components(w, cfg.epsilon);
  if (comps.size() > 1) {
    std::ostringstream msg;
    msg << "win graph is not strongly connected; " << comps.size() << " components:";
    for (const auto& comp : comps) {
      msg << " {";
      for (std::size_t k = 0; k < comp.size(); ++k) msg << (k ? "," : "") << w.ids[comp[k]];
      msg << "}";
    }
    throw DomainError(msg.str());
  }

  const auto pairs = compared_pairs(w, cfg.epsilon);
  Eigen::VectorXd wins = Eigen::VectorXd::Zero(n);
  for (const auto& c : pairs) {
    wins[c.i] += c.w_ij;
    wins[c.j] += c.w_ji;
  }

  BtStrengths s;
  s.ids = w.ids;
  Eigen::VectorXd log_p = Eigen::VectorXd::Zero(n);
  s.p = Eigen::VectorXd::Ones(n);
  double prev_ll = cfg.check_monotone ? pairs_log_likelihood(pairs, s.p) : 0.0;

  Eigen::VectorXd denom(n);
  for (s.iterations = 1; s.iterations <= cfg.max_iterations; ++s.iterations) {
    denom.setZero();
    for (const auto& c : pairs) {
      const double t = (c.w_ij + c.w_ji) / (s.p[c.i] + s.p[c.j]);
      denom[c.i] += t;
      denom[c.j] += t;
    }
    Eigen::VectorXd next_log = wins.cwiseQuotient(denom).array().log().matrix();
    next_log.array() -= next_log.mean();
    const double delta = (next_log - log_p).cwiseAbs().maxCoeff();
    log_p = next_log;
    s.p = log_p.array().exp().matrix();
    if (cfg.check_monotone) {
      const double ll = pairs_log_likelihood(pairs, s.p);
      if (ll < prev_ll - 1e-9 * std::max(1.0, std::abs(prev_ll))) {
        throw std::logic_error("Bradley-Terry log-likelihood decreased at iteration " + std::to_string(s.iterations));
      }
      prev_ll = ll;
    }
    if (delta < cfg.tolerance) {
      s.converged = true;
      break;
    }
  }
  if (!s.converged) s.iterations = cfg.max_iterations;
  s.log_likelihood = pairs_log_likelihood(pairs, s.p);
  return s;
}

double bt_probability(double p_i, double p_j) {
  if (!(p_i > 0) || !(p_j > 0) || !std::isfinite(p_i) || !std::isfinite(p_j)) {
    throw DomainError("Bradley-Terry strengths must be finite and positive");
  }
  return p_i / (p_i + p_j);
}

std::string serialize_win_matrix(const WinMatrix& m) {
  std::string out = nlohmann::json{{"entities", m.ids}}.dump() + "\n";
  std::vector<std::tuple<Index, Index, double>> cells;
  for (Index k = 0; k < m.w.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m.w, k); it; ++it) {
      if (it.value() != 0) cells.emplace_back(it.row(), it.col(), it.value());
    }
  }
  std::sort(cells.begin(), cells.end());
  for (const auto& [i, j, v] : cells) {
    out += nlohmann::json{{"i", m.ids[static_cast<std::size_t>(i)]}, {"j", m.ids[static_cast<std::size_t>(j)]}, {"wins", v}}
               .dump();
    out += '\n';
  }
  return out;
}

WinMatrix parse_win_matrix(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> ids;
  std::vector<std::tuple<std::string, std::string, double>> raw;
  bool header = false;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw IntegrityError("bad win matrix line " + std::to_string(no));
    try {
      if (!header) {
        ids = j.at("entities").get<std::vector<std::string>>();
        header = true;
      } else {
        raw.emplace_back(j.at("i").get<std::string>(), j.at("j").get<std::string>(), j.at("wins").get<double>());
      }
    } catch (const nlohmann::json::exception&) {
      throw IntegrityError("bad win matrix line " + std::to_string(no));
    }
  }
  if (!header) throw IntegrityError("win matrix has no entity header");
  const auto pos = index_ids(ids);
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& [a, b, v] : raw) {
    auto ia = pos.find(a), ib = pos.find(b);
    if (ia == pos.end() || ib == pos.end()) throw IntegrityError("win matrix names unknown entity");
    trips.emplace_back(static_cast<Index>(ia->second), static_cast<Index>(ib->second), v);
  }
  return WinMatrix::from_triplets(std::move(ids), trips);
}

std::string serialize_strengths(const BtStrengths& s) {
  const auto rank = s.ranks();
  std::vector<std::size_t> order(s.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[rank[i] - 1] = i;
  std::string out;
  for (auto i : order) {
    out += nlohmann::json{{"id", s.ids[i]}, {"strength", s.p[static_cast<Index>(i)]}, {"rank", rank[i]}}.dump();
    out += '\n';
  }
  return out;
}

std::map<std::string, double> parse_strengths(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw IntegrityError("");
      out[j.at("id").get<std::string>()] = j.at("strength").get<double>();
    } catch (const std::exception&) {
      throw IntegrityError("bad strengths line " + std::to_string(no));
    }
  }
  return out;
}

}  // namespace exposcope
