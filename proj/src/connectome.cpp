#include "neuroagg/connectome.hpp"

#include "neuroagg/simd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>

namespace neuroagg::connectome {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ConfigError("line " + std::to_string(line) + ": " + what);
}

std::size_t parse_index(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail(line, "bad node index '" + s + "'");
  return v;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail(line, "bad number '" + s + "'");
  return v;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// 53-bit uniform in [0, 1), independent of the standard library's
// distribution implementations
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Connectome from_weights(std::size_t V, const std::map<std::pair<std::size_t, std::size_t>, double>& w) {
  Connectome c;
  c.V = V;
  for (std::size_t j = 0; j < V; ++j) c.labels.push_back(std::to_string(j));
  for (const auto& [key, weight] : w) c.edges.push_back({key.first, key.second, weight});
  return c;
}

}  // namespace

double Connectome::weight(std::size_t a, std::size_t b) const {
  if (a > b) std::swap(a, b);
  for (const auto& e : edges)
    if (e.i == a && e.j == b) return e.w;
  return 0.0;
}

std::vector<double> Connectome::dense_adjacency() const {
  std::vector<double> A(V * V, 0.0);
  for (const auto& e : edges) {
    A[e.i * V + e.j] = e.w;
    A[e.j * V + e.i] = e.w;
  }
  return A;
}

std::optional<std::size_t> Connectome::resolve(const std::string& key) const {
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (labels[j] == key) return j;
  std::size_t v = 0;
  const auto r = std::from_chars(key.data(), key.data() + key.size(), v);
  if (r.ec == std::errc() && r.ptr == key.data() + key.size() && v < V) return v;
  return std::nullopt;
}

Connectome parse_edge_list(std::istream& in, std::size_t declared_V) {
  std::string line;
  std::size_t ln = 0;
  bool header = false;
  std::map<std::pair<std::size_t, std::size_t>, double> directed;
  std::size_t V = declared_V;
  while (std::getline(in, line)) {
    ++ln;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split_csv(t);
    if (!header) {
      if (cells != std::vector<std::string>{"source", "target", "weight"})
        fail(ln, "expected header 'source,target,weight'");
      header = true;
      continue;
    }
    if (cells.size() != 3) fail(ln, "expected 3 fields");
    const std::size_t a = parse_index(cells[0], ln), b = parse_index(cells[1], ln);
    const double w = parse_double(cells[2], ln);
    if (a == b) fail(ln, "self-loop on node " + cells[0]);
    if (!(w >= 0) || !std::isfinite(w)) fail(ln, "negative or non-finite weight");
    directed[{a, b}] += w;
    V = std::max({V, a + 1, b + 1});
  }
  if (!header) throw ConfigError("edge list is empty (missing header)");
  if (declared_V && V > declared_V) throw ConfigError("edge references node beyond declared count");

  std::map<std::pair<std::size_t, std::size_t>, double> undirected;
  for (const auto& [key, w] : directed) {
    const auto [a, b] = key;
    const auto rev = directed.find({b, a});
    if (rev != directed.end()) {
      // both orientations listed: must describe the same symmetric weight
      if (std::fabs(rev->second - w) > 1e-12 * std::max(std::fabs(w), std::fabs(rev->second)))
        throw ConfigError("conflicting weights for edge " + std::to_string(a) + "-" +
                          std::to_string(b));
      if (a < b) undirected[{a, b}] = w;
    } else {
      undirected[{std::min(a, b), std::max(a, b)}] = w;
    }
  }
  return from_weights(V, undirected);
}

void parse_metadata(std::istream& in, Connectome& c) {
  std::string line;
  std::size_t ln = 0;
  bool header = false, has_xyz = false;
  while (std::getline(in, line)) {
    ++ln;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split_csv(t);
    if (!header) {
      if (cells == std::vector<std::string>{"index", "label"}) {
      } else if (cells == std::vector<std::string>{"index", "label", "x", "y", "z"}) {
        has_xyz = true;
        c.coords.assign(c.V, {0.0, 0.0, 0.0});
      } else {
        fail(ln, "expected header 'index,label[,x,y,z]'");
      }
      header = true;
      continue;
    }
    if (cells.size() != (has_xyz ? 5u : 2u)) fail(ln, "wrong field count");
    const std::size_t j = parse_index(cells[0], ln);
    if (j >= c.V) {
      c.V = j + 1;
      c.labels.resize(c.V);
      if (has_xyz) c.coords.resize(c.V);
    }
    c.labels[j] = cells[1];
    if (has_xyz)
      c.coords[j] = {parse_double(cells[2], ln), parse_double(cells[3], ln),
                     parse_double(cells[4], ln)};
  }
}

Connectome load_connectome(const std::string& edge_path, const std::string& metadata_path) {
  std::ifstream ein(edge_path);
  if (!ein) throw ConfigError("cannot open edge list " + edge_path);
  Connectome c = parse_edge_list(ein);
  if (!metadata_path.empty()) {
    std::ifstream min(metadata_path);
    if (!min) throw ConfigError("cannot open node metadata " + metadata_path);
    parse_metadata(min, c);
  }
  return c;
}

void save_edge_list(const Connectome& c, std::ostream& out) {
  out << "source,target,weight\n";
  for (const auto& e : c.edges) out << e.i << ',' << e.j << ',' << fmt(e.w) << '\n';
}

void save_metadata(const Connectome& c, std::ostream& out) {
  const bool xyz = c.coords.size() == c.V && c.V > 0;
  out << (xyz ? "index,label,x,y,z\n" : "index,label\n");
  for (std::size_t j = 0; j < c.V; ++j) {
    out << j << ',' << (j < c.labels.size() ? c.labels[j] : std::to_string(j));
    if (xyz) out << ',' << fmt(c.coords[j][0]) << ',' << fmt(c.coords[j][1]) << ',' << fmt(c.coords[j][2]);
    out << '\n';
  }
}

Connectome generate_small_world(std::size_t V, std::size_t k, double rewire_prob,
                                std::uint64_t seed) {
  if (V < 2) throw ConfigError("small-world graph needs V >= 2");
  if (k == 0 || k % 2 != 0 || k >= V) throw ConfigError("small-world k must be even, 0 < k < V");
  if (!(rewire_prob >= 0 && rewire_prob <= 1)) throw ConfigError("rewire probability must be in [0,1]");
  std::mt19937_64 rng(seed);
  std::set<std::pair<std::size_t, std::size_t>> E;
  auto key = [](std::size_t a, std::size_t b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (std::size_t i = 0; i < V; ++i)
    for (std::size_t d = 1; d <= k / 2; ++d) E.insert(key(i, (i + d) % V));
  // Watts–Strogatz: rewire the far end of each lattice edge, lap by lap
  for (std::size_t d = 1; d <= k / 2; ++d) {
    for (std::size_t i = 0; i < V; ++i) {
      if (unit(rng) >= rewire_prob) continue;
      const auto old = key(i, (i + d) % V);
      if (!E.count(old)) continue;
      std::size_t target = 0;
      bool found = false;
      for (int attempt = 0; attempt < 64 && !found; ++attempt) {
        target = static_cast<std::size_t>(rng() % V);
        found = target != i && !E.count(key(i, target));
      }
      if (!found) continue;
      E.erase(old);
      E.insert(key(i, target));
    }
  }
  // weights in [0.5, 1.5) so invasion times do not tie
  std::map<std::pair<std::size_t, std::size_t>, double> w;
  for (const auto& e : E) w[e] = 0.5 + unit(rng);
  return from_weights(V, w);
}

Connectome generate_path(std::size_t V, double w) {
  if (V < 2) throw ConfigError("path graph needs V >= 2");
  if (!(w >= 0)) throw ConfigError("edge weight must be >= 0");
  std::map<std::pair<std::size_t, std::size_t>, double> m;
  for (std::size_t i = 0; i + 1 < V; ++i) m[{i, i + 1}] = w;
  return from_weights(V, m);
}

Connectome generate_star(const std::vector<double>& leaf_weights) {
  std::map<std::pair<std::size_t, std::size_t>, double> m;
  for (std::size_t l = 0; l < leaf_weights.size(); ++l) {
    if (!(leaf_weights[l] >= 0)) throw ConfigError("edge weight must be >= 0");
    m[{0, l + 1}] = leaf_weights[l];
  }
  return from_weights(leaf_weights.size() + 1, m);
}

std::vector<int> hop_distances(const Connectome& c, std::size_t source) {
  std::vector<std::vector<std::size_t>> adj(c.V);
  for (const auto& e : c.edges) {
    if (e.w <= 0) continue;
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<int> dist(c.V, -1);
  std::queue<std::size_t> q;
  dist[source] = 0;
  q.push(source);
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  return dist;
}

GraphLaplacian::GraphLaplacian(const Connectome& c) : V_(c.V), diag_(c.V, 0.0) {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(V_);
  for (const auto& e : c.edges) {
    if (e.i >= V_ || e.j >= V_ || e.i == e.j) throw ConfigError("invalid edge in connectome");
    rows[e.i].push_back({e.j, e.w});
    rows[e.j].push_back({e.i, e.w});
  }
  row_ptr_.push_back(0);
  for (std::size_t r = 0; r < V_; ++r) {
    std::sort(rows[r].begin(), rows[r].end());
    for (const auto& [col, w] : rows[r]) {
      diag_[r] += w;
      col_.push_back(col);
      val_.push_back(-w);
    }
    row_ptr_.push_back(col_.size());
  }
  if (V_ < kDenseBelow) dense_ = to_dense();
}

double GraphLaplacian::entry(std::size_t r, std::size_t c) const {
  if (r == c) return diag_[r];
  for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
    if (col_[k] == c) return val_[k];
  return 0.0;
}

std::vector<double> GraphLaplacian::to_dense() const {
  std::vector<double> D(V_ * V_, 0.0);
  for (std::size_t r = 0; r < V_; ++r) {
    D[r * V_ + r] = diag_[r];
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) D[r * V_ + col_[k]] = val_[k];
  }
  return D;
}

void GraphLaplacian::apply(const double* x, double* y) const {
  if (!dense_.empty()) {
    const auto& K = simd::kernels();
    for (std::size_t r = 0; r < V_; ++r) y[r] = K.dot(dense_.data() + r * V_, x, V_);
    return;
  }
  for (std::size_t r = 0; r < V_; ++r) {
    double acc = diag_[r] * x[r];
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += val_[k] * x[col_[k]];
    y[r] = acc;
  }
}

std::vector<double> laplacian_spectrum(const GraphLaplacian& L) {
  const std::size_t V = L.V();
  const auto D = L.to_dense();
  Eigen::MatrixXd M(V, V);
  for (std::size_t r = 0; r < V; ++r)
    for (std::size_t c = 0; c < V; ++c) M(r, c) = D[r * V + c];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

double algebraic_connectivity(const GraphLaplacian& L) {
  if (L.V() < 2) return 0.0;
  return laplacian_spectrum(L)[1];
}

double diffusion_coefficient(const DiffusionSchedule& s, std::size_t i) {
  if (const auto* c = std::get_if<diffusion::Constant>(&s)) return c->rho;
  const double n = static_cast<double>(i);
  return std::get<diffusion::CubeInverse>(s).rho_0 / (n * n * n);
}

NetworkModel::NetworkModel(const Connectome& c, KineticParameters p, ModelVariant v,
                           std::vector<ClearanceSpec> node_clearance, DiffusionSchedule rho,
                           std::size_t N_max)
    : L_(c), V_(c.V), N_(N_max), p_(p), v_(v), rho_(rho) {
  p_.validate();
  if (V_ == 0) throw ConfigError("network has no nodes");
  if (N_ < 2) throw ConfigError("N_max must be >= 2");
  if (v_.tag == ModelTag::InVitroClosed) throw ConfigError("network model needs an in vivo variant");
  if (node_clearance.size() != 1 && node_clearance.size() != V_)
    throw ConfigError("clearance list must have 1 or V entries");
  for (std::size_t s = 0; s < N_; ++s) {
    rho_s_.push_back(diffusion_coefficient(rho_, s + 1));
    if (!(rho_s_.back() >= 0)) throw ConfigError("diffusion coefficients must be >= 0");
  }
  zeros_.assign(V_, 0.0);

  const std::size_t n = N_ - 1;
  auto spec_of = [&](std::size_t j) -> const ClearanceSpec& {
    return node_clearance.size() == 1 ? node_clearance[0] : node_clearance[j];
  };
  const bool dynamic = v_.tag == ModelTag::InVivoDynamicClearance;
  if (dynamic) {
    lam_init_.assign(n * V_, 0.0);
    mu_.assign(n * V_, 0.0);
    beta_.assign(n * V_, 0.0);
    for (std::size_t j = 0; j < V_; ++j) {
      const auto* d = std::get_if<clearance::Dynamic>(&spec_of(j));
      if (!d) throw ConfigError("dynamic-clearance network needs Dynamic specs");
      validate(*d, N_);
      auto pick = [](const std::vector<double>& x, std::size_t k) { return x.size() == 1 ? x[0] : x[k]; };
      for (std::size_t k = 0; k < n; ++k) {
        lam_init_[k * V_ + j] = pick(d->lambda_init, k);
        mu_[k * V_ + j] = pick(d->mu, k);
        beta_[k * V_ + j] = pick(d->beta, k);
      }
    }
    return;
  }
  if (node_clearance.size() == 1 && std::holds_alternative<clearance::DosingProfile>(node_clearance[0])) {
    dosing_ = std::get<clearance::DosingProfile>(node_clearance[0]);
    validate(node_clearance[0], N_);
    return;
  }
  lam_.assign(n * V_, 0.0);
  std::vector<double> rates(n);
  for (std::size_t j = 0; j < V_; ++j) {
    const auto& spec = spec_of(j);
    if (std::holds_alternative<clearance::Dynamic>(spec) ||
        std::holds_alternative<clearance::DosingProfile>(spec))
      throw ConfigError("per-node clearance must be time independent");
    validate(spec, N_);
    clearance_rates(spec, 0.0, rates);
    for (std::size_t k = 0; k < n; ++k) lam_[k * V_ + j] = rates[k];
  }
}

std::size_t NetworkModel::dim() const {
  return (v_.tag == ModelTag::InVivoDynamicClearance ? 2 * N_ - 1 : N_) * V_;
}

void NetworkModel::rhs(double t, std::span<const double> y, std::span<double> dy) const {
  const auto& K = simd::kernels();
  const std::size_t V = V_, N = N_;
  const double* m = y.data();
  const bool dynamic = v_.tag == ModelTag::InVivoDynamicClearance;
  const double* lam = dynamic ? y.data() + N * V : (lam_.empty() ? nullptr : lam_.data());
  const double lam_t = dosing_ ? dosing_rate(*dosing_, t) : 0.0;

  std::vector<double> P(V, 0.0), M(V, 0.0), g(V), tmp(V);
  for (std::size_t i = 2; i <= N; ++i) {
    const double* b = y.data() + (i - 1) * V;
    for (std::size_t j = 0; j < V; ++j) {
      P[j] += b[j];
      M[j] += static_cast<double>(i) * b[j];
    }
  }
  for (std::size_t j = 0; j < V; ++j) g[j] = 2.0 * p_.k_plus * m[j];

  // p_2
  {
    const double* p2 = y.data() + V;
    double* d2 = dy.data() + V;
    for (std::size_t j = 0; j < V; ++j) {
      const double sat = v_.saturation == SaturationArgument::Monomer ? sigma(m[j], p_.K_m)
                                                                       : sigma(M[j], p_.K_M);
      const double nuc = v_.k_n_zeroed ? 0.0
                         : v_.nucleation == NucleationForm::Raw ? p_.k_n
                                                                : p_.k_n * m[j] * m[j];
      const double l2 = lam ? lam[j] : lam_t;
      d2[j] = nuc + p_.k_2 * sat * m[j] * m[j] * M[j] - g[j] * p2[j] - l2 * p2[j];
    }
  }
  for (std::size_t i = 3; i <= N; ++i) {
    const double* prev = y.data() + (i - 2) * V;
    const double* cur = y.data() + (i - 1) * V;
    double* out = dy.data() + (i - 1) * V;
    const double* li = lam ? lam + (i - 2) * V : zeros_.data();
    if (i == N && v_.closure == Closure::Reflecting) {
      for (std::size_t j = 0; j < V; ++j) {
        const double lN = lam ? li[j] : lam_t;
        out[j] = g[j] * prev[j] - lN * cur[j];
      }
      continue;
    }
    K.elongation_nodes(g.data(), prev, cur, li, out, V);
    if (!lam && lam_t != 0.0) K.axpy(-lam_t, cur, out, V);
  }
  std::fill(dy.begin(), dy.begin() + static_cast<long>(V), 0.0);

  // transport, one Laplacian product per species block
  for (std::size_t s = 0; s < N; ++s) {
    if (rho_s_[s] == 0.0) continue;
    L_.apply(y.data() + s * V, tmp.data());
    K.axpy(-rho_s_[s], tmp.data(), dy.data() + s * V, V);
  }

  if (dynamic) {
    const std::size_t n = N - 1;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < V; ++j) {
        const std::size_t q = k * V + j;
        dy[N * V + q] = beta_[q] * M[j] * (mu_[q] - lam[q]);
      }
  }
}

std::vector<double> NetworkModel::initial_state(std::size_t seed_node, double seed_p2) const {
  if (seed_node >= V_) throw ConfigError("seed node out of range");
  std::vector<double> y(dim(), 0.0);
  std::fill(y.begin(), y.begin() + static_cast<long>(V_), p_.m_0);
  y[index(2, seed_node)] = seed_p2;
  if (v_.tag == ModelTag::InVivoDynamicClearance)
    std::copy(lam_init_.begin(), lam_init_.end(), y.begin() + static_cast<long>(N_ * V_));
  return y;
}

Moments NetworkModel::node_moments(std::span<const double> y, std::size_t node) const {
  Moments mo;
  for (std::size_t i = 2; i <= N_; ++i) {
    const double v = y[index(i, node)];
    mo.P += v;
    mo.M += static_cast<double>(i) * v;
  }
  return mo;
}

std::vector<double> NetworkModel::node_mass(std::span<const double> y) const {
  std::vector<double> M(V_, 0.0);
  for (std::size_t i = 2; i <= N_; ++i)
    for (std::size_t j = 0; j < V_; ++j) M[j] += static_cast<double>(i) * y[index(i, j)];
  return M;
}

std::vector<double> NetworkModel::discontinuities(double t0, double t1) const {
  return dosing_ ? dosing_instants(*dosing_, t0, t1) : std::vector<double>{};
}

std::vector<char> NetworkModel::nonneg_mask() const { return std::vector<char>(dim(), 1); }

std::vector<solver::Event> NetworkModel::invasion_events(double threshold) const {
  std::vector<solver::Event> ev;
  for (std::size_t j = 0; j < V_; ++j) {
    ev.push_back({"invade:" + std::to_string(j),
                  [this, j, threshold](double, std::span<const double> y) {
                    return node_moments(y, j).M - threshold;
                  },
                  false, +1});
  }
  return ev;
}

std::vector<InvasionRecord> invasion_order(const solver::Trajectory& traj,
                                           const NetworkModel& model, double threshold) {
  const std::size_t V = model.V();
  std::vector<std::optional<double>> when(V);
  if (!traj.states.empty()) {
    for (std::size_t j = 0; j < V; ++j)
      if (model.node_moments(traj.states.front(), j).M >= threshold) when[j] = traj.times.front();
  }
  for (const auto& e : traj.events) {
    if (e.label.rfind("invade:", 0) != 0) continue;
    const std::size_t j = std::stoul(e.label.substr(7));
    if (j < V && !when[j]) when[j] = e.t;
  }
  std::vector<InvasionRecord> out;
  for (std::size_t j = 0; j < V; ++j) out.push_back({j, when[j], 0});
  std::stable_sort(out.begin(), out.end(), [](const InvasionRecord& a, const InvasionRecord& b) {
    if (a.time.has_value() != b.time.has_value()) return a.time.has_value();
    if (a.time && *a.time != *b.time) return *a.time < *b.time;
    return a.node < b.node;
  });
  std::size_t r = 0;
  for (auto& rec : out)
    if (rec.time) rec.rank = ++r;
  return out;
}

void write_node_csv(std::ostream& out, const solver::Trajectory& traj, const NetworkModel& model) {
  out << "t,node,M,P\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    for (std::size_t j = 0; j < model.V(); ++j) {
      const Moments mo = model.node_moments(traj.states[k], j);
      out << fmt(traj.times[k]) << ',' << j << ',' << fmt(mo.M) << ',' << fmt(mo.P) << '\n';
    }
}

void write_size_csv(std::ostream& out, const solver::Trajectory& traj, const NetworkModel& model,
                    const std::vector<std::size_t>& sizes) {
  out << "t,node,i,p\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    for (std::size_t j = 0; j < model.V(); ++j)
      for (std::size_t i : sizes) {
        if (i < 2 || i > model.N_max()) continue;
        out << fmt(traj.times[k]) << ',' << j << ',' << i << ',' << fmt(traj.states[k][model.index(i, j)])
            << '\n';
      }
}

}  // namespace neuroagg::connectome
