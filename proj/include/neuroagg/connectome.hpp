#pragma once

// Weighted undirected region graphs, their (unnormalised) Laplacian and the
// network-coupled aggregation model.
//
// Network state is species-major: block s holds species s for all V nodes,
// s = 0 monomer, s = i-1 for p_i; dynamic clearance appends N_max-1 further
// blocks (lambda_i per node).

#include "neuroagg/kinetics.hpp"
#include "neuroagg/solver.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace neuroagg::connectome {

struct Edge {
  std::size_t i, j;  // i < j
  double w;
};

struct Connectome {
  std::size_t V = 0;
  std::vector<std::string> labels;
  std::vector<Edge> edges;  // sorted by (i, j), unique
  std::vector<std::array<double, 3>> coords;  // optional, empty or size V

  double weight(std::size_t a, std::size_t b) const;
  std::vector<double> dense_adjacency() const;  // row-major V*V
  std::optional<std::size_t> resolve(const std::string& label_or_index) const;
};

Connectome parse_edge_list(std::istream& in, std::size_t declared_V = 0);
void parse_metadata(std::istream& in, Connectome& c);
Connectome load_connectome(const std::string& edge_path, const std::string& metadata_path = {});
void save_edge_list(const Connectome& c, std::ostream& out);
void save_metadata(const Connectome& c, std::ostream& out);

Connectome generate_small_world(std::size_t V, std::size_t k, double rewire_prob,
                                std::uint64_t seed);
Connectome generate_path(std::size_t V, double w);
Connectome generate_star(const std::vector<double>& leaf_weights);

std::vector<int> hop_distances(const Connectome& c, std::size_t source);

class GraphLaplacian {
 public:
  static constexpr std::size_t kDenseBelow = 64;

  explicit GraphLaplacian(const Connectome& c);

  std::size_t V() const { return V_; }
  bool dense() const { return !dense_.empty(); }
  double entry(std::size_t r, std::size_t c) const;
  // y = L x
  void apply(const double* x, double* y) const;
  std::vector<double> to_dense() const;

 private:
  std::size_t V_;
  std::vector<double> diag_;
  std::vector<std::size_t> row_ptr_, col_;
  std::vector<double> val_;    // off-diagonal entries (-A_ij)
  std::vector<double> dense_;  // row-major, small graphs only
};

inline GraphLaplacian laplacian(const Connectome& c) { return GraphLaplacian(c); }

// Eigenvalues of L ascending (dense symmetric solve).
std::vector<double> laplacian_spectrum(const GraphLaplacian& L);
double algebraic_connectivity(const GraphLaplacian& L);

namespace diffusion {
struct Constant {
  double rho = 0.01;
};
struct CubeInverse {
  double rho_0 = 0.01;  // rho_i = rho_0 / i^3, monomer uses rho_0
};
}  // namespace diffusion
using DiffusionSchedule = std::variant<diffusion::Constant, diffusion::CubeInverse>;

double diffusion_coefficient(const DiffusionSchedule& s, std::size_t species_size);

class NetworkModel {
 public:
  // node_clearance: one spec broadcast to every node, or one per node.
  NetworkModel(const Connectome& c, KineticParameters p, ModelVariant v,
               std::vector<ClearanceSpec> node_clearance, DiffusionSchedule rho,
               std::size_t N_max);

  std::size_t V() const { return V_; }
  std::size_t N_max() const { return N_; }
  std::size_t dim() const;
  const KineticParameters& params() const { return p_; }

  std::size_t index(std::size_t species_size, std::size_t node) const {
    return (species_size - 1) * V_ + node;
  }

  void rhs(double t, std::span<const double> y, std::span<double> dy) const;

  // m = m_0 everywhere, p_2 = seed at the seed node.
  std::vector<double> initial_state(std::size_t seed_node, double seed_p2) const;
  Moments node_moments(std::span<const double> y, std::size_t node) const;
  std::vector<double> node_mass(std::span<const double> y) const;
  std::vector<double> discontinuities(double t0, double t1) const;
  std::vector<char> nonneg_mask() const;

  // Rising crossings of M_j = threshold, labelled "invade:<j>".
  std::vector<solver::Event> invasion_events(double threshold) const;

 private:
  GraphLaplacian L_;
  std::size_t V_, N_;
  KineticParameters p_;
  ModelVariant v_;
  DiffusionSchedule rho_;
  std::vector<double> rho_s_;       // per species block
  std::vector<double> lam_;         // (N-1)*V static rates, species-major
  std::vector<double> uniform_lam_; // shared dosing profile only
  std::optional<clearance::DosingProfile> dosing_;
  std::vector<double> mu_, beta_;   // dynamic, (N-1)*V
  std::vector<double> lam_init_;
  std::vector<double> zeros_;
};

struct InvasionRecord {
  std::size_t node;
  std::optional<double> time;  // empty: never invaded
  std::size_t rank;            // 1-based among invaded nodes, 0 if not invaded
};

// Nodes already at/above threshold at t0 count as invaded at t0. Ties are
// broken by node index.
std::vector<InvasionRecord> invasion_order(const solver::Trajectory& traj,
                                           const NetworkModel& model, double threshold);

// CSV: t,node,M,P  (and optional long format t,node,i,p)
void write_node_csv(std::ostream& out, const solver::Trajectory& traj, const NetworkModel& model);
void write_size_csv(std::ostream& out, const solver::Trajectory& traj, const NetworkModel& model,
                    const std::vector<std::size_t>& sizes);

}  // namespace neuroagg::connectome
