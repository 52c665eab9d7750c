// neuroagg command-line driver: simulate | analyze | network | optimize

#include "neuroagg/analysis.hpp"
#include "neuroagg/config.hpp"
#include "neuroagg/connectome.hpp"
#include "neuroagg/kinetics.hpp"
#include "neuroagg/optimizer.hpp"
#include "neuroagg/simd.hpp"
#include "neuroagg/solver.hpp"
#include "neuroagg/therapy.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

namespace fs = std::filesystem;
using namespace neuroagg;
using config::Json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kInfeasible = 4 };

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write " + p.string());
  return out;
}

void write_json(const fs::path& p, const Json& j) { open_out(p) << j.dump(2) << '\n'; }

// Parameters and clearance after drug action, in the integration frame
// (concentrations multiplied by rescale_c).
struct Frame {
  KineticParameters phys;  // drugged, physical units
  KineticParameters p;     // drugged, integration frame
  double c = 1.0;
  double lambda_drug = 0.0;
  std::optional<ClearanceSpec> spec;
};

Frame make_frame(const config::RunConfig& cfg) {
  Frame f;
  f.phys = cfg.model.params;
  f.spec = cfg.clearance;
  if (cfg.therapy) {
    const auto eff = therapy::apply_drug(f.phys, cfg.therapy->drug);
    f.phys = eff.params;
    f.lambda_drug = eff.lambda_drug;
    if (f.spec) f.spec = therapy::with_extra_clearance(*f.spec, eff.lambda_drug);
  }
  f.c = f.phys.rescale_c;
  f.p = f.c == 1.0 ? f.phys : rescaled(f.phys, f.c, cfg.model.variant.nucleation, cfg.model.rescale_keep_k_n);
  if (f.spec && f.c != 1.0)
    if (auto* d = std::get_if<clearance::Dynamic>(&*f.spec)) *f.spec = rescaled(*d, f.c);
  return f;
}

solver::IntegrationConfig integration_config(const config::RunConfig& cfg, const Frame& f,
                                             std::size_t samples_default, std::size_t dim) {
  solver::IntegrationConfig ic;
  const auto& m = cfg.solver.method;
  if (m == "rosenbrock" && dim > solver::kMaxDenseDim)
    throw ConfigError("solver.method = \"rosenbrock\" supports at most " + std::to_string(solver::kMaxDenseDim) +
                      " unknowns; this run has " + std::to_string(dim));
  // auto: beta*M makes the dynamic-clearance model far too stiff for the
  // explicit pair; elsewhere the explicit pair is cheaper per unit time
  const bool stiff = cfg.model.variant.tag == ModelTag::InVivoDynamicClearance && dim <= solver::kMaxDenseDim;
  if (m == "rosenbrock" || (m == "auto" && stiff)) ic.method = solver::Method::Rosenbrock;
  ic.rel_tol = cfg.solver.rel_tol;
  ic.abs_tol = cfg.solver.abs_tol ? *cfg.solver.abs_tol * f.c : 1e-14 * f.p.m_0;
  ic.max_steps = cfg.solver.max_steps;
  ic.negativity_tol = 1e-12 * f.p.m_0;
  const double T = cfg.solver.t_end_h;
  const double dt = cfg.solver.output_step_h ? *cfg.solver.output_step_h : T / static_cast<double>(samples_default);
  for (std::size_t k = 1;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t >= T * (1 - 1e-12)) break;
    ic.output_times.push_back(t);
  }
  ic.output_times.push_back(T);
  return ic;
}

Json run_info(const config::RunConfig& cfg, const std::string& command) {
  Json j;
  j["command"] = command;
  j["isa"] = std::string(simd::isa_name(simd::active_isa()));
  j["config"] = config::effective_config(cfg);
  return j;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const config::RunConfig& cfg, const fs::path& out) {
  const auto& v = cfg.model.variant;
  const std::size_t N = cfg.model.N_max;
  Frame f = make_frame(cfg);
  if (v.tag == ModelTag::InVitroClosed) {
    if (f.spec) throw ConfigError("[clearance] does not apply to the in vitro model");
    f.spec = clearance::Constant{0.0};
  } else if (!f.spec) {
    throw ConfigError("[clearance] section required for in vivo models");
  }
  const LocalModel model(f.p, v, *f.spec, N);
  auto y0 = model.initial_state(cfg.model.seed_p2 * f.c);

  auto ic = integration_config(cfg, f, 1000, y0.size());
  ic.discontinuity_times = model.discontinuities(0.0, cfg.solver.t_end_h);
  ic.nonneg_mask = model.nonneg_mask();

  auto mass = [N](std::span<const double> y) { return moments(y.subspan(1, N - 1)).M; };
  auto buf = std::make_shared<std::vector<double>>(model.dim());
  std::vector<solver::Event> events;
  const double m0 = f.p.m_0;
  events.push_back({"halftime", [=](double, std::span<const double> y) { return mass(y) - 0.5 * m0; }, false, +1});
  events.push_back({"peak",
                    [&model, buf, N](double t, std::span<const double> y) {
                      model.rhs(t, y, *buf);
                      return moments(std::span<const double>(*buf).subspan(1, N - 1)).M;
                    },
                    false, -1});

  const auto traj = solver::integrate([&](double t, std::span<const double> y,
                                          std::span<double> dy) { model.rhs(t, y, dy); },
                                      y0, 0.0, cfg.solver.t_end_h, ic, events);

  // trajectory CSV
  {
    auto csv = open_out(out / "trajectory.csv");
    csv << "t,m,P,M";
    for (auto i : cfg.output.sizes) csv << ",p_" << i;
    if (v.tag == ModelTag::InVivoDynamicClearance) csv << ",lambda_2";
    csv << '\n';
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      const auto& y = traj.states[k];
      const Moments mo = moments(std::span<const double>(y).subspan(1, N - 1));
      csv << fmt(traj.times[k]) << ',' << fmt(y[0] / f.c) << ',' << fmt(mo.P / f.c) << ',' << fmt(mo.M / f.c);
      for (auto i : cfg.output.sizes) csv << ',' << fmt(y[i - 1] / f.c);
      if (v.tag == ModelTag::InVivoDynamicClearance) csv << ',' << fmt(y[N]);
      csv << '\n';
    }
  }

  // summary
  std::optional<double> M2;
  if (const auto* k = std::get_if<clearance::Constant>(&*f.spec); k && v.tag == ModelTag::InVivoConstMonomer) {
    if (k->lambda > 0) {
      const auto fp = analysis::fixed_point_moments(f.p, k->lambda);
      M2 = fp.exists ? fp.M_2 : 0.0;
    }
  }
  Json j = run_info(cfg, "simulate");
  const auto half = traj.event("halftime");
  j["halftime_h"] = half ? Json(half->t) : Json();
  double tau1 = traj.times.front(), Mmax = mass(traj.states.front());
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    if (mass(traj.states[k]) > Mmax) {
      Mmax = mass(traj.states[k]);
      tau1 = traj.times[k];
    }
  for (const auto& e : traj.events)
    if (e.label == "peak" && mass(e.y) > Mmax) {
      Mmax = mass(e.y);
      tau1 = e.t;
    }
  j["tau_1_h"] = tau1;
  j["M_max_M"] = Mmax / f.c;
  if (M2) {
    const double eps = 0.01 * (Mmax - *M2);
    std::optional<double> tau2;
    for (std::size_t k = 0; k < traj.times.size(); ++k)
      if (traj.times[k] > tau1 && mass(traj.states[k]) - *M2 <= eps) {
        tau2 = traj.times[k];
        break;
      }
    j["tau_2_h"] = opt(tau2);
    j["M_2_M"] = *M2 / f.c;
  } else {
    j["tau_2_h"] = Json();
    j["M_2_M"] = Json();
  }
  j["final_M_M"] = mass(traj.back()) / f.c;
  j["final_m_M"] = traj.back()[0] / f.c;
  j["steps_accepted"] = traj.accepted;
  j["steps_rejected"] = traj.rejected;
  write_json(out / "summary.json", j);
  return kOk;
}

// ---------------------------------------------------------------------------

template <class F>
Json guarded(F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    Json j;
    j["error"] = e.what();
    return j;
  }
}

int cmd_analyze(const config::RunConfig& cfg, const fs::path& out) {
  const Frame f = make_frame(cfg);
  const auto& p = f.phys;  // closed forms in physical units
  Json j = run_info(cfg, "analyze");

  const auto lc = analysis::linearized_coefficients(p);
  j["a_per_h"] = lc.a;
  j["b_per_h"] = lc.b;
  j["halftime_lin_h"] = guarded([&] { return Json(analysis::halftime_lin(p)); });
  j["halftime_lin_simplified_h"] = guarded([&] { return Json(analysis::halftime_lin_simplified(p)); });

  auto crit_all = [&](const KineticParameters& q, bool numeric) {
    Json c;
    const double moment = analysis::critical_clearance_constant(q, analysis::CritFormula::MomentBased);
    c["constant"]["moment_based"] = moment;
    c["constant"]["distribution_based"] =
        analysis::critical_clearance_constant(q, analysis::CritFormula::DistributionBased);
    c["constant"]["existence"] = guarded([&] {
      return Json(analysis::critical_clearance_existence(q, analysis::Family::Constant, cfg.analysis.existence_N));
    });
    if (numeric && moment > 0) {
      c["constant"]["numeric"] = guarded([&] {
        analysis::NumericOptions o;
        o.N_max = std::min<std::size_t>(cfg.model.N_max, 200);
        const auto r = analysis::critical_clearance_numeric(q, analysis::Family::Constant, 0.5 * moment,
                                                            1.5 * moment, o);
        Json n;
        n["value"] = r.value;
        n["lo"] = r.lo;
        n["hi"] = r.hi;
        n["evaluations"] = r.evaluations;
        n["N_max"] = o.N_max;
        return n;
      });
    }
    c["linear_in_size"] = guarded([&] {
      const auto r = analysis::critical_clearance_linear_size(q, cfg.analysis.existence_N);
      Json n;
      n["printed"] = r.printed;
      n["existence"] = r.numeric;
      return n;
    });
    c["inverse_in_size"] = guarded([&] {
      const auto r = analysis::critical_clearance_inverse_size(q);
      Json n;
      n["exact"] = r.exact;
      n["approx"] = r.approx;
      n["existence"] = guarded([&] {
        return Json(analysis::critical_clearance_existence(q, analysis::Family::InverseInSize,
                                                           cfg.analysis.existence_N));
      });
      return n;
    });
    return c;
  };
  j["lambda_crit_per_h"] = crit_all(p, cfg.analysis.numeric);

  // kinetic drug sweep: ratios against the untreated system
  {
    const KineticParameters base = cfg.model.params;
    Json sweep = Json::array();
    const double c0 = analysis::critical_clearance_constant(base);
    double l0 = 0, i0 = 0;
    try {
      l0 = analysis::critical_clearance_existence(base, analysis::Family::LinearInSize, cfg.analysis.existence_N);
    } catch (const std::exception&) {
    }
    i0 = analysis::critical_clearance_inverse_size(base).exact;
    for (double dk : cfg.analysis.delta_k) {
      KineticParameters q = base;
      q.k_2 *= dk;
      Json e;
      e["delta_k"] = dk;
      const double cq = analysis::critical_clearance_constant(q);
      e["constant"] = cq;
      e["constant_ratio"] = c0 > 0 ? Json(cq / c0) : Json();
      e["linear_in_size_ratio"] = guarded([&] {
        const double lq =
            analysis::critical_clearance_existence(q, analysis::Family::LinearInSize, cfg.analysis.existence_N);
        return l0 > 0 ? Json(lq / l0) : Json();
      });
      e["inverse_in_size_ratio"] = Json(analysis::critical_clearance_inverse_size(q).exact / i0);
      sweep.push_back(e);
    }
    j["delta_k_sweep"] = sweep;
  }

  // configured clearance: fixed points and steady-state distribution
  if (f.spec) {
    if (const auto* k = std::get_if<clearance::Constant>(&*f.spec); k && k->lambda > 0) {
      const auto fp = analysis::fixed_point_moments(p, k->lambda);
      Json x;
      x["lambda_per_h"] = k->lambda;
      x["exists"] = fp.exists;
      x["P_2_M"] = fp.P_2;
      x["M_2_M"] = fp.M_2;
      auto eig = [&](double P, double M) {
        const auto ev = analysis::moment_jacobian_eigenvalues(p, k->lambda, P, M);
        Json a = Json::array();
        for (const auto& z : ev) a.push_back({z.real(), z.imag()});
        return a;
      };
      x["eigenvalues_trivial"] = eig(0.0, 0.0);
      if (fp.exists) x["eigenvalues_nontrivial"] = eig(fp.P_2, fp.M_2);
      j["fixed_point"] = x;
    }
    const bool static_spec = !std::holds_alternative<clearance::Dynamic>(*f.spec) &&
                             !std::holds_alternative<clearance::DosingProfile>(*f.spec);
    if (static_spec) {
      j["steady_state"] = guarded([&] {
        const auto d = analysis::steady_state_distribution(p, *f.spec, cfg.model.N_max);
        auto csv = open_out(out / "steady_state.csv");
        csv << "i,delta,Delta,p_star\n";
        for (std::size_t k = 0; k < d.Delta_i.size(); ++k)
          csv << k + 2 << ',' << fmt(d.delta_i[k]) << ',' << fmt(d.Delta_i[k]) << ','
              << fmt(d.exists ? d.p_star[k] : 0.0) << '\n';
        Json s;
        s["exists"] = d.exists;
        s["p2_star_M"] = d.p2_star;
        s["M_star_M"] = d.M_star;
        s["P_star_M"] = d.P_star;
        s["Delta"] = d.Delta;
        s["tail"] = d.tail;
        s["C1"] = d.conditions.C1;
        s["C2"] = d.conditions.C2;
        s["C3"] = d.conditions.C3;
        s["tail_resolved"] = d.conditions.tail_resolved;
        return s;
      });
    }
  }
  write_json(out / "analysis.json", j);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_network(config::RunConfig cfg, const fs::path& out) {
  if (!cfg.network) throw ConfigError("[network] section required");
  if (!cfg.clearance) throw ConfigError("[clearance] section required for network runs");
  if (cfg.model.variant.tag == ModelTag::InVitroClosed)
    throw ConfigError("network runs need an in vivo model variant");
  if (!cfg.model.k_n_zeroed_given) {
    cfg.model.variant.k_n_zeroed = true;
    cfg.model.k_n_zeroed_given = true;
  }
  const auto& n = *cfg.network;
  if (!(cfg.model.seed_p2 > 0)) throw ConfigError("model.seed_p2_M must be > 0 for network runs");

  connectome::Connectome g;
  if (!n.edges.empty()) {
    g = connectome::load_connectome(n.edges, n.metadata);
  } else if (n.generator == "small_world") {
    g = connectome::generate_small_world(n.V, n.k, n.rewire_p, n.seed);
  } else if (n.generator == "path") {
    g = connectome::generate_path(n.V, n.weight);
  } else {
    g = connectome::generate_star(n.leaf_weights);
  }
  const auto seed = g.resolve(n.seed_node);
  if (!seed) throw ConfigError("network.seed_node '" + n.seed_node + "' does not name a node");

  const Frame f = make_frame(cfg);
  const connectome::DiffusionSchedule rho =
      n.diffusion == "cube_inverse" ? connectome::DiffusionSchedule{connectome::diffusion::CubeInverse{n.rho_per_h}}
                                    : connectome::DiffusionSchedule{connectome::diffusion::Constant{n.rho_per_h}};
  const connectome::NetworkModel model(g, f.p, cfg.model.variant, {*f.spec}, rho, cfg.model.N_max);

  double ref = f.p.m_0;
  if (n.invasion_reference == "M_2") {
    const auto* k = std::get_if<clearance::Constant>(&*f.spec);
    if (!k) throw ConfigError("invasion_reference = \"M_2\" needs constant clearance");
    const auto fp = analysis::fixed_point_moments(f.p, k->lambda);
    if (!fp.exists) throw ConfigError("invasion_reference = \"M_2\": no endemic state at this clearance");
    ref = fp.M_2;
  }
  const double threshold = n.invasion_fraction * ref;

  auto ic = integration_config(cfg, f, 200, model.dim());
  ic.discontinuity_times = model.discontinuities(0.0, cfg.solver.t_end_h);
  ic.nonneg_mask = model.nonneg_mask();
  const auto traj = solver::integrate(
      [&](double t, std::span<const double> y, std::span<double> dy) { model.rhs(t, y, dy); },
      model.initial_state(*seed, cfg.model.seed_p2 * f.c), 0.0, cfg.solver.t_end_h, ic,
      model.invasion_events(threshold));

  // outputs in physical units
  auto scaled = traj;
  if (f.c != 1.0)
    for (auto& s : scaled.states)
      for (std::size_t k = 0; k < g.V * cfg.model.N_max; ++k) s[k] /= f.c;
  {
    auto csv = open_out(out / "nodes.csv");
    connectome::write_node_csv(csv, scaled, model);
  }
  if (!n.sizes.empty()) {
    auto csv = open_out(out / "sizes.csv");
    connectome::write_size_csv(csv, scaled, model, n.sizes);
  }
  const auto order = connectome::invasion_order(traj, model, threshold);
  const auto hops = connectome::hop_distances(g, *seed);
  Json inv = Json::array();
  {
    auto csv = open_out(out / "invasion.csv");
    csv << "node,label,time_h,rank,hops\n";
    for (const auto& r : order) {
      const std::string label = r.node < g.labels.size() ? g.labels[r.node] : std::to_string(r.node);
      csv << r.node << ',' << label << ',' << (r.time ? fmt(*r.time) : "") << ',' << r.rank << ','
          << hops[r.node] << '\n';
      Json e;
      e["node"] = r.node;
      e["time_h"] = opt(r.time);
      e["rank"] = r.rank;
      inv.push_back(e);
    }
  }
  Json j = run_info(cfg, "network");
  j["V"] = g.V;
  j["seed_node"] = *seed;
  j["threshold_M"] = threshold / f.c;
  std::size_t invaded = 0;
  for (const auto& r : order) invaded += r.time.has_value();
  j["invaded"] = invaded;
  j["invasion"] = inv;
  const auto final_mass = model.node_mass(traj.back());
  Json fm = Json::array();
  for (double x : final_mass) fm.push_back(x / f.c);
  j["final_M_M"] = fm;
  j["steps_accepted"] = traj.accepted;
  j["steps_rejected"] = traj.rejected;
  write_json(out / "summary.json", j);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_optimize(const config::RunConfig& cfg, const fs::path& out, unsigned threads) {
  if (!cfg.optimizer) throw ConfigError("[optimizer] section required");
  const auto& o = *cfg.optimizer;
  Frame f = make_frame(cfg);
  auto s = o.settings;
  s.threads = threads;
  s.variant = cfg.model.variant;
  s.mtm.abs_tol = 1e-14 * f.p.m_0;

  Json j = run_info(cfg, "optimize");
  j["M_bar_units"] = "M";
  j["rescale_c"] = f.c;
  if (!o.lambda_grid_per_h.empty()) {
    const auto grid = optimizer::sweep(o.B_grid_days, o.lambda_grid_per_h, f.p, s);
    auto csv = open_out(out / "contour.csv");
    optimizer::write_contour_csv(csv, grid, 1.0 / f.c);
    std::size_t missing = 0;
    for (const auto& pt : grid.points) missing += !pt.M_bar;
    j["sweep_points"] = grid.points.size();
    j["sweep_missing"] = missing;
  }
  if (o.C_max) {
    try {
      const auto best = optimizer::constrained_optimum(*o.C_max, f.p, s, o.B_grid_days);
      open_out(out / "optimum.json") << optimizer::optimum_json(best, 1.0 / f.c) << '\n';
      j["optimum"] = Json::parse(optimizer::optimum_json(best, 1.0 / f.c));
    } catch (const optimizer::InfeasibleError& e) {
      std::cerr << "infeasible: " << e.what() << '\n';
      j["infeasible"] = e.what();
      write_json(out / "summary.json", j);
      return kInfeasible;
    }
  }
  write_json(out / "summary.json", j);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Size-resolved aggregation kinetics, network spreading and dosing optimization"};
  app.require_subcommand(1);
  std::string cfg_path, out_dir = ".";
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  std::vector<std::pair<std::string, std::string>> cmds = {
      {"simulate", "integrate a homogeneous model"},
      {"analyze", "closed-form and numeric critical clearances, fixed points, steady states"},
      {"network", "network-coupled model and invasion order"},
      {"optimize", "dosing-regime sweep and constrained optimum"}};
  for (const auto& [name, help] : cmds) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", cfg_path, "TOML or JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    const auto cfg = config::load_config(cfg_path);
    fs::create_directories(out_dir);
    if (cmd == "simulate") return cmd_simulate(cfg, out_dir);
    if (cmd == "analyze") return cmd_analyze(cfg, out_dir);
    if (cmd == "network") return cmd_network(cfg, out_dir);
    return cmd_optimize(cfg, out_dir, threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const solver::SolverError& e) {
    std::cerr << "solver failure at t = " << e.time() << " h: " << e.what() << '\n';
    return kSolver;
  } catch (const therapy::ConvergenceError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
