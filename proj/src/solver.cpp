#include "neuroagg/solver.hpp"

#include "neuroagg/simd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

namespace neuroagg::solver {

namespace {

// Dormand–Prince 5(4)
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 10.0;

void hermite(double t0, double t1, std::span<const double> y0, std::span<const double> f0,
             std::span<const double> y1, std::span<const double> f1, double t,
             std::span<double> out) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
}

void hermite_deriv(double t0, double t1, std::span<const double> y0, std::span<const double> f0,
                   std::span<const double> y1, std::span<const double> f1, double t,
                   std::span<double> out) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s;
  const double d00 = (6 * s2 - 6 * s) / h, d10 = 3 * s2 - 4 * s + 1;
  const double d01 = (-6 * s2 + 6 * s) / h, d11 = 3 * s2 - 2 * s;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = d00 * y0[i] + d10 * f0[i] + d01 * y1[i] + d11 * f1[i];
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

bool crosses(double ga, double gb, int direction) {
  const bool up = ga < 0 && gb >= 0;
  const bool down = ga > 0 && gb <= 0;
  if (direction > 0) return up;
  if (direction < 0) return down;
  return up || down;
}

class Stepper {
 public:
  Stepper(const SegmentRhs& rhs, std::size_t n, const IntegrationConfig& cfg)
      : rhs_(rhs), cfg_(cfg), n_(n) {
    for (auto& k : k_) k.resize(n);
    ytmp_.resize(n);
    y1_.resize(n);
    err_.resize(n);
    zero_.assign(n, 0.0);
  }

  // Stages landing on the segment end see the left limit of a right-continuous
  // forcing, not the value after the jump.
  void eval(double t, std::span<const double> y, std::span<double> out, const Segment& seg) {
    if (t >= seg.t_end) t = std::nextafter(seg.t_end, seg.t_begin);
    rhs_(t, y, out, seg);
  }

  // One DP attempt from (t, y, f=k_[0]) with step h; fills y1_, k_[6], err.
  double attempt(double t, std::span<const double> y, double h, const Segment& seg) {
    const auto& K = simd::kernels();
    const double* ks[6] = {k_[0].data(), k_[1].data(), k_[2].data(),
                           k_[3].data(), k_[4].data(), k_[5].data()};
    auto stage = [&](std::size_t s, std::initializer_list<double> a, double c) {
      std::array<double, 6> coef{};
      std::size_t j = 0;
      for (double v : a) coef[j++] = h * v;
      K.combine(y.data(), ks, coef.data(), j, ytmp_.data(), n_);
      eval(t + c * h, ytmp_, k_[s], seg);
    };
    stage(1, {a21}, c2);
    stage(2, {a31, a32}, c3);
    stage(3, {a41, a42, a43}, c4);
    stage(4, {a51, a52, a53, a54}, c5);
    stage(5, {a61, a62, a63, a64, a65}, 1.0);
    {
      const std::array<double, 6> coef{h * a71, 0.0, h * a73, h * a74, h * a75, h * a76};
      K.combine(y.data(), ks, coef.data(), 6, y1_.data(), n_);
    }
    eval(t + h, y1_, k_[6], seg);
    const double* ks7[7] = {ks[0], ks[1], ks[2], ks[3], ks[4], ks[5], k_[6].data()};
    const std::array<double, 7> ecoef{h * e1, 0.0, h * e3, h * e4, h * e5, h * e6, h * e7};
    K.combine(zero_.data(), ks7, ecoef.data(), 7, err_.data(), n_);
    return K.error_norm_max(err_.data(), y.data(), y1_.data(), cfg_.rel_tol, cfg_.abs_tol, n_);
  }

  // Rosenbrock 2(3) (Shampine-Reichelt): W = I - h d J, one LU per attempt.
  // The Jacobian is rebuilt once per accepted point.
  double attempt_rosenbrock(double t, std::span<const double> y, double h, const Segment& seg) {
    constexpr double d = 1.0 / (2.0 + 1.4142135623730951);
    constexpr double e32 = 6.0 + 1.4142135623730951;
    const auto& f0 = k_[0];
    if (!jac_valid_) {
      build_jacobian(t, y, seg);
      jac_valid_ = true;
    }
    Eigen::MatrixXd W = -h * d * J_;
    W.diagonal().array() += 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(W);
    using Vec = Eigen::Map<Eigen::VectorXd>;
    using CVec = Eigen::Map<const Eigen::VectorXd>;
    CVec F0(f0.data(), n_), Y(y.data(), n_), T(dfdt_.data(), n_);
    Vec k1(k_[1].data(), n_), k2(k_[2].data(), n_), k3(k_[3].data(), n_), F1(k_[4].data(), n_);
    Vec Y1(y1_.data(), n_), F2(k_[6].data(), n_), E(err_.data(), n_), Yt(ytmp_.data(), n_);
    k1 = lu.solve(F0 + h * d * T);
    Yt = Y + 0.5 * h * k1;
    eval(t + 0.5 * h, ytmp_, k_[4], seg);
    k2 = lu.solve(F1 - k1) + k1;
    Y1 = Y + h * k2;
    eval(t + h, y1_, k_[6], seg);
    k3 = lu.solve(F2 - e32 * (k2 - F1) - 2.0 * (k1 - F0) + h * d * T);
    E = (h / 6.0) * (k1 - 2.0 * k2 + k3);
    return simd::kernels().error_norm_max(err_.data(), y.data(), y1_.data(), cfg_.rel_tol, cfg_.abs_tol,
                                          n_);
  }

  void build_jacobian(double t, std::span<const double> y, const Segment& seg) {
    J_.resize(n_, n_);
    std::vector<double> yp(y.begin(), y.end()), fp(n_);
    const double sq = std::sqrt(std::numeric_limits<double>::epsilon());
    for (std::size_t j = 0; j < n_; ++j) {
      const double scale = std::max(std::fabs(y[j]), cfg_.abs_tol / cfg_.rel_tol);
      yp[j] = y[j] + sq * scale;
      const double step = yp[j] - y[j];
      rhs_(t, yp, fp, seg);
      for (std::size_t i = 0; i < n_; ++i) J_(i, j) = (fp[i] - k_[0][i]) / step;
      yp[j] = y[j];
    }
    dfdt_.resize(n_);
    const double dt = sq * std::max(std::fabs(t), 1.0);
    if (t + dt < seg.t_end) {
      rhs_(t + dt, y, fp, seg);
      for (std::size_t i = 0; i < n_; ++i) dfdt_[i] = (fp[i] - k_[0][i]) / dt;
    } else {
      std::fill(dfdt_.begin(), dfdt_.end(), 0.0);
    }
  }

  double step(double t, std::span<const double> y, double h, const Segment& seg) {
    return cfg_.method == Method::Rosenbrock ? attempt_rosenbrock(t, y, h, seg) : attempt(t, y, h, seg);
  }

  bool negative(std::span<const double> v) const {
    if (cfg_.nonneg_mask.empty() || !std::isfinite(cfg_.negativity_tol)) return false;
    for (std::size_t i = 0; i < n_; ++i)
      if (cfg_.nonneg_mask[i] && v[i] < -cfg_.negativity_tol) return true;
    return false;
  }

  const SegmentRhs& rhs_;
  const IntegrationConfig& cfg_;
  std::size_t n_;
  std::array<std::vector<double>, 7> k_;
  std::vector<double> ytmp_, y1_, err_, zero_, dfdt_;
  Eigen::MatrixXd J_;
  bool jac_valid_ = false;
};

double initial_step(const SegmentRhs& rhs, const Segment& seg, double t, std::span<const double> y,
                    std::span<const double> f, const IntegrationConfig& cfg) {
  const std::size_t n = y.size();
  double d0 = 0, d1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::fabs(y[i]);
    d0 += (y[i] / sc) * (y[i] / sc);
    d1 += (f[i] / sc) * (f[i] / sc);
  }
  d0 = std::sqrt(d0 / n);
  d1 = std::sqrt(d1 / n);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, seg.t_end - t);
  std::vector<double> y1(n), f1(n);
  for (std::size_t i = 0; i < n; ++i) y1[i] = y[i] + h0 * f[i];
  rhs(t + h0, y1, f1, seg);
  double d2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::fabs(y[i]);
    d2 += ((f1[i] - f[i]) / sc) * ((f1[i] - f[i]) / sc);
  }
  d2 = std::sqrt(d2 / n) / h0;
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  // the heuristic collapses when a component starts at zero under a tiny
  // absolute tolerance; step control recovers from a floor that is too large
  const double floor = 1e-9 * (seg.t_end - seg.t_begin);
  return std::min({std::max(std::min(100 * h0, h1), floor), cfg.max_step, seg.t_end - t});
}

}  // namespace

std::vector<double> Trajectory::at(double t) const {
  if (times.empty()) throw std::out_of_range("empty trajectory");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  std::vector<double> out(states[k].size());
  hermite(times[k], times[k + 1], states[k], derivs[k], states[k + 1], derivs[k + 1], t, out);
  return out;
}

std::optional<EventRecord> Trajectory::event(const std::string& label) const {
  for (const auto& e : events)
    if (e.label == label) return e;
  return std::nullopt;
}

Trajectory integrate(const Rhs& rhs, std::vector<double> y0, double t0, double t1,
                     const IntegrationConfig& config, const std::vector<Event>& events) {
  return integrate_segmented(
      [&rhs](double t, std::span<const double> y, std::span<double> dy, const Segment&) {
        rhs(t, y, dy);
      },
      std::move(y0), t0, t1, config, events);
}

Trajectory integrate_segmented(const SegmentRhs& rhs, std::vector<double> y0, double t0, double t1,
                               const IntegrationConfig& cfg, const std::vector<Event>& events) {
  if (!(t1 > t0)) throw std::invalid_argument("integrate: t1 must exceed t0");
  if (!(cfg.rel_tol > 0 && cfg.abs_tol > 0)) throw std::invalid_argument("tolerances must be > 0");
  if (!std::is_sorted(cfg.discontinuity_times.begin(), cfg.discontinuity_times.end()) ||
      std::adjacent_find(cfg.discontinuity_times.begin(), cfg.discontinuity_times.end()) !=
          cfg.discontinuity_times.end())
    throw std::invalid_argument("discontinuity_times must be strictly increasing");
  if (!cfg.nonneg_mask.empty() && cfg.nonneg_mask.size() != y0.size())
    throw std::invalid_argument("nonneg_mask length mismatch");
  if (!all_finite(y0)) throw SolverError(SolverError::Kind::NonFinite, t0, "non-finite initial state");

  const std::size_t n = y0.size();
  if (cfg.method == Method::Rosenbrock && n > kMaxDenseDim)
    throw std::invalid_argument("Rosenbrock method uses a dense Jacobian; system too large");
  const double event_tol = 1e-10 * (t1 - t0);

  std::vector<double> breaks{t0};
  for (double d : cfg.discontinuity_times)
    if (d > t0 && d < t1) breaks.push_back(d);
  breaks.push_back(t1);

  const bool dense_out = !cfg.output_times.empty();
  std::size_t next_out = 0;
  while (dense_out && next_out < cfg.output_times.size() && cfg.output_times[next_out] <= t0)
    ++next_out;

  Trajectory traj;
  Stepper st(rhs, n, cfg);
  std::vector<double> y = std::move(y0), tmp(n);
  std::vector<double> gvals(events.size());
  double h = cfg.initial_step;
  double err_prev = 1e-4;
  std::size_t steps = 0;
  bool stop = false;

  auto store = [&](double t, std::span<const double> yy, std::span<const double> ff) {
    if (!traj.times.empty() && t <= traj.times.back()) return;
    traj.times.push_back(t);
    traj.states.emplace_back(yy.begin(), yy.end());
    traj.derivs.emplace_back(ff.begin(), ff.end());
  };

  for (std::size_t s = 0; s + 1 < breaks.size() && !stop; ++s) {
    const Segment seg{breaks[s], breaks[s + 1], s};
    double t = seg.t_begin;
    auto& f = st.k_[0];
    rhs(t, y, f, seg);
    st.jac_valid_ = false;
    if (!all_finite(f)) throw SolverError(SolverError::Kind::NonFinite, t, "non-finite derivative");
    if (traj.times.empty()) {
      store(t, y, f);
      for (std::size_t e = 0; e < events.size(); ++e) gvals[e] = events[e].g(t, y);
    } else if (traj.times.back() == t) {
      // right-sided derivative at a restart
      traj.derivs.back() = f;
    }
    if (!(h > 0)) h = initial_step(rhs, seg, t, y, f, cfg);

    while (t < seg.t_end) {
      if (++steps > cfg.max_steps)
        throw SolverError(SolverError::Kind::MaxSteps, t, "maximum step count exceeded");
      h = std::min(h, cfg.max_step);
      const double h_free = h;
      bool last = false;
      if (t + h >= seg.t_end || t + 1.01 * h >= seg.t_end) {
        h = seg.t_end - t;
        last = true;
      }
      if (h <= 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(t)))
        throw SolverError(SolverError::Kind::StepUnderflow, t, "step size underflow");

      const double err = st.step(t, y, h, seg);
      const double order = cfg.method == Method::Rosenbrock ? 3.0 : 5.0;
      if (!std::isfinite(err)) {
        ++traj.rejected;
        h *= 0.25;
        continue;
      }
      if (err > 1.0) {
        ++traj.rejected;
        h *= std::max(kFacMin, kSafety * std::pow(err, -1.0 / order));
        continue;
      }
      if (st.negative(st.y1_)) {
        ++traj.rejected;
        h *= 0.25;
        if (h <= 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(t)))
          throw SolverError(SolverError::Kind::Negativity, t,
                            "state fell below the negativity tolerance");
        continue;
      }

      // accepted
      ++traj.accepted;
      const double tn = last ? seg.t_end : t + h;
      const auto& fn = st.k_[6];

      double t_stop = tn;
      bool terminal_hit = false;
      for (std::size_t e = 0; e < events.size(); ++e) {
        const double gb = events[e].g(tn, st.y1_);
        if (crosses(gvals[e], gb, events[e].direction)) {
          double lo = t, hi = tn, glo = gvals[e];
          while (hi - lo > event_tol) {
            const double mid = 0.5 * (lo + hi);
            hermite(t, tn, y, f, st.y1_, fn, mid, tmp);
            const double gm = events[e].g(mid, tmp);
            if (crosses(glo, gm, events[e].direction)) {
              hi = mid;
            } else {
              lo = mid;
              glo = gm;
            }
          }
          hermite(t, tn, y, f, st.y1_, fn, hi, tmp);
          traj.events.push_back({events[e].label, hi, tmp});
          if (events[e].terminal) {
            t_stop = std::min(t_stop, hi);
            terminal_hit = true;
          }
        }
        gvals[e] = gb;
      }

      if (dense_out) {
        std::vector<double> dd(n);
        while (next_out < cfg.output_times.size() && cfg.output_times[next_out] <= t_stop) {
          const double to = cfg.output_times[next_out++];
          hermite(t, tn, y, f, st.y1_, fn, to, tmp);
          hermite_deriv(t, tn, y, f, st.y1_, fn, to, dd);
          store(to, tmp, dd);
        }
      }

      if (terminal_hit) {
        std::vector<double> dd(n);
        hermite(t, tn, y, f, st.y1_, fn, t_stop, tmp);
        hermite_deriv(t, tn, y, f, st.y1_, fn, t_stop, dd);
        store(t_stop, tmp, dd);
        // drop events located past the terminal one
        std::erase_if(traj.events, [&](const EventRecord& r) { return r.t > t_stop; });
        traj.terminated = true;
        y = tmp;
        stop = true;
        break;
      }

      y.swap(st.y1_);
      f.swap(st.k_[6]);
      st.jac_valid_ = false;
      t = tn;
      if (!dense_out || t == t1) store(t, y, f);

      const double e_cl = std::max(err, 1e-10);
      double fac = kSafety * std::pow(e_cl, -0.7 / order) * std::pow(err_prev, 0.4 / order);
      fac = std::clamp(fac, kFacMin, kFacMax);
      err_prev = std::max(err, 1e-4);
      h = last ? std::max(h_free, h * fac) : h * fac;
    }
  }
  return traj;
}

std::optional<double> first_crossing(const Trajectory& traj,
                                     const std::function<double(std::span<const double>)>& obs,
                                     double level, double t_tol) {
  if (traj.times.size() < 2) return std::nullopt;
  double prev = obs(traj.states[0]);
  if (prev >= level) return traj.times[0];
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    const double cur = obs(traj.states[k]);
    if (cur >= level) {
      double lo = traj.times[k - 1], hi = traj.times[k];
      while (hi - lo > t_tol) {
        const double mid = 0.5 * (lo + hi);
        if (obs(traj.at(mid)) >= level) hi = mid;
        else lo = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = cur;
  }
  return std::nullopt;
}

std::optional<double> find_halftime(const Trajectory& traj,
                                    const std::function<double(std::span<const double>)>& mass,
                                    double m_0) {
  if (traj.times.empty()) return std::nullopt;
  const double tol = 1e-9 * std::max(1.0, traj.times.back() - traj.times.front());
  return first_crossing(traj, mass, 0.5 * m_0, tol);
}

Timescales find_timescales(const Trajectory& traj,
                           const std::function<double(std::span<const double>)>& mass, double M_2) {
  if (traj.times.empty()) throw std::invalid_argument("empty trajectory");
  std::size_t kmax = 0;
  double Mmax = mass(traj.states[0]);
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    const double v = mass(traj.states[k]);
    if (v > Mmax) {
      Mmax = v;
      kmax = k;
    }
  }
  Timescales ts{traj.times[kmax], std::nullopt, Mmax};
  const double eps = 0.01 * (Mmax - M_2);
  const double tol = 1e-9 * std::max(1.0, traj.times.back() - traj.times.front());
  for (std::size_t k = kmax + 1; k < traj.times.size(); ++k) {
    if (mass(traj.states[k]) - M_2 <= eps) {
      double lo = traj.times[k - 1], hi = traj.times[k];
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mass(traj.at(mid)) - M_2 <= eps) hi = mid;
        else lo = mid;
      }
      ts.tau_2 = hi;
      break;
    }
  }
  return ts;
}

}  // namespace neuroagg::solver
