#include "qscf/security_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace qscf {

namespace {
// Kitaev floor for strong coin flipping: max cheating probability >= 1/sqrt2.
constexpr double kKitaevFloor = 0.70710678118654752;
}  // namespace

void SecurityReport::validate() const {
  const double probs[4] = {p_alice, p_bob, p_honest_abort, p_classical};
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::logic_error("security report probability out of [0, 1]");
    }
  }
  if (std::max(p_alice, p_bob) < kKitaevFloor) {
    throw std::logic_error("cheating probability below the Kitaev floor");
  }
}

double alice_cheat_prob(double a) {
  if (!std::isfinite(a) || a < 0.5 || a > 1.0) {
    throw std::domain_error("alice_cheat_prob: a must lie in [0.5, 1]");
  }
  return 0.75 + 0.5 * std::sqrt(a * (1.0 - a));
}

double bob_cheat_prob(double a, const PhotonStatistics& stats,
                      std::uint64_t pulses_per_flip) {
  if (!std::isfinite(a) || a < 0.5 || a > 1.0) {
    throw std::domain_error("bob_cheat_prob: a must lie in [0.5, 1]");
  }
  if (pulses_per_flip < 1) {
    throw std::domain_error("pulses_per_flip must be at least 1");
  }
  const double pm = prob_multiphoton(stats);
  const double p_multi_seq =
      1.0 - std::exp(static_cast<double>(pulses_per_flip) * std::log1p(-pm));
  return p_multi_seq + (1.0 - p_multi_seq) * a;
}

double honest_abort_prob(double qber, double p_click,
                         std::uint64_t pulses_per_flip) {
  if (!(qber >= 0.0 && qber < 0.5)) {
    throw std::domain_error("qber must lie in [0, 0.5)");
  }
  const double z = no_detection_prob(p_click, pulses_per_flip);
  return z + (1.0 - z) * qber / 2.0;
}

double classical_cheat_bound(double honest_abort) {
  if (!(honest_abort >= 0.0 && honest_abort <= 1.0)) {
    throw std::domain_error("honest abort probability must lie in [0, 1]");
  }
  return std::max(0.0, 1.0 - 6.0 * honest_abort);
}

double coin_flip_rate(double clock_hz, std::uint64_t pulses_per_flip,
                      double honest_abort) {
  if (!std::isfinite(clock_hz) || clock_hz <= 0.0) {
    throw std::domain_error("clock_hz must be finite and positive");
  }
  if (pulses_per_flip < 1) {
    throw std::domain_error("pulses_per_flip must be at least 1");
  }
  return clock_hz / static_cast<double>(pulses_per_flip) *
         (1.0 - honest_abort);
}

SecurityReport quantum_gain(const ScenarioConfig& scenario) {
  scenario.validate();
  const PhotonStatistics stats = photon_statistics(scenario.source);
  const double p_click = per_pulse_click_prob(stats, scenario.link);

  SecurityReport r;
  r.p_alice = alice_cheat_prob(scenario.state_param_a);
  r.p_bob = bob_cheat_prob(scenario.state_param_a, stats,
                           scenario.pulses_per_flip);
  r.p_honest_abort =
      honest_abort_prob(scenario.link.qber, p_click, scenario.pulses_per_flip);
  r.p_classical = classical_cheat_bound(r.p_honest_abort);
  r.gain = r.p_classical - std::max(r.p_alice, r.p_bob);
  r.gain_pp = 100.0 * r.gain;
  r.gain_rel_pct =
      r.p_classical > 0.0 ? 100.0 * r.gain / r.p_classical : 0.0;
  r.rate_hz = coin_flip_rate(scenario.clock_hz, scenario.pulses_per_flip,
                             r.p_honest_abort);
  r.validate();
  return r;
}

namespace {

// P_A - P_B as a function of a; strictly decreasing on (0.5, 1).
double fairness_gap(double a, double p_multi_seq) {
  return 0.75 + 0.5 * std::sqrt(a * (1.0 - a)) -
         (p_multi_seq + (1.0 - p_multi_seq) * a);
}

}  // namespace

StateParameter solve_fair_a(const PhotonStatistics& stats,
                            std::uint64_t pulses_per_flip) {
  const double pm = prob_multiphoton(stats);
  const double p_multi_seq =
      1.0 - std::exp(static_cast<double>(pulses_per_flip) * std::log1p(-pm));
  double lo = 0.5 + 1e-9;
  double hi = 1.0 - 1e-9;
  if (!(fairness_gap(lo, p_multi_seq) > 0.0 &&
        fairness_gap(hi, p_multi_seq) < 0.0)) {
    throw std::runtime_error(
        "no fair state parameter exists: Bob's bound exceeds Alice's over "
        "the whole (0.5, 1) interval");
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (fairness_gap(mid, p_multi_seq) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return StateParameter(0.5 * (lo + hi));
}

namespace {

GainCell evaluate_cell(SourceKind kind, double g2, std::uint64_t k, double mu,
                       const LinkBudget& link, std::optional<double> fixed_a) {
  GainCell cell;
  cell.pulses_per_flip = k;
  cell.mu = mu;
  try {
    const PhotonStatistics stats =
        kind == SourceKind::Wcp ? wcp_statistics(mu) : sps_statistics(mu, g2);
    if (fixed_a) {
      cell.a_star = *fixed_a;
    } else {
      try {
        cell.a_star = solve_fair_a(stats, k).value();
      } catch (const std::runtime_error&) {
        // No fair point: minimize the larger bound over an a grid instead.
        cell.fairness_ok = false;
        double best_a = 0.75;
        double best = 2.0;
        for (int i = 1; i < 2000; ++i) {
          const double a = 0.5 + 0.5 * i / 2000.0;
          const double worst =
              std::max(alice_cheat_prob(a), bob_cheat_prob(a, stats, k));
          if (worst < best) {
            best = worst;
            best_a = a;
          }
        }
        cell.a_star = best_a;
      }
    }
    cell.p_alice = alice_cheat_prob(cell.a_star);
    cell.p_bob = bob_cheat_prob(cell.a_star, stats, k);
    cell.honest_abort =
        honest_abort_prob(link.qber, per_pulse_click_prob(stats, link), k);
    cell.p_classical = classical_cheat_bound(cell.honest_abort);
    cell.gain = cell.p_classical - std::max(cell.p_alice, cell.p_bob);
  } catch (const std::exception& e) {
    cell.a_star = cell.p_alice = cell.p_bob = cell.honest_abort =
        cell.p_classical = cell.gain = std::nan("");
    cell.fairness_ok = false;
    cell.note = e.what();
  }
  return cell;
}

}  // namespace

GainMap sweep_gain(SourceKind kind, double g2,
                   const std::vector<std::uint64_t>& k_grid,
                   const std::vector<double>& mu_grid, const LinkBudget& link,
                   std::optional<double> fixed_a, unsigned jobs) {
  if (k_grid.empty() || mu_grid.empty()) {
    throw std::domain_error("sweep grids must be non-empty");
  }
  if (!std::is_sorted(k_grid.begin(), k_grid.end()) ||
      std::adjacent_find(k_grid.begin(), k_grid.end()) != k_grid.end()) {
    throw std::domain_error("K grid must be strictly increasing");
  }
  if (!std::is_sorted(mu_grid.begin(), mu_grid.end()) ||
      std::adjacent_find(mu_grid.begin(), mu_grid.end()) != mu_grid.end()) {
    throw std::domain_error("mu grid must be strictly increasing");
  }
  link.validate();

  GainMap map;
  map.k_grid = k_grid;
  map.mu_grid = mu_grid;
  map.cells.resize(k_grid.size() * mu_grid.size());

  const std::size_t n_cells = map.cells.size();
  const unsigned n_workers = std::max(1u, std::min<unsigned>(jobs, n_cells));
  auto work = [&](unsigned w) {
    for (std::size_t idx = w; idx < n_cells; idx += n_workers) {
      const std::size_t ki = idx / mu_grid.size();
      const std::size_t mi = idx % mu_grid.size();
      map.cells[idx] =
          evaluate_cell(kind, g2, k_grid[ki], mu_grid[mi], link, fixed_a);
    }
  };
  if (n_workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < n_workers; ++w) workers.emplace_back(work, w);
    for (auto& t : workers) t.join();
  }
  return map;
}

}  // namespace qscf
