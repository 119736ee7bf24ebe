#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qscf/link_model.hpp"
#include "qscf/photon_source.hpp"
#include "qscf/protocol_engine.hpp"

namespace qscf {

struct SecurityReport {
  double p_alice = 0.0;
  double p_bob = 0.0;
  double p_honest_abort = 0.0;
  double p_classical = 0.0;
  double gain = 0.0;          // p_classical - max(p_alice, p_bob)
  double gain_pp = 0.0;       // same, in percentage points
  double gain_rel_pct = 0.0;  // gain relative to p_classical, in percent
  double rate_hz = 0.0;

  void validate() const;
};

// 3/4 + sqrt(a(1-a))/2 : dishonest Alice's best probability of steering the
// outcome, maximized over her preparation and reveal strategy.
double alice_cheat_prob(double a);

// P_multi + (1 - P_multi) * a with P_multi = 1 - (1 - p_{n>=2})^K :
// any multi-photon pulse in the K-pulse sequence hands Bob the bit.
double bob_cheat_prob(double a, const PhotonStatistics& stats,
                      std::uint64_t pulses_per_flip);

// Z + (1 - Z) e / 2 with Z = (1 - p_click)^K : no detection at all, or a
// same-basis error caught by the comparison (half of all errors are).
double honest_abort_prob(double qber, double p_click,
                         std::uint64_t pulses_per_flip);

// max(0, 1 - 6H): cheating probability of the equivalent classical
// protocol with honest abort probability H.
double classical_cheat_bound(double honest_abort);

// (clock_hz / K) * (1 - H) successful flips per second.
double coin_flip_rate(double clock_hz, std::uint64_t pulses_per_flip,
                      double honest_abort);

// All bounds for one scenario, evaluated at the scenario's a.
SecurityReport quantum_gain(const ScenarioConfig& scenario);

// The a in (0.5, 1) equalizing both parties' cheating bounds. Bisection on
// a bracketed sign change, to 1e-12 in a. Throws std::runtime_error when no
// fair point exists (multi-photon exposure too large).
StateParameter solve_fair_a(const PhotonStatistics& stats,
                            std::uint64_t pulses_per_flip);

struct GainCell {
  std::uint64_t pulses_per_flip = 0;
  double mu = 0.0;
  double a_star = 0.0;
  double p_alice = 0.0;
  double p_bob = 0.0;
  double honest_abort = 0.0;
  double p_classical = 0.0;
  double gain = 0.0;
  bool fairness_ok = true;  // false -> a_star from the min-max fallback
  std::string note;         // non-empty on per-cell failure
};

struct GainMap {
  std::vector<std::uint64_t> k_grid;
  std::vector<double> mu_grid;
  std::vector<GainCell> cells;  // row-major: K outer, mu inner

  const GainCell& cell(std::size_t k_idx, std::size_t mu_idx) const {
    return cells[k_idx * mu_grid.size() + mu_idx];
  }
};

// Gain over a (K, mu) grid at fixed link and error ratio. Each cell
// re-optimizes a for fairness unless fixed_a is given; when no fair point
// exists the cell falls back to minimizing max(P_A, P_B) over an a grid.
// Cell failures are recorded in the cell note; the sweep continues.
GainMap sweep_gain(SourceKind kind, double g2,
                   const std::vector<std::uint64_t>& k_grid,
                   const std::vector<double>& mu_grid, const LinkBudget& link,
                   std::optional<double> fixed_a = std::nullopt,
                   unsigned jobs = 1);

}  // namespace qscf
