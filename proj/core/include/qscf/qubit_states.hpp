#pragma once

#include <array>
#include <cstdint>

namespace qscf {

// One of the four protocol states, named by preparation basis and bit value.
struct StateLabel {
  int alpha = 0;  // basis bit, 0 or 1
  int c = 0;      // encoded bit value, 0 or 1

  int index() const { return alpha * 2 + c; }
  static StateLabel from_index(int idx);
  bool operator==(const StateLabel&) const = default;
};

inline constexpr std::array<int, 4> kStateIndices{0, 1, 2, 3};

// Tilt parameter of the four states; the protocol requires 0.5 < a < 1.
struct StateParameter {
  explicit StateParameter(double a);
  double value() const { return a_; }

 private:
  double a_;
};

// Real two-component amplitudes of |phi_{alpha,c}> on the {|0>,|1>} basis.
struct Amplitudes {
  double a0 = 0.0;
  double a1 = 0.0;
};

// |phi_{alpha,0}> = sqrt(a)|0> + (-1)^alpha sqrt(1-a)|1>
// |phi_{alpha,1}> = sqrt(1-a)|0> - (-1)^alpha sqrt(a)|1>
Amplitudes state_amplitudes(double a, StateLabel label);

// |<phi_meas|phi_sent>|^2
double overlap_prob(double a, StateLabel sent, StateLabel meas);

// Optimal single-copy probability of identifying the bit value c from one
// received state, with the basis bit unknown and uniform. The two bit
// mixtures are diagonal with eigenvalue gap 2a-1, so the optimum is a.
// Accepts the closed interval [0.5, 1] so degenerate controls can be run.
double helstrom_guess_prob(double a);

// Conditional detection probabilities: rows are sent states, columns are
// detected channels; every row sums to 1.
struct IoTable {
  std::array<std::array<double, 4>, 4> p{};

  const std::array<double, 4>& row(StateLabel sent) const {
    return p[sent.index()];
  }
  double row_sum(int row) const;
};

// Detection table for a receiver with a passive 50/50 basis choice.
// Cross-basis columns carry half the ideal state overlaps; same-basis
// columns carry (1-e)/2 for the correct bit and e/2 for the wrong bit,
// where e is the same-basis error ratio (QBER).
IoTable expected_io_table(double a, double qber);

}  // namespace qscf
