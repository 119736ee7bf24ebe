#include "qscf/qubit_states.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qscf {

namespace {

void require_state_param(double a) {
  if (!std::isfinite(a) || a <= 0.5 || a >= 1.0) {
    throw std::domain_error("state parameter a must lie in (0.5, 1), got " +
                            std::to_string(a));
  }
}

void require_label(StateLabel l) {
  if ((l.alpha != 0 && l.alpha != 1) || (l.c != 0 && l.c != 1)) {
    throw std::domain_error("state label bits must be 0 or 1");
  }
}

}  // namespace

StateLabel StateLabel::from_index(int idx) {
  if (idx < 0 || idx > 3) {
    throw std::domain_error("state label index out of range");
  }
  return StateLabel{idx / 2, idx % 2};
}

StateParameter::StateParameter(double a) : a_(a) { require_state_param(a); }

Amplitudes state_amplitudes(double a, StateLabel label) {
  require_state_param(a);
  require_label(label);
  const double sign = label.alpha == 0 ? 1.0 : -1.0;
  const double sa = std::sqrt(a);
  const double sb = std::sqrt(1.0 - a);
  if (label.c == 0) {
    return Amplitudes{sa, sign * sb};
  }
  return Amplitudes{sb, -sign * sa};
}

double overlap_prob(double a, StateLabel sent, StateLabel meas) {
  const Amplitudes s = state_amplitudes(a, sent);
  const Amplitudes m = state_amplitudes(a, meas);
  const double inner = m.a0 * s.a0 + m.a1 * s.a1;
  return inner * inner;
}

double helstrom_guess_prob(double a) {
  if (!std::isfinite(a) || a < 0.5 || a > 1.0) {
    throw std::domain_error("helstrom_guess_prob: a must lie in [0.5, 1]");
  }
  return a;
}

double IoTable::row_sum(int row) const {
  double s = 0.0;
  for (double v : p[row]) s += v;
  return s;
}

IoTable expected_io_table(double a, double qber) {
  require_state_param(a);
  if (!(qber >= 0.0 && qber < 0.5)) {
    throw std::domain_error("qber must lie in [0, 0.5)");
  }
  IoTable t;
  for (int si = 0; si < 4; ++si) {
    const StateLabel sent = StateLabel::from_index(si);
    for (int di = 0; di < 4; ++di) {
      const StateLabel det = StateLabel::from_index(di);
      if (det.alpha == sent.alpha) {
        // Same basis: errors show up here, split between the two channels.
        t.p[si][di] = det.c == sent.c ? 0.5 * (1.0 - qber) : 0.5 * qber;
      } else {
        t.p[si][di] = 0.5 * overlap_prob(a, sent, det);
      }
    }
  }
  return t;
}

}  // namespace qscf
