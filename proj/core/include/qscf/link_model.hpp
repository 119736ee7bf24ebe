#pragma once

#include <cstdint>
#include <optional>

#include "qscf/photon_source.hpp"
#include "qscf/qubit_states.hpp"
#include "qscf/randomness.hpp"

namespace qscf {

// Optical channel and receiver parameters. p_dark is the total dark-count
// probability per pulse slot across all four detectors; qber is the
// measured error ratio conditional on a same-basis detection.
struct LinkBudget {
  double loss_db = 0.0;
  double eta_bob = 1.0;
  double eta_det = 1.0;
  double p_dark = 0.0;
  double qber = 0.0;

  void validate() const;  // throws std::domain_error
};

// 10^(-loss_db / 10)
double transmittance(double loss_db);

// End-to-end single-photon transmission: channel * receiver * detector.
double link_efficiency(const LinkBudget& link);

// P_click = 1 - (1 - p_dark) * sum_n p_n (1 - eta)^n. The sum is evaluated
// in closed form exp(-mu eta) for Wcp; the n >= 3 tail of hand-built
// statistics is treated as n = 3.
double per_pulse_click_prob(const PhotonStatistics& stats,
                            const LinkBudget& link);

// (1 - p_click)^k : probability that none of the k pulses of a flip clicks.
double no_detection_prob(double p_click, std::uint64_t k);

struct Detection {
  StateLabel channel;
  bool dark = false;
};

// nullopt = no click in this slot.
using DetectionEvent = std::optional<Detection>;

// One detector slot: a dark count fires a uniformly random channel with
// probability p_dark; otherwise, if at least one photon survives the link,
// the channel follows the expected detection table row of the sent state.
DetectionEvent sample_detection(StateLabel sent, double a,
                                const PhotonStatistics& stats,
                                const LinkBudget& link, BitSource& rng);

}  // namespace qscf
