#pragma once

#include <cstdint>

#include "qscf/randomness.hpp"

namespace qscf {

enum class SourceKind { Wcp, Sps };

// Photon source model: a phase-randomized weak coherent pulse source is
// fully described by the mean photon number mu; a deterministic
// single-photon source additionally carries the anti-bunching value g2
// bounding its two-photon fraction.
struct SourceSpec {
  SourceKind kind = SourceKind::Sps;
  double mu = 0.0;
  double g2 = 0.0;  // used for Sps only

  void validate() const;  // throws std::domain_error
};

// Photon-number distribution truncated at n = 2, with the n >= 3 mass kept
// as an analytic tail term (zero for Sps). Kind and mu are retained so the
// Poissonian closed forms stay exact for Wcp.
struct PhotonStatistics {
  SourceKind kind = SourceKind::Sps;
  double mu = 0.0;
  double p0 = 1.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double p_tail = 0.0;  // P(n >= 3)

  void validate() const;  // entries in [0,1], total mass 1 within 1e-12
};

// exp(-mu) mu^n / n!
double poisson_pn(double mu, unsigned n);

// Sub-Poissonian statistics from (mu, g2):
//   p1 = mu, p2 = mu^2 g2 / 2, p0 = 1 - p1 - p2.
// The two-photon term uses the equality form of the anti-bunching bound,
// which is the conservative choice for the security analysis.
PhotonStatistics sps_statistics(double mu, double g2);

// Poissonian statistics of a phase-randomized weak coherent pulse.
PhotonStatistics wcp_statistics(double mu);

PhotonStatistics photon_statistics(const SourceSpec& spec);

// P(n >= 2). Exact closed form 1 - exp(-mu)(1+mu) for Wcp; p2 + tail
// otherwise.
double prob_multiphoton(const PhotonStatistics& stats);

// Draws a photon number; consumes one uniform variate from rng.
unsigned sample_photon_number(const PhotonStatistics& stats, BitSource& rng);

}  // namespace qscf
