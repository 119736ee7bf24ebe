#include "qscf/photon_source.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qscf {

namespace {
constexpr double kMassTolerance = 1e-12;
}

void SourceSpec::validate() const {
  if (!std::isfinite(mu) || mu <= 0.0) {
    throw std::domain_error("source mu must be finite and positive");
  }
  if (kind == SourceKind::Sps) {
    if (mu >= 1.0) {
      throw std::domain_error("sps mu must lie in (0, 1)");
    }
    if (!std::isfinite(g2) || g2 < 0.0 || g2 >= 1.0) {
      throw std::domain_error("sps g2 must lie in [0, 1)");
    }
  }
}

void PhotonStatistics::validate() const {
  const double entries[4] = {p0, p1, p2, p_tail};
  for (double p : entries) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw std::domain_error("photon-number probabilities must lie in [0,1]");
    }
  }
  const double mass = p0 + p1 + p2 + p_tail;
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw std::domain_error("photon-number distribution mass is " +
                            std::to_string(mass) + ", expected 1");
  }
}

double poisson_pn(double mu, unsigned n) {
  if (!std::isfinite(mu) || mu <= 0.0) {
    throw std::domain_error("poisson_pn: mu must be finite and positive");
  }
  // exp(-mu + n log mu - log n!) keeps large n stable.
  return std::exp(-mu + static_cast<double>(n) * std::log(mu) -
                  std::lgamma(static_cast<double>(n) + 1.0));
}

PhotonStatistics sps_statistics(double mu, double g2) {
  SourceSpec spec{SourceKind::Sps, mu, g2};
  spec.validate();
  PhotonStatistics s;
  s.kind = SourceKind::Sps;
  s.mu = mu;
  s.p1 = mu;
  s.p2 = 0.5 * mu * mu * g2;
  s.p_tail = 0.0;
  s.p0 = 1.0 - s.p1 - s.p2;
  if (s.p0 < 0.0) {
    throw std::domain_error("sps statistics infeasible: p0 < 0 for mu=" +
                            std::to_string(mu) + ", g2=" + std::to_string(g2));
  }
  s.validate();
  return s;
}

PhotonStatistics wcp_statistics(double mu) {
  if (!std::isfinite(mu) || mu <= 0.0) {
    throw std::domain_error("wcp mu must be finite and positive");
  }
  PhotonStatistics s;
  s.kind = SourceKind::Wcp;
  s.mu = mu;
  s.p0 = std::exp(-mu);
  s.p1 = mu * s.p0;
  s.p2 = 0.5 * mu * mu * s.p0;
  s.p_tail = 1.0 - s.p0 - s.p1 - s.p2;
  if (s.p_tail < 0.0) s.p_tail = 0.0;  // rounding at tiny mu
  s.validate();
  return s;
}

PhotonStatistics photon_statistics(const SourceSpec& spec) {
  spec.validate();
  return spec.kind == SourceKind::Wcp ? wcp_statistics(spec.mu)
                                      : sps_statistics(spec.mu, spec.g2);
}

double prob_multiphoton(const PhotonStatistics& stats) {
  stats.validate();
  if (stats.kind == SourceKind::Wcp) {
    return 1.0 - std::exp(-stats.mu) * (1.0 + stats.mu);
  }
  return stats.p2 + stats.p_tail;
}

unsigned sample_photon_number(const PhotonStatistics& stats, BitSource& rng) {
  const double u = rng.uniform01();
  if (stats.kind == SourceKind::Wcp) {
    // Invert the Poisson CDF; the walk terminates fast for any sane mu.
    double term = std::exp(-stats.mu);
    double cdf = term;
    unsigned n = 0;
    while (u >= cdf && n < 512) {
      ++n;
      term *= stats.mu / static_cast<double>(n);
      cdf += term;
    }
    return n;
  }
  if (u < stats.p0) return 0;
  if (u < stats.p0 + stats.p1) return 1;
  if (u < stats.p0 + stats.p1 + stats.p2) return 2;
  return 3;
}

}  // namespace qscf
