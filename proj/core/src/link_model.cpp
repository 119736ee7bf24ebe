#include "qscf/link_model.hpp"

#include <cmath>
#include <stdexcept>

namespace qscf {

void LinkBudget::validate() const {
  if (!std::isfinite(loss_db) || loss_db < 0.0) {
    throw std::domain_error("loss_db must be finite and non-negative");
  }
  if (!(eta_bob > 0.0 && eta_bob <= 1.0)) {
    throw std::domain_error("eta_bob must lie in (0, 1]");
  }
  if (!(eta_det > 0.0 && eta_det <= 1.0)) {
    throw std::domain_error("eta_det must lie in (0, 1]");
  }
  if (!(p_dark >= 0.0 && p_dark <= 1.0)) {
    throw std::domain_error("p_dark must lie in [0, 1]");
  }
  if (!(qber >= 0.0 && qber < 0.5)) {
    throw std::domain_error("qber must lie in [0, 0.5)");
  }
}

double transmittance(double loss_db) {
  if (!std::isfinite(loss_db) || loss_db < 0.0) {
    throw std::domain_error("loss_db must be finite and non-negative");
  }
  return std::pow(10.0, -loss_db / 10.0);
}

double link_efficiency(const LinkBudget& link) {
  link.validate();
  return transmittance(link.loss_db) * link.eta_bob * link.eta_det;
}

namespace {

// sum_n p_n (1 - eta)^n
double survival_sum(const PhotonStatistics& stats, double eta) {
  if (stats.kind == SourceKind::Wcp) {
    return std::exp(-stats.mu * eta);  // exact for Poissonian statistics
  }
  const double q = 1.0 - eta;
  return stats.p0 + stats.p1 * q + stats.p2 * q * q + stats.p_tail * q * q * q;
}

}  // namespace

double per_pulse_click_prob(const PhotonStatistics& stats,
                            const LinkBudget& link) {
  stats.validate();
  const double eta = link_efficiency(link);
  return 1.0 - (1.0 - link.p_dark) * survival_sum(stats, eta);
}

double no_detection_prob(double p_click, std::uint64_t k) {
  if (!(p_click >= 0.0 && p_click <= 1.0)) {
    throw std::domain_error("p_click must lie in [0, 1]");
  }
  if (k < 1) {
    throw std::domain_error("pulses per round must be at least 1");
  }
  // exp(K log1p(-p)) avoids pow() underflow artifacts for tiny p, large K.
  if (p_click >= 1.0) return 0.0;
  return std::exp(static_cast<double>(k) * std::log1p(-p_click));
}

DetectionEvent sample_detection(StateLabel sent, double a,
                                const PhotonStatistics& stats,
                                const LinkBudget& link, BitSource& rng) {
  link.validate();
  const double u_dark = rng.uniform01();
  if (u_dark < link.p_dark) {
    const double u_chan = rng.uniform01();
    const int idx = std::min(3, static_cast<int>(u_chan * 4.0));
    return Detection{StateLabel::from_index(idx), true};
  }
  const unsigned n = sample_photon_number(stats, rng);
  if (n == 0) return std::nullopt;
  const double eta = link_efficiency(link);
  const double p_any_survives =
      1.0 - std::pow(1.0 - eta, static_cast<double>(n));
  if (!(rng.uniform01() < p_any_survives)) return std::nullopt;
  const IoTable table = expected_io_table(a, link.qber);
  const auto& row = table.row(sent);
  const double u_chan = rng.uniform01();
  double cdf = 0.0;
  for (int idx = 0; idx < 4; ++idx) {
    cdf += row[idx];
    if (u_chan < cdf) return Detection{StateLabel::from_index(idx), false};
  }
  return Detection{StateLabel::from_index(3), false};
}

}  // namespace qscf
