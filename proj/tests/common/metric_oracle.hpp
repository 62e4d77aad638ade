#pragma once

// Brute-force threshold-enumeration oracle for the rate metrics, kept
// independent of the library implementation: candidate thresholds include
// every distinct score, every midpoint between neighbours, and sentinels
// outside the score range; rates are counted with plain loops.

#include <algorithm>
#include <cmath>
#include <vector>

namespace metric_oracle {

inline double bpcer_at(const std::vector<double>& bona, double tau) {
  std::size_t k = 0;
  for (double b : bona)
    if (b > tau) ++k;
  return static_cast<double>(k) / static_cast<double>(bona.size());
}

inline double apcer_at(const std::vector<double>& morph, double tau) {
  std::size_t k = 0;
  for (double m : morph)
    if (m > tau) ++k;
  return 1.0 - static_cast<double>(k) / static_cast<double>(morph.size());
}

inline std::vector<double> candidate_taus(const std::vector<double>& bona,
                                          const std::vector<double>& morph) {
  std::vector<double> values = bona;
  values.insert(values.end(), morph.begin(), morph.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> taus;
  taus.push_back(values.front() - 1.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    taus.push_back(values[i]);
    if (i + 1 < values.size()) taus.push_back(0.5 * (values[i] + values[i + 1]));
  }
  taus.push_back(values.back() + 1.0);
  std::sort(taus.begin(), taus.end());
  return taus;
}

inline double eer(const std::vector<double>& bona, const std::vector<double>& morph) {
  double best_gap = 2.0;
  double best = 0.5;
  for (double tau : candidate_taus(bona, morph)) {
    const double b = bpcer_at(bona, tau);
    const double a = apcer_at(morph, tau);
    if (std::abs(b - a) < best_gap) {
      best_gap = std::abs(b - a);
      best = 0.5 * (b + a);
    }
  }
  return best;
}

inline double min_rate_gap(const std::vector<double>& bona,
                           const std::vector<double>& morph) {
  double best = 2.0;
  for (double tau : candidate_taus(bona, morph))
    best = std::min(best, std::abs(bpcer_at(bona, tau) - apcer_at(morph, tau)));
  return best;
}

inline double bpcer_at_apcer(const std::vector<double>& bona,
                             const std::vector<double>& morph, double x) {
  double best = 1.0;
  for (double tau : candidate_taus(bona, morph))
    if (apcer_at(morph, tau) <= x) best = std::min(best, bpcer_at(bona, tau));
  return best;
}

}  // namespace metric_oracle
