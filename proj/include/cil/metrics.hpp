#pragma once

#include <cstdint>
#include <vector>

namespace cil {

// Detection scores split by ground truth. Scores follow the convention
// "higher = more suspicious", so a bona fide score above the threshold is
// a false reject and a morph score at or below it is a miss.
struct ScoreSet {
  std::vector<double> bona;
  std::vector<double> morph;
};

// Proportion of bona fide scores strictly above tau.
double bpcer(const ScoreSet& scores, double tau);

// Proportion of morph scores at or below tau (accepted attacks).
double apcer(const ScoreSet& scores, double tau);

// Equal error rate: sweeps every distinct score value (plus a threshold
// below all scores) and returns (BPCER+APCER)/2 where |BPCER-APCER| is
// minimal; ties resolve to the lowest threshold.
double eer(const ScoreSet& scores);

// Minimum BPCER over thresholds with APCER <= x; 1.0 if none qualifies.
double bpcer_at_apcer(const ScoreSet& scores, double x);

// Per-experience summary scalar: eer + bpcer_at_apcer(0.01).
double mad_point(const ScoreSet& scores);

// Trapezoidal area over unit-spaced experience indices divided by the
// number of experiences; a single value maps to itself. When
// n_minus_one_norm is set the divisor is N-1 instead (alternate
// normalization, reported alongside the canonical one).
double auc_over_time(const std::vector<double>& values, bool n_minus_one_norm = false);

// values[j][i] = ranking metric of algorithm j at testing experience i.
struct RankingTable {
  std::vector<std::vector<double>> values;
  std::size_t n_algorithms() const { return values.size(); }
  std::size_t n_experiences() const { return values.empty() ? 0 : values.front().size(); }
};

// Borda ranking over time. Per experience, the best algorithm earns
// |A|-1 points, the next |A|-2, ..., the worst 0 (ties keep registration
// order); totals are normalized by |A|*N.
std::vector<double> brot(const RankingTable& table, bool lower_is_better);

// Unnormalized integer Borda totals; brot() == borda_points() / (|A|*N).
// Exposed so algebraic identities can be checked exactly.
std::vector<long long> borda_points(const RankingTable& table, bool lower_is_better);

// Fraction of exact prediction/label matches.
double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace cil
