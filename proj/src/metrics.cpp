#include "cil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cil/errors.hpp"

namespace cil {

namespace {

void require_finite(const std::vector<double>& scores, const char* what) {
  for (double s : scores)
    if (!std::isfinite(s)) throw MetricError(std::string(what) + ": non-finite score");
}

// Distinct score values preceded by one threshold below everything.
// BPCER/APCER are piecewise constant on [v_j, v_{j+1}) because the step
// function compares strictly, so this set covers every reachable rate pair.
std::vector<double> sweep_thresholds(const ScoreSet& scores) {
  std::vector<double> all;
  all.reserve(scores.bona.size() + scores.morph.size());
  all.insert(all.end(), scores.bona.begin(), scores.bona.end());
  all.insert(all.end(), scores.morph.begin(), scores.morph.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> taus;
  taus.reserve(all.size() + 1);
  taus.push_back(all.front() - 1.0);
  taus.insert(taus.end(), all.begin(), all.end());
  return taus;
}

}  // namespace

double bpcer(const ScoreSet& scores, double tau) {
  if (scores.bona.empty()) throw MetricError("bpcer: no bona fide scores");
  require_finite(scores.bona, "bpcer");
  std::size_t hits = 0;
  for (double b : scores.bona)
    if (b > tau) ++hits;
  return static_cast<double>(hits) / static_cast<double>(scores.bona.size());
}

double apcer(const ScoreSet& scores, double tau) {
  if (scores.morph.empty()) throw MetricError("apcer: no morph scores");
  require_finite(scores.morph, "apcer");
  std::size_t hits = 0;
  for (double m : scores.morph)
    if (m > tau) ++hits;
  return 1.0 - static_cast<double>(hits) / static_cast<double>(scores.morph.size());
}

double eer(const ScoreSet& scores) {
  if (scores.bona.empty()) throw MetricError("eer: no bona fide scores");
  if (scores.morph.empty()) throw MetricError("eer: no morph scores");
  require_finite(scores.bona, "eer");
  require_finite(scores.morph, "eer");

  double best_gap = std::numeric_limits<double>::infinity();
  double best_value = 0.5;
  for (double tau : sweep_thresholds(scores)) {
    const double b = bpcer(scores, tau);
    const double a = apcer(scores, tau);
    const double gap = std::abs(b - a);
    if (gap < best_gap) {  // strict: ties keep the lowest threshold
      best_gap = gap;
      best_value = 0.5 * (b + a);
    }
  }
  return best_value;
}

double bpcer_at_apcer(const ScoreSet& scores, double x) {
  if (x <= 0.0 || x >= 1.0)
    throw ConfigError("bpcer_at_apcer: working point must lie in (0,1)");
  if (scores.bona.empty()) throw MetricError("bpcer_at_apcer: no bona fide scores");
  if (scores.morph.empty()) throw MetricError("bpcer_at_apcer: no morph scores");

  double best = 1.0;
  bool found = false;
  for (double tau : sweep_thresholds(scores)) {
    if (apcer(scores, tau) <= x) {
      best = found ? std::min(best, bpcer(scores, tau)) : bpcer(scores, tau);
      found = true;
    }
  }
  return found ? best : 1.0;
}

double mad_point(const ScoreSet& scores) {
  return eer(scores) + bpcer_at_apcer(scores, 0.01);
}

double auc_over_time(const std::vector<double>& values, bool n_minus_one_norm) {
  if (values.empty()) throw MetricError("auc_over_time: empty series");
  const std::size_t n = values.size();
  if (n == 1) return values.front();
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) area += 0.5 * (values[i] + values[i + 1]);
  return area / static_cast<double>(n_minus_one_norm ? n - 1 : n);
}

std::vector<long long> borda_points(const RankingTable& table, bool lower_is_better) {
  const std::size_t a = table.n_algorithms();
  if (a == 0) throw ShapeError("brot: empty table");
  const std::size_t n = table.n_experiences();
  if (n == 0) throw ShapeError("brot: no experiences");
  for (const auto& row : table.values)
    if (row.size() != n) throw ShapeError("brot: ragged table");

  std::vector<long long> points(a, 0);
  std::vector<std::size_t> order(a);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < a; ++j) order[j] = j;
    // stable sort keeps registration order on ties
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return lower_is_better ? table.values[x][i] < table.values[y][i]
                             : table.values[x][i] > table.values[y][i];
    });
    for (std::size_t rank = 0; rank < a; ++rank)
      points[order[rank]] += static_cast<long long>(a - 1 - rank);
  }
  return points;
}

std::vector<double> brot(const RankingTable& table, bool lower_is_better) {
  const std::vector<long long> points = borda_points(table, lower_is_better);
  const double denom =
      static_cast<double>(table.n_algorithms()) * static_cast<double>(table.n_experiences());
  std::vector<double> out(points.size());
  for (std::size_t j = 0; j < points.size(); ++j)
    out[j] = static_cast<double>(points[j]) / denom;
  return out;
}

double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw ShapeError("top1_accuracy: prediction/label length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace cil
