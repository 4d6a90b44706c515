#include "msn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "msn/numerics.hpp"

namespace msn {

BceResult bce_loss(double logit, int label) {
  const double y = label != 0 ? 1.0 : 0.0;
  BceResult r;
  r.loss = std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
  // sigmoid(z) - 1 == -sigmoid(-z) avoids cancellation for large positive z.
  r.d_logit = label != 0 ? -sigmoid(-logit) : sigmoid(logit);
  return r;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "auc: scores/labels length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  double positives = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share their mean
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] != 0) {
        positive_rank_sum += mean_rank;
        positives += 1.0;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

QaucSummary qauc_summary(std::vector<Prediction> predictions) {
  std::stable_sort(predictions.begin(), predictions.end(),
                   [](const Prediction& a, const Prediction& b) { return a.query_id < b.query_id; });
  QaucSummary out;
  double total = 0.0;
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t i = 0;
  while (i < predictions.size()) {
    scores.clear();
    labels.clear();
    std::size_t j = i;
    for (; j < predictions.size() && predictions[j].query_id == predictions[i].query_id; ++j) {
      scores.push_back(predictions[j].score);
      labels.push_back(predictions[j].label);
    }
    const double a = auc(scores, labels);
    if (std::isnan(a)) {
      ++out.skipped_groups;
    } else {
      total += a;
      ++out.valid_groups;
    }
    i = j;
  }
  if (out.valid_groups == 0) throw UndefinedMetricError("qauc: no query group contains both labels");
  out.value = total / static_cast<double>(out.valid_groups);
  return out;
}

double qauc(std::vector<Prediction> predictions) { return qauc_summary(std::move(predictions)).value; }

}  // namespace msn
