#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace msn {

/// Raised when no query group has both labels.
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct BceResult {
  double loss = 0.0;
  double d_logit = 0.0;
};

/// Binary cross-entropy on a logit in the log-sum-exp form
/// max(z, 0) - z*y + log1p(exp(-|z|)); d/dz = sigmoid(z) - y.
BceResult bce_loss(double logit, int label);

/// ROC-AUC via the rank statistic; tied scores contribute 0.5. Returns NaN
/// when one of the classes is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

struct Prediction {
  std::int64_t query_id = 0;
  double score = 0.0;
  int label = 0;
};

struct QaucSummary {
  double value = 0.0;
  std::int64_t valid_groups = 0;
  std::int64_t skipped_groups = 0;  // single-class groups
};

/// Mean of per-query AUCs over groups holding both labels.
QaucSummary qauc_summary(std::vector<Prediction> predictions);
double qauc(std::vector<Prediction> predictions);

}  // namespace msn
