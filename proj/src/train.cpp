#include "msn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "msn/metrics.hpp"

namespace msn {

void TrainConfig::validate() const {
  require(lr >= 0.0, "train.lr must be >= 0");
  require(warmup_steps >= 0, "train.warmup_steps must be >= 0");
  require(warmup_floor >= 0.0 && warmup_floor <= 1.0, "train.warmup_floor must be in [0, 1]");
  require(epochs >= 1, "train.epochs must be >= 1");
  require(steps >= 0, "train.steps must be >= 0");
  require(batch_size >= 1, "train.batch_size must be >= 1");
  require(eval_every >= 0, "train.eval_every must be >= 0");
  require(histogram_start_step >= 0, "train.histogram_start_step must be >= 0");
}

EvalResult evaluate(const BlockStack& model, std::span<const Sample> data) {
  EvalResult r;
  r.samples = static_cast<std::int64_t>(data.size());
  if (data.empty()) return r;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<Prediction> preds;
  double loss = 0.0;
  for (const auto& s : data) {
    const double logit = forward(model, s.x).logit;
    loss += bce_loss(logit, s.label).loss;
    scores.push_back(logit);
    labels.push_back(s.label);
    preds.push_back({s.query_id, logit, s.label});
  }
  r.loss = loss / static_cast<double>(data.size());
  r.auc = auc(scores, labels);
  try {
    r.qauc = qauc(std::move(preds));
  } catch (const UndefinedMetricError&) {
    r.qauc = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

ActivationHistogram ActivationHistogram::empty_for(const BlockStack& model) {
  const Index msn_layers = model.cfg.msn_layer_count();
  require(msn_layers > 0, "activation histogram: model has no MSN layer");
  ActivationHistogram h;
  h.n = model.cfg.n;
  h.k = model.cfg.k;
  h.lookups_per_sample = msn_layers * model.cfg.tokens;
  h.counts.assign(static_cast<std::size_t>(h.n), 0);
  h.per_layer.assign(static_cast<std::size_t>(msn_layers), std::vector<std::int64_t>(static_cast<std::size_t>(h.n), 0));
  return h;
}

void ActivationHistogram::record(const SampleTape& tape) {
  std::size_t layer = 0;
  for (const auto& lt : tape.layers) {
    if (lt.memory.empty()) continue;
    for (const auto& mt : lt.memory) {
      for (Index slot : mt.result.flat_indices) {
        ++counts[static_cast<std::size_t>(slot)];
        ++per_layer[layer][static_cast<std::size_t>(slot)];
      }
    }
    ++layer;
  }
  ++samples;
}

std::int64_t ActivationHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

double ActivationHistogram::min_layer_coverage() const {
  double worst = 1.0;
  for (const auto& layer : per_layer) {
    const auto used = std::count_if(layer.begin(), layer.end(), [](std::int64_t c) { return c > 0; });
    worst = std::min(worst, static_cast<double>(used) / static_cast<double>(layer.size()));
  }
  return worst;
}

void ActivationHistogram::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "slot,count";
  for (std::size_t l = 0; l < per_layer.size(); ++l) out << ",msn_layer_" << l;
  out << '\n';
  for (std::size_t s = 0; s < counts.size(); ++s) {
    out << s << ',' << counts[s];
    for (const auto& layer : per_layer) out << ',' << layer[s];
    out << '\n';
  }
}

ActivationHistogram activation_histogram(const BlockStack& model, std::span<const Sample> data) {
  auto h = ActivationHistogram::empty_for(model);
  for (const auto& s : data) h.record(forward(model, s.x));
  return h;
}

TrainResult train(BlockStack& model, std::span<const Sample> train_data, std::span<const Sample> eval_data,
                  const TrainConfig& cfg, const EvalCallback& on_eval) {
  cfg.validate();
  require(!train_data.empty(), "train: empty training set");
  const auto schedule = cfg.schedule();
  const bool track_slots = model.cfg.msn_layer_count() > 0;

  BlockStack grads = zeros_like(model);
  const auto params = param_slots(model);
  const auto grad_slots = param_slots(grads);
  Optimizer optimizer(cfg.optimizer);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5eedf00dULL);

  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::int64_t step = 0;
  double loss_since_record = 0.0;
  std::int64_t batches_since_record = 0;
  auto emit = [&](std::int64_t epoch) {
    const auto e = evaluate(model, eval_data.empty() ? train_data : eval_data);
    MetricsRecord rec;
    rec.step = step;
    rec.epoch = epoch;
    rec.train_loss = batches_since_record > 0 ? loss_since_record / static_cast<double>(batches_since_record) : 0.0;
    rec.loss = e.loss;
    rec.auc = e.auc;
    rec.qauc = e.qauc;
    rec.lr = schedule.lr(step);
    loss_since_record = 0.0;
    batches_since_record = 0;
    result.log.push_back(rec);
    if (on_eval) on_eval(rec);
  };

  bool done = false;
  for (std::int64_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    ActivationHistogram hist;
    if (track_slots) hist = ActivationHistogram::empty_for(model);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.steps > 0 && step >= cfg.steps) {
        done = true;
        break;
      }
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (const auto& g : grad_slots) std::fill(g.span().begin(), g.span().end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& s = train_data[order[i]];
        const auto tape = forward(model, s.x);
        const auto l = bce_loss(tape.logit, s.label);
        if (!std::isfinite(l.loss)) {
          std::ostringstream msg;
          msg << "non-finite loss at step " << step << " (epoch " << epoch << "), sample " << order[i]
              << " of query " << s.query_id << ", logit " << tape.logit << "; batch samples [";
          for (std::size_t j = start; j < stop; ++j) msg << (j > start ? "," : "") << order[j];
          msg << "]";
          throw TrainingError(msg.str());
        }
        batch_loss += l.loss;
        backward(model, tape, l.d_logit * scale, grads);
        if (track_slots && step >= cfg.histogram_start_step) hist.record(tape);
      }
      optimizer.step(params, grad_slots, schedule.lr(step));
      ++step;
      loss_since_record += batch_loss * scale;
      ++batches_since_record;
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) emit(epoch);
    }
    if (track_slots) result.epoch_histograms.push_back(std::move(hist));
    if (batches_since_record > 0 || result.log.empty()) emit(epoch);
  }
  result.steps = step;
  return result;
}

}  // namespace msn
