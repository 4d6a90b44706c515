#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gradcheck.hpp"
#include "msn/dataset.hpp"
#include "msn/flops.hpp"
#include "msn/metrics.hpp"
#include "msn/model.hpp"
#include "msn/schedule.hpp"
#include "msn/train.hpp"
#include "oracles.hpp"

using namespace msn;

namespace {

DataConfig tiny_data(std::uint64_t seed = 1) {
  DataConfig d;
  d.n_queries = 40;
  d.items_per_query = 6;
  d.n_clusters = 4;
  d.d_user = 3;
  d.d_item = 3;
  d.d_noise = 2;
  d.seed = seed;
  return d;
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.d_model = 8;
  m.tokens = 1;
  m.layers = {BlockKind::kMsnFfn, BlockKind::kFfn};
  m.ffn_hidden = 12;
  m.n = 16;
  m.k = 2;
  m.d_key = 4;
  return m;
}

}  // namespace

// --- dataset -----------------------------------------------------------------

TEST_CASE("dataset generation is deterministic in the seed") {
  const auto a = generate_dataset(tiny_data(3));
  const auto b = generate_dataset(tiny_data(3));
  const auto c = generate_dataset(tiny_data(4));
  REQUIRE(a.samples.size() == b.samples.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].x == b.samples[i].x);
    CHECK(a.samples[i].label == b.samples[i].label);
    CHECK(a.samples[i].query_id == b.samples[i].query_id);
    differs = differs || a.samples[i].x != c.samples[i].x;
  }
  CHECK(differs);
}

TEST_CASE("dataset shape and label domain") {
  const auto d = generate_dataset(tiny_data());
  CHECK(d.samples.size() == 240);
  CHECK(d.d_in == 8);
  for (const auto& s : d.samples) {
    CHECK(s.x.size() == 8);
    CHECK((s.label == 0 || s.label == 1));
  }
  // users repeat within a query
  CHECK(d.samples[0].x.head(3) == d.samples[5].x.head(3));
}

TEST_CASE("tau -> 0 makes labels deterministic") {
  auto cfg = tiny_data(5);
  cfg.n_queries = 200;
  cfg.tau = 0.0;
  const auto hard = generate_dataset(cfg);
  cfg.tau = 1e-12;
  const auto limit = generate_dataset(cfg);
  for (std::size_t i = 0; i < hard.samples.size(); ++i) CHECK(hard.samples[i].label == limit.samples[i].label);
  // within one cluster the hard labels are a linear threshold of the item features
  cfg.tau = 0.0;
  cfg.n_clusters = 2;
  cfg.user_noise = 0.0;
  const auto d = generate_dataset(cfg);
  std::set<std::vector<double>> users;
  for (const auto& s : d.samples) users.insert({s.x.data(), s.x.data() + 3});
  CHECK(users.size() == 2);
}

TEST_CASE("positive rate is 0.5 +- 0.02 at tau = 1 over 100k samples") {
  DataConfig cfg;
  cfg.n_queries = 10000;
  cfg.items_per_query = 10;
  cfg.seed = 11;
  const auto d = generate_dataset(cfg);
  double pos = 0.0;
  for (const auto& s : d.samples) pos += s.label;
  CHECK(std::abs(pos / static_cast<double>(d.samples.size()) - 0.5) < 0.02);
}

TEST_CASE("invalid dataset configs are rejected") {
  auto cfg = tiny_data();
  cfg.n_clusters = 1;
  CHECK_THROWS_AS(generate_dataset(cfg), ContractError);
  cfg = tiny_data();
  cfg.test_fraction = 1.0;
  CHECK_THROWS_AS(generate_dataset(cfg), ContractError);
}

TEST_CASE("split by query keeps queries whole") {
  auto cfg = tiny_data();
  cfg.test_fraction = 0.25;
  const auto split = split_by_query(generate_dataset(cfg));
  CHECK(split.train.size() == 30 * 6);
  CHECK(split.test.size() == 10 * 6);
  std::set<std::int64_t> train_q;
  for (const auto& s : split.train) train_q.insert(s.query_id);
  for (const auto& s : split.test) CHECK(train_q.count(s.query_id) == 0);
}

TEST_CASE("dataset export and import round-trip exactly") {
  const auto d = generate_dataset(tiny_data(7));
  const auto dir = std::filesystem::temp_directory_path() / "msn_dataset_test";
  std::filesystem::create_directories(dir);
  export_dataset(d, dir / "data.csv");
  CHECK(std::filesystem::exists(dir / "data.json"));
  const auto back = import_dataset(dir / "data.csv");
  CHECK(back.cfg == d.cfg);
  REQUIRE(back.samples.size() == d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    CHECK(back.samples[i].x == d.samples[i].x);
    CHECK(back.samples[i].label == d.samples[i].label);
    CHECK(back.samples[i].query_id == d.samples[i].query_id);
  }
  std::filesystem::remove_all(dir);
}

// --- loss and metrics ----------------------------------------------------------

TEST_CASE("bce examples") {
  auto r = bce_loss(0.0, 1);
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r.d_logit == -0.5);
  r = bce_loss(20.0, 1);
  CHECK(r.loss == doctest::Approx(2.061153622438558e-9).epsilon(1e-9));
  CHECK(r.d_logit == doctest::Approx(-2.0611536181902037e-9).epsilon(1e-9));
  r = bce_loss(-800.0, 1);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(800.0));
  r = bce_loss(800.0, 0);
  CHECK(r.loss == doctest::Approx(800.0));
  CHECK(r.d_logit == 1.0);
}

TEST_CASE("bce matches the naive formula where it is safe") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const double z = normal(rng);
    const int y = i % 2;
    const double p = 1.0 / (1.0 + std::exp(-z));
    const double naive = -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
    const auto r = bce_loss(z, y);
    CHECK(std::abs(r.loss - naive) < 1e-12 * std::max(1.0, naive) + 1e-12);
    CHECK(std::abs(r.d_logit - (p - y)) < 1e-12);
  }
}

TEST_CASE("bce is convex in the logit") {
  for (int y : {0, 1}) {
    const double h = 1e-3;
    for (double z = -30.0; z <= 30.0; z += 0.25) {
      const double second = bce_loss(z + h, y).loss - 2 * bce_loss(z, y).loss + bce_loss(z - h, y).loss;
      CHECK(second >= -1e-9);
    }
  }
}

TEST_CASE("qauc examples") {
  CHECK(qauc({{1, 0.1, 0}, {1, 0.5, 0}, {1, 0.9, 1}}) == 1.0);
  CHECK(qauc({{1, 0.9, 0}, {1, 0.5, 0}, {1, 0.1, 1}}) == 0.0);
  CHECK(qauc({{1, 0.5, 0}, {1, 0.5, 1}}) == 0.5);
  // second group holds one class only and is skipped
  const auto s = qauc_summary({{1, 0.1, 0}, {1, 0.9, 1}, {2, 0.3, 1}, {2, 0.4, 1}});
  CHECK(s.value == 1.0);
  CHECK(s.valid_groups == 1);
  CHECK(s.skipped_groups == 1);
  CHECK_THROWS_AS(qauc({{1, 0.1, 1}, {2, 0.2, 0}}), UndefinedMetricError);
  CHECK_THROWS_AS(qauc({}), UndefinedMetricError);
}

TEST_CASE("auc equals the pairwise oracle with ties") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> level(0, 6);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 25; ++i) {
      scores.push_back(level(rng) * 0.25);
      labels.push_back(coin(rng) ? 1 : 0);
    }
    labels[0] = 1;
    labels[1] = 0;
    CHECK(auc(scores, labels) == oracle::pairwise_auc(scores, labels));
  }
  CHECK(std::isnan(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1})));
}

TEST_CASE("qauc is invariant under strictly monotone score transforms") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  std::vector<Prediction> p;
  for (int g = 0; g < 50; ++g)
    for (int i = 0; i < 8; ++i) p.push_back({g, normal(rng), coin(rng) ? 1 : 0});
  const double base = qauc(p);
  auto exp_p = p;
  for (auto& x : exp_p) x.score = std::exp(x.score);
  auto aff_p = p;
  for (auto& x : aff_p) x.score = 3.0 * x.score - 7.0;
  CHECK(qauc(exp_p) == base);
  CHECK(qauc(aff_p) == base);
}

TEST_CASE("qauc does not depend on input order") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  std::vector<Prediction> p;
  for (int g = 0; g < 30; ++g)
    for (int i = 0; i < 6; ++i) p.push_back({g, normal(rng), coin(rng) ? 1 : 0});
  const double base = qauc(p);
  std::shuffle(p.begin(), p.end(), rng);
  CHECK(qauc(p) == base);
}

// --- schedule and optimizer --------------------------------------------------

TEST_CASE("warm-up schedule examples") {
  const WarmupSchedule s{0.2, 1000, 0.001};
  CHECK(std::abs(s.lr(0) - 0.001 * 0.2) < 1e-12);
  CHECK(s.lr(1000) == 0.2);
  CHECK(s.lr(5000) == 0.2);
  CHECK(s.lr(500) == doctest::Approx(0.2 * 0.5005).epsilon(1e-12));
  for (std::int64_t t = 0; t < 1200; ++t) CHECK(s.lr(t + 1) >= s.lr(t));
  const WarmupSchedule none{0.1, 0, 0.001};
  CHECK(none.lr(0) == 0.1);
}

TEST_CASE("sgd step is p -= lr * g and skips frozen slots") {
  std::vector<double> p = {1.0, 2.0}, q = {5.0};
  std::vector<double> gp = {0.5, -1.0}, gq = {3.0};
  const std::vector<ParamSlot> params = {{"p", p.data(), 2, 1, true}, {"q", q.data(), 1, 1, false}};
  const std::vector<ParamSlot> grads = {{"p", gp.data(), 2, 1, true}, {"q", gq.data(), 1, 1, false}};
  Optimizer opt;
  opt.step(params, grads, 0.1);
  CHECK(p[0] == 1.0 - 0.1 * 0.5);
  CHECK(p[1] == 2.0 + 0.1);
  CHECK(q[0] == 5.0);
}

TEST_CASE("adam first step moves each coordinate by about lr") {
  std::vector<double> p = {1.0, -1.0, 0.0};
  std::vector<double> g = {0.3, -20.0, 0.0};
  const std::vector<ParamSlot> params = {{"p", p.data(), 3, 1, true}};
  const std::vector<ParamSlot> grads = {{"p", g.data(), 3, 1, true}};
  Optimizer opt({OptimizerKind::kAdam});
  opt.step(params, grads, 0.01);
  CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-1.0 + 0.01).epsilon(1e-6));
  CHECK(p[2] == 0.0);
}

// --- model --------------------------------------------------------------------

TEST_CASE("model parameter counts match the allocated tensors") {
  for (auto kinds : std::vector<std::vector<BlockKind>>{{BlockKind::kFfn},
                                                       {BlockKind::kMsnFfn, BlockKind::kFfn},
                                                       {BlockKind::kMsnSmoe, BlockKind::kSmoe},
                                                       {BlockKind::kMsnFfn, BlockKind::kMsnSmoe}}) {
    for (bool per_token : {false, true})
      for (bool over : {false, true}) {
        auto cfg = tiny_model();
        cfg.layers = kinds;
        cfg.tokens = 2;
        cfg.per_token_values = per_token;
        cfg.over_param = over;
        auto m = init_model(cfg, 5, 1);
        std::int64_t allocated = 0, trainable = 0, memory = 0, values = 0;
        for (const auto& s : param_slots(m)) {
          allocated += s.size();
          if (s.trainable) trainable += s.size();
          if (s.name.find(".memory.") != std::string::npos && s.trainable) memory += s.size();
          if (s.name.find("values") != std::string::npos) values += s.size();
        }
        const auto c = count_params(cfg, 5);
        CHECK(c.total == trainable);
        CHECK(c.memory == memory);
        CHECK(allocated >= trainable);
        // activated = everything except value rows and unselected experts
        std::int64_t unselected = 0;
        for (auto k : kinds)
          if (has_smoe(k)) unselected += (cfg.smoe_experts - cfg.smoe_active) * Ffn2<double>::param_count(8, 12, 8);
        CHECK(c.activated == trainable - values - unselected);
      }
  }
}

TEST_CASE("model gradients match central differences") {
  std::mt19937_64 rng(5);
  const std::vector<std::vector<BlockKind>> stacks = {{BlockKind::kMsnFfn, BlockKind::kFfn},
                                                      {BlockKind::kMsnSmoe, BlockKind::kSmoe},
                                                      {BlockKind::kFfn, BlockKind::kMsnFfn, BlockKind::kMsnSmoe}};
  int checked = 0;
  for (int trial = 0; checked < 6 && trial < 200; ++trial) {
    auto cfg = tiny_model();
    cfg.layers = stacks[static_cast<std::size_t>(checked % 3)];
    cfg.activation = Activation::kGelu;
    cfg.tokens = checked % 2 == 0 ? 1 : 2;
    cfg.per_token_values = checked == 3;
    cfg.smoe_experts = 3;
    cfg.smoe_active = 2;
    cfg.gating = checked % 3 == 0 ? GatingFn::kSigmoid : GatingFn::kTanh;
    cfg.value_init_scale = 0.5;
    auto m = init_model(cfg, 5, 100 + static_cast<std::uint64_t>(trial));
    const VectorXd x = oracle::random_vector(5, rng);
    if (!gradcheck::tape_is_clear(m, forward(m, x))) continue;
    const auto rep = gradcheck::check_model(m, x, trial % 2);
    INFO("worst tensor " << rep.worst_name);
    CHECK(rep.worst < 1e-5);
    ++checked;
  }
  CHECK(checked == 6);
}

TEST_CASE("with_msn_layers swaps the first x layers") {
  const std::vector<BlockKind> base = {BlockKind::kFfn, BlockKind::kSmoe, BlockKind::kFfn, BlockKind::kSmoe};
  CHECK(with_msn_layers(base, 0) == base);
  CHECK(with_msn_layers(base, 2) ==
        std::vector<BlockKind>{BlockKind::kMsnFfn, BlockKind::kMsnSmoe, BlockKind::kFfn, BlockKind::kSmoe});
  CHECK_THROWS_AS(with_msn_layers(base, 5), ContractError);
}

TEST_CASE("matched ffn baseline is within 2% of the activated budget") {
  auto cfg = tiny_model();
  cfg.d_model = 32;
  cfg.n = 4096;
  cfg.k = 8;
  cfg.d_key = 16;
  cfg.ffn_hidden = 64;
  cfg.layers = {BlockKind::kMsnFfn, BlockKind::kMsnFfn, BlockKind::kFfn, BlockKind::kFfn};
  const auto base = matched_ffn_baseline(cfg, 20);
  CHECK(base.msn_layer_count() == 0);
  const double a = static_cast<double>(count_params(cfg, 20).activated);
  const double b = static_cast<double>(count_params(base, 20).activated);
  CHECK(std::abs(a - b) / a <= 0.02);
}

TEST_CASE("model config validation") {
  auto cfg = tiny_model();
  cfg.tokens = 3;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_model();
  cfg.n = 15;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg.layers = {BlockKind::kFfn};
  CHECK_NOTHROW(cfg.validate());  // memory settings are unused without an msn layer
}

// --- flops --------------------------------------------------------------------

TEST_CASE("ffn MAC count") { CHECK(ffn_macs(8, 16, 4) == 8 * 16 + 16 * 4); }

TEST_CASE("flops scale: scoring doubles and flat scan quadruples when n quadruples") {
  auto cfg = tiny_model();
  for (Index n : {16, 64, 256, 1024, 4096}) {
    cfg.n = n;
    const auto a = count_flops(cfg, 5);
    cfg.n = 4 * n;
    const auto b = count_flops(cfg, 5);
    CHECK(b.scoring == 2 * a.scoring);
    CHECK(b.flat_scan_baseline == 4 * a.flat_scan_baseline);
  }
}

TEST_CASE("flops analytic counts equal instrumented op counts") {
  MemoryConfig mc;
  mc.n = 4096;
  mc.k = 8;
  mc.d_key = 32;
  mc.d_value = 32;
  mc.d_in = 32;
  std::mt19937_64 rng(6);
  const auto block = init_memory_block<double>(mc, rng);
  OpCounts ops;
  memory_forward(oracle::random_vector(32, rng), block, mc, &ops);
  // hand-summed: 2 subspaces x 64 keys x 32 dims x 2 ops, 8x8 sums, 8 rows x 32 dims x 2 ops
  CHECK(ops.scoring == 2 * 64 * 32 * 2);
  CHECK(ops.combination == 64);
  CHECK(ops.gather == 8 * 32 * 2);
  ModelConfig cfg;
  cfg.layers = {BlockKind::kMsnFfn};
  cfg.d_model = 32;
  cfg.n = 4096;
  cfg.k = 8;
  cfg.d_key = 32;
  const auto f = count_flops(cfg, 10);
  CHECK(f.scoring == ops.scoring);
  CHECK(f.combination == ops.combination);
  CHECK(f.gather == ops.gather);
  CHECK(f.flat_scan_baseline == 2 * 4096 * 32);
}

// --- activation histogram -----------------------------------------------------

TEST_CASE("histogram requires an msn layer") {
  auto cfg = tiny_model();
  cfg.layers = {BlockKind::kFfn};
  const auto m = init_model(cfg, 8, 1);
  CHECK_THROWS_AS(ActivationHistogram::empty_for(m), ContractError);
}

TEST_CASE("histogram conserves k x samples x msn lookups") {
  auto cfg = tiny_model();
  cfg.layers = {BlockKind::kMsnFfn, BlockKind::kMsnSmoe, BlockKind::kFfn};
  cfg.tokens = 2;
  const auto data = generate_dataset(tiny_data());
  const auto m = init_model(cfg, data.d_in, 2);
  const auto h = activation_histogram(m, data.samples);
  CHECK(h.total() == cfg.k * static_cast<std::int64_t>(data.samples.size()) * 2 * cfg.tokens);
  CHECK(h.per_layer.size() == 2);
  CHECK(h.samples == static_cast<std::int64_t>(data.samples.size()));
}

TEST_CASE("k = sqrt(n) with uniform scores selects every row index") {
  auto cfg = tiny_model();
  cfg.k = 4;  // sqrt(16)
  cfg.layernorm_qk = false;
  auto m = init_model(cfg, 8, 3);
  m.layers[0].heads[0].key_row.setZero();
  m.layers[0].heads[0].key_col.setZero();
  const auto tape = forward(m, VectorXd(VectorXd::Ones(8)));
  const auto& mt = tape.layers[0].memory[0];
  CHECK(partial_topk<double>(mt.row_scores, cfg.k).indices == std::vector<Index>{0, 1, 2, 3});
  CHECK(partial_topk<double>(mt.col_scores, cfg.k).indices == std::vector<Index>{0, 1, 2, 3});
}

TEST_CASE("histogram csv lists every slot") {
  const auto data = generate_dataset(tiny_data());
  const auto m = init_model(tiny_model(), data.d_in, 2);
  const auto h = activation_histogram(m, data.samples);
  const auto path = std::filesystem::temp_directory_path() / "msn_hist_test.csv";
  h.write_csv(path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1 + 16);
  std::filesystem::remove(path);
}

// --- training -----------------------------------------------------------------

TEST_CASE("lr = 0 leaves parameters unchanged") {
  const auto data = generate_dataset(tiny_data());
  auto m = init_model(tiny_model(), data.d_in, 4);
  const auto before = m;
  TrainConfig tc;
  tc.lr = 0.0;
  tc.epochs = 3;
  tc.batch_size = 16;
  train(m, data.samples, {}, tc);
  auto a = param_slots(m);
  auto b = param_slots(const_cast<BlockStack&>(before));
  for (std::size_t s = 0; s < a.size(); ++s)
    for (Index i = 0; i < a[s].size(); ++i) CHECK(a[s].data[i] == b[s].data[i]);
}

TEST_CASE("one sgd step on a single sample lowers its loss") {
  std::mt19937_64 rng(7);
  int lowered = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = tiny_model();
    cfg.layers = trial % 2 == 0 ? std::vector<BlockKind>{BlockKind::kMsnFfn, BlockKind::kFfn}
                                : std::vector<BlockKind>{BlockKind::kMsnSmoe, BlockKind::kSmoe};
    cfg.smoe_experts = 3;
    auto m = init_model(cfg, 6, static_cast<std::uint64_t>(trial));
    Sample s{0, oracle::random_vector(6, rng), trial % 3 == 0 ? 1 : 0};
    const double before = bce_loss(forward(m, s.x).logit, s.label).loss;
    TrainConfig tc;
    tc.lr = 1e-3;
    tc.warmup_steps = 0;
    tc.batch_size = 1;
    train(m, std::span<const Sample>(&s, 1), {}, tc);
    const double after = bce_loss(forward(m, s.x).logit, s.label).loss;
    if (after < before) ++lowered;
  }
  CHECK(lowered == 20);
}

TEST_CASE("training is deterministic given the seeds") {
  const auto data = generate_dataset(tiny_data());
  const auto split = split_by_query(data);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.eval_every = 5;
  tc.optimizer.kind = OptimizerKind::kAdam;
  auto run = [&] {
    auto m = init_model(tiny_model(), data.d_in, 9);
    return train(m, split.train, split.test, tc);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(a.log[i].step == b.log[i].step);
  }
  CHECK(a.epoch_histograms.size() == 2);
  CHECK(a.epoch_histograms[0].counts == b.epoch_histograms[0].counts);
}

TEST_CASE("steps caps the number of updates") {
  const auto data = generate_dataset(tiny_data());
  auto m = init_model(tiny_model(), data.d_in, 9);
  TrainConfig tc;
  tc.epochs = 10;
  tc.steps = 7;
  tc.batch_size = 8;
  const auto r = train(m, data.samples, {}, tc);
  CHECK(r.steps == 7);
  CHECK(r.log.back().step == 7);
}

TEST_CASE("a non-finite loss aborts with a diagnostic naming the batch") {
  auto data = generate_dataset(tiny_data());
  data.samples[17].x[0] = std::nan("");
  auto m = init_model(tiny_model(), data.d_in, 9);
  TrainConfig tc;
  tc.batch_size = 4;
  try {
    train(m, data.samples, {}, tc);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("sample 17") != std::string::npos);
    CHECK(msg.find("step") != std::string::npos);
    CHECK(msg.find("batch samples") != std::string::npos);
  }
}

TEST_CASE("evaluate reports loss, auc and qauc") {
  const auto data = generate_dataset(tiny_data());
  const auto m = init_model(tiny_model(), data.d_in, 9);
  const auto e = evaluate(m, data.samples);
  CHECK(e.samples == 240);
  CHECK(e.loss > 0.0);
  CHECK(e.auc >= 0.0);
  CHECK(e.auc <= 1.0);
  CHECK(std::isfinite(e.qauc));
}
