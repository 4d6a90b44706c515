#include <doctest.h>

#include "msn/kernels.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace msn;

namespace {

VectorXd scores_with_ties(Index m, std::mt19937_64& rng) {
  // few distinct values so ties are common
  std::uniform_int_distribution<int> level(0, 5);
  VectorXd s(m);
  for (Index i = 0; i < m; ++i) s[i] = level(rng) * 0.5;
  return s;
}

}  // namespace

TEST_CASE("partial_topk equals the stable-sort oracle for every strategy") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<Index> size(1, 300);
  for (int trial = 0; trial < 500; ++trial) {
    const Index m = size(rng);
    const Index k = std::uniform_int_distribution<Index>(1, m)(rng);
    const VectorXd s = trial % 2 == 0 ? oracle::random_vector(m, rng) : scores_with_ties(m, rng);
    const auto expect = oracle::stable_sort_topk(oracle::to_std(s), k);
    for (auto strategy : {TopKStrategy::kAuto, TopKStrategy::kHeap, TopKStrategy::kSelect}) {
      const auto got = partial_topk<double>(s, k, strategy);
      REQUIRE(got.indices == expect);
      for (std::size_t t = 0; t < expect.size(); ++t) CHECK(got.scores[t] == s[expect[t]]);
    }
  }
}

TEST_CASE("partial_topk examples") {
  VectorXd s(5);
  s << 0.1, 0.9, 0.5, 0.9, 0.2;
  CHECK(partial_topk<double>(s, 2).indices == std::vector<Index>{1, 3});
  CHECK(partial_topk<double>(s, 5).indices == std::vector<Index>{1, 3, 2, 4, 0});
  const VectorXd all_equal = VectorXd::Constant(6, 1.0);
  CHECK(partial_topk<double>(all_equal, 3).indices == std::vector<Index>{0, 1, 2});
}

TEST_CASE("partial_topk with k == m equals a full sort") {
  std::mt19937_64 rng(12);
  const VectorXd s = oracle::random_vector(64, rng);
  CHECK(partial_topk<double>(s, 64).indices == oracle::stable_sort_topk(oracle::to_std(s), 64));
}

TEST_CASE("partial_topk rejects k outside [1, m]") {
  const VectorXd s = VectorXd::Zero(4);
  CHECK_THROWS_AS(partial_topk<double>(s, 0), ContractError);
  CHECK_THROWS_AS(partial_topk<double>(s, 5), ContractError);
}

TEST_CASE("partial_topk works on float scores") {
  VectorXf s(4);
  s << 1.f, 3.f, 2.f, 3.f;
  const auto r = partial_topk<float>(s, 2);
  CHECK(r.indices == std::vector<Index>{1, 3});
}

TEST_CASE("fused_gather_sum equals the two-pass gather") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd table = oracle::random_matrix(40, 7, rng);
    GatherPlan<double> plan;
    for (int t = 0; t < 6; ++t) {
      plan.indices.push_back(std::uniform_int_distribution<Index>(0, 39)(rng));
      plan.weights.push_back(std::normal_distribution<double>()(rng));
    }
    MatrixXd gathered(6, 7);
    for (int t = 0; t < 6; ++t) gathered.row(t) = table.row(plan.indices[t]);
    VectorXd expect = VectorXd::Zero(7);
    for (int t = 0; t < 6; ++t) expect += plan.weights[t] * gathered.row(t).transpose();
    CHECK((fused_gather_sum(plan, table) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fused_gather_sum reads each selected row exactly once") {
  std::mt19937_64 rng(14);
  const MatrixXd table = oracle::random_matrix(32, 4, rng);
  GatherPlan<double> plan{{3, 17, 9, 30}, {0.1, 0.2, 0.3, 0.4}};
  oracle::CountingTable counted(table);
  fused_gather_sum(plan, counted);
  for (Index r = 0; r < 32; ++r) {
    const bool selected = std::find(plan.indices.begin(), plan.indices.end(), r) != plan.indices.end();
    CHECK(counted.reads()[static_cast<std::size_t>(r)] == (selected ? 1 : 0));
  }
}

TEST_CASE("fused_gather_backward matches central differences") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) CHECK(gradcheck::check_gather(30, 5, 6, rng).worst < 1e-6);
}

TEST_CASE("gather backward passes the dot-product test") {
  // <d_out, forward(V + eps dV) - forward(V)> / eps == <d_values, dV>
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd table = oracle::random_matrix(25, 5, rng);
    GatherPlan<double> plan{{2, 11, 11, 24}, {0.5, -0.25, 0.75, 1.5}};
    const VectorXd up = oracle::random_vector(5, rng);
    MatrixXd delta = MatrixXd::Zero(25, 5);
    for (Index r : plan.indices) delta.row(r) = oracle::random_vector(5, rng).transpose();
    const double eps = 1e-3;
    const MatrixXd moved = table + eps * delta;
    const double lhs = up.dot(fused_gather_sum(plan, moved) - fused_gather_sum(plan, table)) / eps;
    const MatrixXd dv = fused_gather_backward(plan, table, up).d_values.dense(25);
    const double rhs = (dv.array() * delta.array()).sum();
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("gather backward emits one gradient row per plan entry") {
  const MatrixXd table = MatrixXd::Ones(8, 3);
  GatherPlan<double> plan{{1, 5}, {2.0, 3.0}};
  VectorXd up(3);
  up << 1, 2, 3;
  const auto g = fused_gather_backward(plan, table, up);
  CHECK(g.d_values.rows == plan.indices);
  CHECK(g.d_values.grads.rows() == 2);
  CHECK(g.d_values.grads(0, 2) == 6.0);
  CHECK(g.d_values.grads(1, 1) == 6.0);
  CHECK(g.d_weights[0] == 6.0);
}

TEST_CASE("gather rejects out-of-range indices and ragged plans") {
  const MatrixXd table = MatrixXd::Zero(4, 2);
  CHECK_THROWS_AS(fused_gather_sum(GatherPlan<double>{{4}, {1.0}}, table), ContractError);
  CHECK_THROWS_AS(fused_gather_sum(GatherPlan<double>{{-1}, {1.0}}, table), ContractError);
  CHECK_THROWS_AS(fused_gather_sum(GatherPlan<double>{{0, 1}, {1.0}}, table), ContractError);
  CHECK_THROWS_AS(fused_gather_backward(GatherPlan<double>{{0}, {1.0}}, table, VectorXd(VectorXd::Zero(3))),
                  ContractError);
}
