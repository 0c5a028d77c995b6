#include <doctest.h>

#include <random>

#include "fare/error.hpp"
#include "fare/gnn.hpp"

using namespace fare;
using Eigen::MatrixXd;

namespace {

BinaryMatrix random_adjacency(std::mt19937_64& rng, std::size_t n, double p) {
  BinaryMatrix a(n, n);
  std::bernoulli_distribution bit(p);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (bit(rng)) a(i, j) = a(j, i) = 1;
    }
  }
  return a;
}

// D^-1/2 S^T D^-1/2 with degrees of the intended matrix, by loops.
MatrixXd gcn_oracle(const BinaryMatrix& intended, const BinaryMatrix& stored) {
  const auto n = intended.rows;
  std::vector<double> deg(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) deg[i] += intended(i, j);
  }
  MatrixXd p(n, n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      p(u, v) = stored(v, u) / std::sqrt(deg[u] * deg[v]);
    }
  }
  return p;
}

MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  }
  return m;
}

std::vector<FaultMap> clean_pool(std::size_t count, std::size_t n) {
  std::vector<FaultMap> pool;
  for (std::size_t i = 0; i < count; ++i) pool.emplace_back(static_cast<int>(i), n);
  return pool;
}

Graph small_sbm(std::size_t nodes, std::uint64_t seed) {
  SbmParams p;
  p.nodes = nodes;
  p.p_in = 0.1;
  p.p_out = 0.01;
  p.feature_dim = 8;
  p.seed = seed;
  return make_sbm(p);
}

}  // namespace

TEST_CASE("aggregation operator matches the loop oracle") {
  std::mt19937_64 rng(1);
  const auto a = random_adjacency(rng, 12, 0.3);
  auto stored = a;
  stored(0, 5) = 1 - stored(0, 5);
  CHECK(aggregation_operator(a, stored, GnnKind::Gcn).isApprox(gcn_oracle(a, stored), 1e-14));

  const MatrixXd sage = aggregation_operator(a, a, GnnKind::SageMean);
  for (Eigen::Index u = 0; u < 12; ++u) CHECK(sage.row(u).sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(aggregation_operator(a, BinaryMatrix(3, 3), GnnKind::Gcn), DimensionError);
}

TEST_CASE("crossbar aggregation without faults equals the dense oracle") {
  std::mt19937_64 rng(2);
  for (const auto kind : {GnnKind::Gcn, GnnKind::SageMean}) {
    const auto a = random_adjacency(rng, 37, 0.15);
    const auto blocks = block_decompose(a, 8);
    const auto pool = clean_pool(blocks.size() + 3, 8);
    const auto mapping = map_fault_aware(blocks, pool, Solver::Exact);
    const CrossbarAggregator agg(a, blocks, mapping, pool, kind);
    const MatrixXd h = random_matrix(rng, 37, 5);
    const MatrixXd expected = aggregation_operator(a, a, kind) * h;
    CHECK((agg.apply(h) - expected).norm() <= 1e-9 * expected.norm());
    CHECK(agg.stored().values == a.values);
  }
}

TEST_CASE("identity adjacency passes features through") {
  BinaryMatrix eye(10, 10);
  for (std::size_t i = 0; i < 10; ++i) eye(i, i) = 1;
  const auto blocks = block_decompose(eye, 4);
  const auto pool = clean_pool(blocks.size(), 4);
  const CrossbarAggregator agg(eye, blocks, map_row_major(blocks, pool), pool, GnnKind::Gcn);
  std::mt19937_64 rng(3);
  const MatrixXd h = random_matrix(rng, 10, 3);
  CHECK(agg.apply(h) == h);
}

TEST_CASE("one SA1 adds exactly the predicted edge") {
  std::mt19937_64 rng(4);
  const auto a = random_adjacency(rng, 8, 0.2);
  // find a zero cell in the single 8x8 block
  std::size_t r = 0, c = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    if (!a.values[i]) {
      r = i / 8;
      c = i % 8;
      break;
    }
  }
  std::vector<FaultMap> pool{FaultMap(0, 8)};
  pool[0].add(r, c, CellFault::SA1);
  const auto blocks = block_decompose(a, 8);
  const CrossbarAggregator agg(a, blocks, map_row_major(blocks, pool), pool, GnnKind::Gcn);
  auto perturbed = a;
  perturbed(r, c) = 1;
  CHECK(agg.stored().values == perturbed.values);
  const MatrixXd h = random_matrix(rng, 8, 4);
  CHECK(agg.apply(h).isApprox(gcn_oracle(a, perturbed) * h, 1e-12));
}

TEST_CASE("row permutations do not change the readout") {
  // Integer-valued inputs keep every sum exact, so the comparison is bit-exact.
  std::mt19937_64 rng(5);
  const auto a = random_adjacency(rng, 16, 0.3);
  const auto blocks = block_decompose(a, 8);
  auto pool = clean_pool(blocks.size(), 8);
  auto permuted = map_row_major(blocks, pool);
  for (auto& [id, p] : permuted.assignments) {
    std::vector<std::uint32_t> perm{3, 1, 7, 0, 6, 2, 5, 4};
    p.rows = evaluate_rows(blocks[static_cast<std::size_t>(id)], pool[0], perm);
  }
  BinaryMatrix eye(16, 16);
  for (std::size_t i = 0; i < 16; ++i) eye(i, i) = 1;  // unit degrees keep scaling exact
  // Use the permuted mapping on raw binary data with unit scaling.
  const CrossbarAggregator plain(eye, block_decompose(a, 8), map_row_major(blocks, pool), pool,
                                 GnnKind::SageMean);
  const CrossbarAggregator shuffled(eye, block_decompose(a, 8), permuted, pool, GnnKind::SageMean);
  std::uniform_int_distribution<int> d(-5, 5);
  MatrixXd h(16, 3);
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = d(rng);
  CHECK(plain.apply(h) == shuffled.apply(h));
}

TEST_CASE("apply_transpose is the adjoint") {
  std::mt19937_64 rng(6);
  const auto a = random_adjacency(rng, 21, 0.2);
  const auto blocks = block_decompose(a, 8);
  auto pool = inject({0.05, {1, 1}, 3}, blocks.size() * 2, 8);
  const auto mapping = map_fault_aware(blocks, pool, Solver::Exact);
  const CrossbarAggregator agg(a, blocks, mapping, pool, GnnKind::Gcn);
  const MatrixXd x = random_matrix(rng, 21, 2);
  const MatrixXd y = random_matrix(rng, 21, 2);
  CHECK((agg.apply(x).cwiseProduct(y)).sum() ==
        doctest::Approx((x.cwiseProduct(agg.apply_transpose(y))).sum()).epsilon(1e-12));
  // and it agrees with the dense operator over the stored matrix
  const MatrixXd op = aggregation_operator(a, agg.stored(), GnnKind::Gcn);
  CHECK(agg.apply(x).isApprox(op * x, 1e-12));
}

TEST_CASE("unmapped blocks are an error") {
  BinaryMatrix a(4, 4);
  const auto blocks = block_decompose(a, 2);
  const auto pool = clean_pool(4, 2);
  BlockMapping empty;
  CHECK_THROWS_AS(CrossbarAggregator(a, blocks, empty, pool, GnnKind::Gcn), DimensionError);
}

TEST_CASE("host backward matches central differences") {
  std::mt19937_64 rng(7);
  const auto a = random_adjacency(rng, 10, 0.3);
  const DenseAggregator agg(aggregation_operator(a, a, GnnKind::Gcn));
  const MatrixXd x = random_matrix(rng, 10, 4);
  std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  std::vector<bool> mask{true, true, true, false, true, true, false, true, true, true};
  auto weights = glorot_init({4, 5, 3}, 11);

  const auto cache = forward(agg, x, weights);
  MatrixXd dlogits;
  softmax_cross_entropy(cache.logits, labels, mask, &dlogits);
  const auto grads = backward(agg, cache, weights, dlogits);

  const double h = 1e-6;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].size(); ++i) {
      const double keep = weights[l](i);
      weights[l](i) = keep + h;
      const double up = softmax_cross_entropy(forward(agg, x, weights).logits, labels, mask, nullptr);
      weights[l](i) = keep - h;
      const double down = softmax_cross_entropy(forward(agg, x, weights).logits, labels, mask, nullptr);
      weights[l](i) = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[l](i);
      CHECK(std::abs(numeric - analytic) <= 1e-4 * std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
    }
  }
}

TEST_CASE("cross entropy edge cases") {
  MatrixXd logits(2, 2);
  logits << 1000, 0, 0, 1000;
  MatrixXd g;
  CHECK(softmax_cross_entropy(logits, {0, 1}, {true, true}, &g) == doctest::Approx(0.0));
  CHECK(softmax_cross_entropy(logits, {0, 1}, {false, false}, &g) == 0.0);
  CHECK(g.isZero());
  CHECK(softmax_cross_entropy(logits, {1, 1}, {true, false}, nullptr) == doctest::Approx(1000.0));
}

TEST_CASE("combine: zero weights and explosion") {
  const FixedPointCodec codec;
  WeightArray zero(4, 2, 16, {});
  zero.write(std::vector<double>(8, 0.0), codec, false);
  CHECK(zero.mvm(std::vector<double>{1, 2, 3, 4}, codec, false) == std::vector<double>{0, 0});

  std::vector<FaultMap> f{FaultMap(0, 16)};
  f[0].add(0, 7, CellFault::SA1);  // weight (0,0) top slice
  WeightArray w(4, 2, 16, f);
  w.write(std::vector<double>(8, 0.01), codec, false);
  const std::vector<double> in{1, 0, 0, 0};  // bounded input
  CHECK(w.mvm(in, codec, false)[0] <= -2.0);
  CHECK(std::abs(w.mvm(in, codec, true)[0]) <= codec.clip_threshold);
}

TEST_CASE("neuron reorder") {
  const FixedPointCodec codec;
  const std::size_t rows = 8, cols = 3, n = 24;
  WeightArray clean(rows, cols, n, {});
  std::vector<double> w(rows * cols, 0.5);
  CHECK(reorder_neurons(clean, w, codec) == std::vector<std::uint32_t>{0, 1, 2});

  // column group 0 has SA0 on slice 5 of every row; 0.5 stores a 2 there.
  std::vector<FaultMap> f{FaultMap(0, n)};
  for (std::size_t r = 0; r < rows; ++r) f[0].add(r, 5, CellFault::SA0);
  WeightArray faulty(rows, cols, n, f);
  for (std::size_t r = 0; r < rows; ++r) w[r * cols + 2] = 0.0;  // neuron 2 is all zero
  const auto placement = reorder_neurons(faulty, w, codec);
  CHECK(placement == std::vector<std::uint32_t>{1, 2, 0});

  // placement only moves storage: fault-free effective weights are unchanged
  WeightArray moved(rows, cols, n, {});
  moved.set_placement(placement);
  clean.write(w, codec, false);
  moved.write(w, codec, false);
  CHECK(clean.effective(codec, false) == moved.effective(codec, false));
  faulty.set_placement(placement);
  faulty.write(w, codec, false);
  CHECK(faulty.effective(codec, false) == clean.effective(codec, false));
}

TEST_CASE("node-row reorder picks rows that cover SA1 cells") {
  Block b;
  b.n = 2;
  b.cells = {0, 0, 1, 0};
  b.ones = 1;
  FaultMap f(0, 2);
  f.add(0, 0, CellFault::SA1);
  const Block* band[] = {&b};
  const FaultMap* faults[] = {&f};
  CHECK(reorder_node_rows(band, faults) == std::vector<std::uint32_t>{1, 0});
}

TEST_CASE("strategy names and traits") {
  for (const auto s : kAllStrategies) CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("magic"), ConfigError);
  CHECK(traits(Strategy::Fare).clip);
  CHECK(traits(Strategy::Fare).fault_aware_mapping);
  CHECK_FALSE(traits(Strategy::FaultFree).faults);
  CHECK(parse_gnn_kind("sage") == GnnKind::SageMean);
  CHECK(parse_fault_targets("weights") == FaultTargets::Weights);
}

TEST_CASE("training records every epoch and is deterministic") {
  const Graph g = small_sbm(80, 3);
  TrainOptions o;
  o.model.epochs = 5;
  o.fault_density = 0.03;
  o.ratio = {1, 1};
  o.post_deployment_density = 0.01;
  o.partitions = 2;
  o.hardware.adjacency_n = 8;
  for (const auto s : kAllStrategies) {
    o.strategy = s;
    const auto a = train(g, o);
    const auto b = train(g, o);
    REQUIRE(a.epochs.size() == 5);
    for (std::size_t e = 0; e < 5; ++e) {
      CHECK(a.epochs[e].loss == b.epochs[e].loss);
      CHECK(a.epochs[e].test_accuracy == b.epochs[e].test_accuracy);
    }
    CHECK(a.batches == 2);
    if (s == Strategy::Fare) {
      CHECK(a.remaps == 10);  // per batch per epoch
      CHECK(a.bist_scans == 5);
      // growth never shrinks the fault counts
      for (std::size_t e = 1; e < 5; ++e) {
        CHECK(a.epochs[e].adjacency_sa0 + a.epochs[e].adjacency_sa1 >=
              a.epochs[e - 1].adjacency_sa0 + a.epochs[e - 1].adjacency_sa1);
        CHECK(a.epochs[e].mapping_cost <= a.epochs[e].stale_cost);
      }
    }
    if (s == Strategy::FaultFree) {
      CHECK(a.epochs.back().adjacency_sa0 + a.epochs.back().weight_sa1 == 0);
    }
  }
}

TEST_CASE("sage model trains") {
  const Graph g = small_sbm(60, 5);
  TrainOptions o;
  o.model.kind = GnnKind::SageMean;
  o.model.epochs = 30;
  o.strategy = Strategy::FaultFree;
  o.partitions = 2;
  const auto r = train(g, o);
  CHECK(r.epochs.front().loss > r.epochs.back().loss);
}

TEST_CASE("training rejects bad options") {
  const Graph g = small_sbm(40, 1);
  TrainOptions o;
  o.model.epochs = 0;
  CHECK_THROWS_AS(train(g, o), ConfigError);
  o.model.epochs = 1;
  o.hardware.spare_factor = 0.5;
  CHECK_THROWS_AS(train(g, o), ConfigError);
  o.hardware.spare_factor = 2;
  o.fault_density = 0.2;
  CHECK_THROWS_AS(train(g, o), ConfigError);
}
