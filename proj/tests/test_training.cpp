// Unit tests for the deterministic toy trainer.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "potv/training.hpp"

using namespace potv;
using namespace potv::training;

namespace {

Hyperparams small_meta(std::uint64_t seed = 1) {
  Hyperparams m;
  m.seed = seed;
  m.layer_sizes = {4, 8, 2};
  m.learning_rate = 0.05;
  m.batch_size = 8;
  m.total_steps = 200;
  m.checkpoint_interval = 20;
  m.loss = LossKind::mse;
  m.data_gen = DataGen::tanh_teacher;
  return m;
}

double l2(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  auto m = small_meta();
  CHECK_NOTHROW(m.validate());
  CHECK(m.param_count() == (4 + 1) * 8 + (8 + 1) * 2);
  CHECK(m.flops_per_step() == doctest::Approx(6.0 * 58 * 8));

  auto bad = m;
  bad.checkpoint_interval = 7;  // does not divide 200
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = m;
  bad.layer_sizes = {4};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = m;
  bad.loss = LossKind::cross_entropy;  // needs one-hot targets
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("training is bitwise deterministic") {
  const auto a = train(small_meta(), 0.0);
  const auto b = train(small_meta(), 0.0);
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  for (size_t i = 0; i < a.checkpoints.size(); ++i) {
    CHECK(a.checkpoints[i].weights == b.checkpoints[i].weights);
  }
  CHECK(a.losses == b.losses);
  // Seeded gradient noise is reproducible too.
  const auto n1 = train(small_meta(), 0.01);
  const auto n2 = train(small_meta(), 0.01);
  CHECK(n1.checkpoints.back().weights == n2.checkpoints.back().weights);
  CHECK_FALSE(n1.checkpoints.back().weights == a.checkpoints.back().weights);
}

TEST_CASE("zero-step training yields just the initialization") {
  auto m = small_meta();
  m.total_steps = 0;
  const auto t = train(m, 0.0);
  CHECK(t.data.empty());
  REQUIRE(t.checkpoints.size() == 1);
  CHECK(t.checkpoints[0].weights == regenerate_init(m));
}

TEST_CASE("initialization regenerates bitwise from the seed") {
  const auto t = train(small_meta(3), 0.0);
  CHECK(t.checkpoints[0].weights == regenerate_init(t.meta));
  CHECK_FALSE(regenerate_init(small_meta(3)) == regenerate_init(small_meta(4)));
}

TEST_CASE("training reduces the loss") {
  const auto t = train(small_meta(), 0.0);
  CHECK(t.losses.back() < t.losses.front());
  // On-average decrease: second half mean below first half mean.
  const size_t half = t.losses.size() / 2;
  double first = 0, second = 0;
  for (size_t i = 0; i < half; ++i) first += t.losses[i];
  for (size_t i = half; i < t.losses.size(); ++i) second += t.losses[i];
  CHECK(second / (t.losses.size() - half) < first / half);
}

TEST_CASE("cross-entropy classifier trains too") {
  auto m = small_meta(9);
  m.layer_sizes = {4, 10, 3};
  m.loss = LossKind::cross_entropy;
  m.data_gen = DataGen::argmax_teacher;
  m.learning_rate = 0.1;
  const auto t = train(m, 0.0);
  CHECK(t.losses.back() < t.losses.front());
}

TEST_CASE("momentum optimizer records velocity in checkpoints") {
  auto m = small_meta(5);
  m.optimizer = Optimizer::sgd_momentum;
  const auto t = train(m, 0.0);
  for (const auto& c : t.checkpoints) CHECK(c.velocity.size() == c.weights.size());
  // Replay must thread the optimizer state through.
  const auto replayed = replay_segment(
      t.checkpoints[3], std::span<const Batch>(t.data).subspan(3 * 20, 20), m);
  CHECK(replayed.weights == t.checkpoints[4].weights);
  CHECK(replayed.velocity == t.checkpoints[4].velocity);
}

TEST_CASE("gradients match central finite differences") {
  // 20 random small instances; relative error under 1e-4.
  Rng rng(77);
  for (int inst = 0; inst < 20; ++inst) {
    Hyperparams m;
    m.seed = rng.next_u64();
    const std::uint64_t in = 2 + rng.next_below(3);
    const std::uint64_t hid = 2 + rng.next_below(4);
    const std::uint64_t out = 1 + rng.next_below(3);
    const bool ce = inst % 3 == 2 && out >= 2;
    m.layer_sizes = {in, hid, out};
    m.batch_size = 3;
    m.total_steps = 1;
    m.checkpoint_interval = 1;
    m.loss = ce ? LossKind::cross_entropy : LossKind::mse;
    m.data_gen = ce ? DataGen::argmax_teacher : DataGen::tanh_teacher;

    const auto batch = generate_data(m)[0];
    auto weights = regenerate_init(m);
    // Nudge away from the symmetric zero-bias point.
    Rng wr(m.seed, "nudge");
    for (auto& w : weights) {
      w = static_cast<float>(static_cast<double>(w) + 0.1 * wr.next_gaussian());
    }

    const auto grad = batch_gradient(weights, m, batch);
    const double h = 1e-4;
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      auto wp = weights, wm = weights;
      wp[i] = static_cast<float>(static_cast<double>(wp[i]) + h);
      wm[i] = static_cast<float>(static_cast<double>(wm[i]) - h);
      const double hp = static_cast<double>(wp[i]) - static_cast<double>(wm[i]);
      const double fd = (batch_loss(wp, m, batch) - batch_loss(wm, m, batch)) / hp;
      num += (grad[i] - fd) * (grad[i] - fd);
      den += fd * fd;
    }
    INFO("instance ", inst);
    CHECK(std::sqrt(num) <= 1e-4 * std::max(1e-8, std::sqrt(den)));
  }
}

TEST_CASE("replay of honest segments is exact") {
  const auto t = train(small_meta(), 0.0);
  const std::uint64_t k = t.meta.checkpoint_interval;
  for (std::uint64_t seg = 0; seg < t.segment_count(); ++seg) {
    const auto replayed = replay_segment(
        t.checkpoints[seg], std::span<const Batch>(t.data).subspan(seg * k, k), t.meta);
    CHECK(replayed.weights == t.checkpoints[seg + 1].weights);
  }
}

TEST_CASE("replay with a substituted batch diverges") {
  const auto t = train(small_meta(), 0.0);
  const std::uint64_t k = t.meta.checkpoint_interval;
  auto batches = std::vector<Batch>(t.data.begin() + 40, t.data.begin() + 60);
  batches[5] = t.data[150];  // a different real batch
  const auto replayed = replay_segment(t.checkpoints[2], batches, t.meta);
  CHECK(l2(replayed.weights, t.checkpoints[3].weights) > 1e-6);
}

TEST_CASE("noisy training replays within a small distance") {
  const auto t = train(small_meta(), 1e-3);
  const std::uint64_t k = t.meta.checkpoint_interval;
  const auto replayed = replay_segment(
      t.checkpoints[0], std::span<const Batch>(t.data).subspan(0, k), t.meta);
  const double d = l2(replayed.weights, t.checkpoints[1].weights);
  CHECK(d > 0.0);
  CHECK(d < 0.05);
}

TEST_CASE("shard_weights partitions contiguously, remainder to the front") {
  std::vector<float> w(10);
  for (size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(i);
  const auto shards = shard_weights(w, 3);
  REQUIRE(shards.size() == 3);
  CHECK(shards[0].begin == 0);
  CHECK(shards[0].end == 4);
  CHECK(shards[1].begin == 4);
  CHECK(shards[1].end == 7);
  CHECK(shards[2].begin == 7);
  CHECK(shards[2].end == 10);

  const auto single = shard_weights(w, 1);
  REQUIRE(single.size() == 1);
  CHECK(single[0].values == w);

  CHECK_THROWS_AS(shard_weights(w, 11), std::invalid_argument);
  CHECK_THROWS_AS(shard_weights(w, 0), std::invalid_argument);

  // Round trip for random sizes.
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint64_t n = 1 + rng.next_below(200);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.next_gaussian());
    const std::uint64_t parts = 1 + rng.next_below(n);
    std::vector<float> glued;
    std::uint64_t expect_begin = 0;
    for (const auto& s : shard_weights(v, parts)) {
      CHECK(s.begin == expect_begin);
      expect_begin = s.end;
      glued.insert(glued.end(), s.values.begin(), s.values.end());
    }
    CHECK(expect_begin == n);
    CHECK(glued == v);
  }
}

TEST_CASE("canonical digests are order- and content-sensitive") {
  const auto t = train(small_meta(), 0.0);
  CHECK(meta_digest(t.meta) == meta_digest(t.meta));
  auto m2 = t.meta;
  m2.seed ^= 1;
  CHECK_FALSE(meta_digest(t.meta) == meta_digest(m2));
  // total_steps is carried by counts, not the meta digest: a truthful prefix
  // report keeps the same meta digest.
  auto prefix_meta = t.meta;
  prefix_meta.total_steps = 100;
  CHECK(meta_digest(t.meta) == meta_digest(prefix_meta));

  CHECK_FALSE(batch_digest(t.data[0]) == batch_digest(t.data[1]));
  CHECK_FALSE(checkpoint_digest(t.checkpoints[0]) == checkpoint_digest(t.checkpoints[1]));
}

TEST_CASE("transcript files round-trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "potv-test-transcript";
  fs::remove_all(dir);

  auto m = small_meta(21);
  m.optimizer = Optimizer::sgd_momentum;
  const auto t = train(m, 0.0);
  save_transcript(t, dir.string());
  const auto back = load_transcript(dir.string());
  CHECK(back.meta == t.meta);
  CHECK(back.losses == t.losses);
  REQUIRE(back.data.size() == t.data.size());
  CHECK(back.data[7] == t.data[7]);
  REQUIRE(back.checkpoints.size() == t.checkpoints.size());
  CHECK(back.checkpoints.back() == t.checkpoints.back());
  fs::remove_all(dir);
}

TEST_CASE("divergent training reports the failing step") {
  auto m = small_meta();
  m.learning_rate = 1e4;  // guaranteed blow-up
  try {
    train(m, 0.0);
    // Divergence may surface as inf loss at some checkpoint.
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.step() > 0);
  }
}
