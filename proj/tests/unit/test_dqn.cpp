#include <array>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "navmem/dqn.hpp"
#include "navmem/eval.hpp"

using namespace navmem;
using gradcheck::model_gradient_error;
using gradcheck::random_tensor;

namespace {

Transition tagged(int tag) {
  Transition t;
  t.input = Tensor({1}, static_cast<double>(tag));
  t.next_input = t.input;
  return t;
}

ModelConfig small_dqn() {
  ModelConfig c;
  c.kind = ModelKind::DQN;
  c.conv_widths = {8, 16};
  c.fc_width = 32;
  c.seed = 5;
  return c;
}

/// 3x3 open room, start in the centre, goal on one of the four neighbours.
std::vector<GridMap> neighbour_goal_maps() {
  std::vector<GridMap> maps;
  for (Pose g : {Pose{2, 1}, Pose{1, 2}, Pose{0, 1}, Pose{1, 0}}) {
    GridMap m(3, 3);
    m.set_start({1, 1});
    m.set_goal(g);
    maps.push_back(m);
  }
  return maps;
}

}  // namespace

TEST_CASE("replay buffer evicts oldest first and never exceeds capacity") {
  ReplayBuffer buf(3);
  CHECK(buf.capacity() == 3);
  for (int i = 0; i < 7; ++i) {
    buf.push(tagged(i));
    CHECK(buf.size() <= 3);
  }
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).input[0] == 4.0);
  CHECK(buf.at(1).input[0] == 5.0);
  CHECK(buf.at(2).input[0] == 6.0);
  CHECK_THROWS(buf.at(3));
  CHECK_THROWS(ReplayBuffer(0));
  std::mt19937_64 rng(0);
  CHECK_THROWS(ReplayBuffer(2).sample(1, rng));
}

TEST_CASE("replay sampling is uniform over current contents") {
  ReplayBuffer buf(4);
  for (int i = 0; i < 6; ++i) buf.push(tagged(i));
  std::mt19937_64 rng(1);
  std::array<int, 6> counts{};
  const auto batch = buf.sample(8000, rng);
  CHECK(batch.size() == 8000);
  for (const Transition* t : batch) ++counts[static_cast<std::size_t>(t->input[0])];
  CHECK(counts[0] == 0);
  CHECK(counts[1] == 0);
  double chi2 = 0.0;
  for (int i = 2; i < 6; ++i) chi2 += (counts[i] - 2000.0) * (counts[i] - 2000.0) / 2000.0;
  CHECK(chi2 < 11.345);  // chi-square, 3 degrees of freedom, p = 0.01
}

TEST_CASE("epsilon-greedy: argmax, ties, range") {
  std::mt19937_64 rng(2);
  const Tensor q = Tensor::vector({0.1, 0.7, -2.0, 0.3});
  for (int i = 0; i < 100; ++i) CHECK(epsilon_greedy(q, 0.0, rng) == Action::Right);
  CHECK(epsilon_greedy(Tensor::vector({0, 1, 1, 0}), 0.0, rng) == Action::Right);
  CHECK(epsilon_greedy(Tensor::vector({3, 3, 3, 3}), 0.0, rng) == Action::Down);
  CHECK_THROWS(epsilon_greedy(q, -0.1, rng));
  CHECK_THROWS(epsilon_greedy(q, 1.5, rng));
}

TEST_CASE("epsilon 1 draws actions uniformly") {
  std::mt19937_64 rng(3);
  const Tensor q = Tensor::vector({5, 0, 0, 0});
  std::array<int, 4> counts{};
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<std::size_t>(action_index(epsilon_greedy(q, 1.0, rng)))];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 2500.0) * (c - 2500.0) / 2500.0;
  CHECK(chi2 < 11.345);  // chi-square, 3 degrees of freedom, p = 0.01
}

TEST_CASE("unit_uniform stays in [0, 1)") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double u = unit_uniform(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("epsilon schedule and config validation") {
  DqnConfig c;
  CHECK(epsilon_at(c, 0) == 1.0);
  CHECK(epsilon_at(c, 50000) == doctest::Approx(0.525));
  CHECK(epsilon_at(c, 100000) == doctest::Approx(0.05));
  CHECK(epsilon_at(c, 190000) == doctest::Approx(0.05));
  CHECK_NOTHROW(c.validate());
  c.budget = 999;
  CHECK_THROWS(c.validate());
  c = {};
  c.discount = 1.5;
  CHECK_THROWS(c.validate());
  c = {};
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("dqn_train rejects bad arguments") {
  DqnConfig c;
  c.budget = 1000;
  CHECK_THROWS(dqn_train({}, small_dqn(), c));
  ModelConfig cnn = small_dqn();
  cnn.kind = ModelKind::CNN;
  CHECK_THROWS(dqn_train(neighbour_goal_maps(), cnn, c));
}

TEST_CASE("zero parameters with epsilon 0 act deterministically") {
  ModelConfig m = small_dqn();
  ModelParams zero = init_params(m, 0);
  for (auto& [name, t] : zero) t.fill(0.0);
  std::mt19937_64 rng(5);
  const Tensor in({2, 7, 7}, 0.5);
  for (int i = 0; i < 20; ++i) CHECK(epsilon_greedy(dqn_forward(in, zero, 3), 0.0, rng) == Action::Down);

  DqnConfig c;
  c.budget = 1000;
  c.epsilon_start = 0.0;
  c.epsilon_end = 0.0;
  c.learning_starts = 1000;
  const DqnResult a = dqn_train(neighbour_goal_maps(), m, c);
  const DqnResult b = dqn_train(neighbour_goal_maps(), m, c);
  CHECK(a.params == b.params);
  CHECK(a.episode_returns == b.episode_returns);
  CHECK(a.episodes == static_cast<int>(a.episode_returns.size()));
}

TEST_CASE("target-network copy gives identical action values") {
  const ModelConfig m = small_dqn();
  const ModelParams online = init_params(m, 1);
  const ModelParams target = online;
  std::mt19937_64 rng(6);
  const Tensor in = random_tensor(rng, {2, 7, 7}, 0, 1);
  CHECK(dqn_forward(in, online, 3) == dqn_forward(in, target, 3));
}

TEST_CASE("TD loss gradient matches finite differences") {
  const ModelConfig m = small_dqn();
  std::mt19937_64 rng(7);
  const ModelParams target = init_params(m, 8);
  for (bool terminal : {false, true}) {
    Transition t;
    t.input = random_tensor(rng, {2, 7, 7}, 0, 1);
    t.next_input = random_tensor(rng, {2, 7, 7}, 0, 1);
    t.action = Action::Up;
    t.terminal = terminal;
    t.reward = terminal ? 1.0 : 0.0;
    const double err = model_gradient_error(init_params(m, 9), [&](ad::Tape& tape, const BoundParams& bound) {
      return td_loss(tape, bound, target, m, t, 0.99);
    });
    CHECK_MESSAGE(err <= 1e-4, "terminal=" << terminal << " err=" << err);
  }
}

TEST_CASE("TD target uses reward only on terminal transitions") {
  const ModelConfig m = small_dqn();
  const ModelParams params = init_params(m, 2);
  Transition t;
  t.input = Tensor({2, 7, 7}, 0.0);
  t.next_input = Tensor({2, 7, 7}, 0.25);
  t.action = Action::Left;
  t.terminal = true;
  t.reward = 1.0;
  ad::Tape tape(false);
  const BoundParams bound(tape, params);
  const double q = dqn_forward(t.input, params, 3)[3];
  CHECK(td_loss(tape, bound, params, m, t, 0.99).value().item() == doctest::Approx((q - 1.0) * (q - 1.0)));
  t.terminal = false;
  t.reward = 0.0;
  const Tensor next = dqn_forward(t.next_input, params, 3);
  const double y = 0.99 * *std::max_element(next.data().begin(), next.data().end());
  CHECK(td_loss(tape, bound, params, m, t, 0.99).value().item() == doctest::Approx((q - y) * (q - y)));
}

TEST_CASE("positive control: dense-reward room is learned") {
  DqnConfig c;
  c.budget = 2000;
  c.train_every = 1;
  c.learning_starts = 100;
  const auto maps = neighbour_goal_maps();
  const DqnResult r = dqn_train(maps, small_dqn(), c);
  CHECK(r.goal_reached > 0);
  const NetworkPolicy greedy(small_dqn(), r.params);
  CHECK(evaluate_maps(maps, greedy, 3).success_percentage >= 90.0);
}
