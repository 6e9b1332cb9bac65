#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "stochdepth/net.hpp"

using namespace stochdepth;

namespace {

using Eigen::MatrixXd;

// Plain-loop reference forward, kept independent of the library's Eigen
// formulation.
MatrixXd dense_oracle(const DenseT<double>& layer, const MatrixXd& in) {
  MatrixXd out(in.rows(), layer.weight.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      double acc = layer.bias(o);
      for (Eigen::Index i = 0; i < in.cols(); ++i) acc += in(r, i) * layer.weight(o, i);
      out(r, o) = acc;
    }
  }
  return out;
}

MatrixXd act_oracle(MatrixXd x, Activation activation) {
  if (activation == Activation::Identity) return x;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = std::max(0.0, x(r, c));
  return x;
}

MatrixXd forward_oracle(const ResidualNet& net, const MatrixXd& batch,
                        const std::vector<bool>& alive) {
  MatrixXd h = act_oracle(dense_oracle(net.input_proj, batch), net.activation);
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    if (!alive[i]) continue;
    MatrixXd a1 = act_oracle(dense_oracle(net.blocks[i].fc1, h), net.activation);
    MatrixXd f = dense_oracle(net.blocks[i].fc2, a1);
    h = act_oracle(h + f, net.activation);
  }
  return dense_oracle(net.head, h);
}

void randomize_params(NetParamsT<double>& params, Rng& rng, double scale) {
  auto fill = [&](DenseT<double>& layer) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        layer.weight(r, c) = rng.uniform_range(-scale, scale);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      layer.bias(i) = rng.uniform_range(-scale, scale);
  };
  fill(params.input_proj);
  for (auto& block : params.blocks) {
    fill(block.fc1);
    fill(block.fc2);
  }
  fill(params.head);
}

MatrixXd random_batch(int rows, int cols, Rng& rng) {
  MatrixXd batch(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) batch(r, c) = rng.uniform_range(-1.0, 1.0);
  return batch;
}

std::vector<int> random_labels(int rows, int classes, Rng& rng) {
  std::vector<int> labels(rows);
  for (int i = 0; i < rows; ++i)
    labels[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return labels;
}

GateMask make_mask(std::vector<bool> alive) {
  GateMask mask;
  mask.alive = std::move(alive);
  return mask;
}

template <typename A, typename B>
bool same(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

void for_each_dense(NetParamsT<double>& params,
                    const std::function<void(DenseT<double>&)>& fn) {
  fn(params.input_proj);
  for (auto& block : params.blocks) {
    fn(block.fc1);
    fn(block.fc2);
  }
  fn(params.head);
}

// Central-difference gradient check over every parameter entry. Relative
// error per coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
double max_grad_rel_error(ResidualNet& net, const MatrixXd& batch,
                          const GateMask& mask, const std::vector<int>& labels,
                          double step) {
  ForwardCache cache = forward_train(net, batch, mask);
  Gradients grads = backward(net, cache, labels);
  double worst = 0.0;

  std::vector<DenseT<double>*> net_layers, grad_layers;
  for_each_dense(net, [&](DenseT<double>& l) { net_layers.push_back(&l); });
  for_each_dense(grads, [&](DenseT<double>& l) { grad_layers.push_back(&l); });

  auto loss_at = [&]() {
    return loss(forward_train(net, batch, mask).logits, labels);
  };
  for (std::size_t li = 0; li < net_layers.size(); ++li) {
    auto probe = [&](double& param, double analytic) {
      double saved = param;
      param = saved + step;
      double up = loss_at();
      param = saved - step;
      double down = loss_at();
      param = saved;
      double numeric = (up - down) / (2.0 * step);
      double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };
    DenseT<double>& layer = *net_layers[li];
    DenseT<double>& grad = *grad_layers[li];
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        probe(layer.weight(r, c), grad.weight(r, c));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      probe(layer.bias(i), grad.bias(i));
  }
  return worst;
}

}  // namespace

TEST_SUITE_BEGIN("net");

TEST_CASE("init rejects degenerate sizes") {
  Rng rng(1);
  CHECK_THROWS_AS(init_net<double>(0, 8, 2, 3, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_net<double>(4, 0, 2, 3, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_net<double>(4, 8, 0, 3, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_net<double>(4, 8, 2, 0, rng), std::invalid_argument);
}

TEST_CASE("freshly initialized net predicts uniformly") {
  Rng rng(2);
  ResidualNet net = init_net<double>(4, 8, 2, 5, rng);
  MatrixXd batch = MatrixXd::Zero(3, 2);
  GateMask mask = make_mask(std::vector<bool>(4, true));
  ForwardCache cache = forward_train(net, batch, mask);
  CHECK(cache.logits.isZero(0.0));  // zero head -> uniform class probabilities
  CHECK(loss(cache.logits, {0, 3, 4}) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
}

TEST_CASE("same seed gives identical parameters") {
  Rng a(77), b(77);
  ResidualNet na = init_net<double>(3, 6, 2, 2, a);
  ResidualNet nb = init_net<double>(3, 6, 2, 2, b);
  CHECK(same(na.input_proj.weight, nb.input_proj.weight));
  for (int i = 0; i < 3; ++i) {
    CHECK(same(na.blocks[i].fc1.weight, nb.blocks[i].fc1.weight));
    CHECK(same(na.blocks[i].fc2.weight, nb.blocks[i].fc2.weight));
  }
  CHECK(same(na.head.weight, nb.head.weight));
}

TEST_CASE("forward matches a plain-loop oracle") {
  Rng rng(31);
  ResidualNet net = init_net<double>(5, 8, 3, 4, rng);
  randomize_params(net, rng, 0.6);
  MatrixXd batch = random_batch(7, 3, rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<bool> alive(5);
    for (int i = 0; i < 5; ++i) alive[i] = rng.bernoulli(0.6);
    ForwardCache cache = forward_train(net, batch, make_mask(alive));
    MatrixXd expected = forward_oracle(net, batch, alive);
    CHECK((cache.logits - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(cache.executed_blocks == realized_depth(cache.mask));
  }
}

TEST_CASE("all-dead body reduces to projection plus head") {
  Rng rng(4);
  ResidualNet net = init_net<double>(6, 8, 2, 3, rng);
  randomize_params(net, rng, 0.5);
  MatrixXd batch = random_batch(4, 2, rng);
  ForwardCache cache = forward_train(net, batch, make_mask(std::vector<bool>(6, false)));
  CHECK(same(cache.logits, net.head.apply(cache.h0)));
  CHECK(cache.executed_blocks == 0);
  // dead blocks leave the hidden state bitwise unchanged
  for (int i = 0; i < 6; ++i) CHECK(same(cache.h[i], cache.h0));
}

TEST_CASE("masks differing in one block differ only by that contribution") {
  Rng rng(5);
  const int depth = 5;
  ResidualNet net = init_net<double>(depth, 8, 2, 3, rng);
  randomize_params(net, rng, 0.5);
  MatrixXd batch = random_batch(6, 2, rng);

  std::vector<bool> lower = {true, false, false, true, false};
  std::vector<bool> upper = {true, false, true, true, false};  // block 3 added
  ForwardCache c1 = forward_train(net, batch, make_mask(lower));
  ForwardCache c2 = forward_train(net, batch, make_mask(upper));

  // recompute the upper-mask output by splicing block 3 into the lower trace
  MatrixXd h = c1.h[1];
  MatrixXd a1 = act_oracle(dense_oracle(net.blocks[2].fc1, h), net.activation);
  h = act_oracle(h + dense_oracle(net.blocks[2].fc2, a1), net.activation);
  MatrixXd a4 = act_oracle(dense_oracle(net.blocks[3].fc1, h), net.activation);
  h = act_oracle(h + dense_oracle(net.blocks[3].fc2, a4), net.activation);
  MatrixXd expected = dense_oracle(net.head, h);
  CHECK((c2.logits - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("forward shape validation") {
  Rng rng(6);
  ResidualNet net = init_net<double>(3, 4, 2, 2, rng);
  MatrixXd wrong_width = MatrixXd::Zero(2, 5);
  CHECK_THROWS_AS(forward_train(net, wrong_width, make_mask({true, true, true})),
                  std::invalid_argument);
  MatrixXd ok = MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(forward_train(net, ok, make_mask({true, true})),
                  std::invalid_argument);
  SurvivalProfile short_profile;
  short_profile.probs = {1.0, 1.0};
  CHECK_THROWS_AS(forward_eval(net, ok, short_profile), std::invalid_argument);
}

TEST_CASE("eval with degenerate profiles equals the gated forward") {
  Rng rng(7);
  ResidualNet net = init_net<double>(4, 8, 3, 3, rng);
  randomize_params(net, rng, 0.5);
  MatrixXd batch = random_batch(5, 3, rng);

  SurvivalProfile ones;
  ones.probs.assign(4, 1.0);
  CHECK(same(forward_eval(net, batch, ones),
             forward_train(net, batch, make_mask(std::vector<bool>(4, true))).logits));

  SurvivalProfile zeros;
  zeros.probs.assign(4, 0.0);
  CHECK(same(forward_eval(net, batch, zeros),
             forward_train(net, batch, make_mask(std::vector<bool>(4, false))).logits));
}

TEST_CASE("identity-mode eval equals the exact expectation over all masks") {
  Rng rng(8);
  const int depth = 6;
  ResidualNet net = init_net<double>(depth, 5, 3, 2, rng, Activation::Identity);
  randomize_params(net, rng, 0.4);
  MatrixXd batch = random_batch(3, 3, rng);

  SurvivalProfile profile;
  profile.probs = {0.95, 0.8, 0.7, 0.55, 0.4, 0.15};

  MatrixXd expectation = MatrixXd::Zero(3, 2);
  for (int bits = 0; bits < (1 << depth); ++bits) {
    std::vector<bool> alive(depth);
    double weight = 1.0;
    for (int i = 0; i < depth; ++i) {
      alive[i] = (bits >> i) & 1;
      weight *= alive[i] ? profile.probs[i] : 1.0 - profile.probs[i];
    }
    expectation += weight * forward_train(net, batch, make_mask(alive)).logits;
  }
  MatrixXd evaluated = forward_eval(net, batch, profile);
  CHECK((evaluated - expectation).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cross-entropy basics") {
  MatrixXd uniform = MatrixXd::Zero(2, 7);
  CHECK(loss(uniform, {0, 6}) == doctest::Approx(std::log(7.0)).epsilon(1e-14));

  // growing margin drives the loss to zero monotonically
  double previous = std::log(3.0);
  for (double margin : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    MatrixXd logits = MatrixXd::Zero(1, 3);
    logits(0, 1) = margin;
    double value = loss(logits, {1});
    CHECK(value < previous);
    previous = value;
  }
  CHECK(previous < 1e-13);

  CHECK_THROWS_AS(loss(uniform, {0}), std::invalid_argument);
  CHECK_THROWS_AS(loss(uniform, {0, 7}), std::invalid_argument);
  CHECK_THROWS_AS(loss(uniform, {0, -1}), std::invalid_argument);
}

TEST_CASE("cross-entropy matches a long-double oracle") {
  Rng rng(9);
  MatrixXd logits = random_batch(4, 3, rng) * 3.0;
  std::vector<int> labels = {2, 0, 1, 1};

  long double total = 0.0L;
  for (int i = 0; i < 4; ++i) {
    long double denom = 0.0L;
    for (int j = 0; j < 3; ++j) denom += std::exp(static_cast<long double>(logits(i, j)));
    total += -(static_cast<long double>(logits(i, labels[i])) - std::log(denom));
  }
  double expected = static_cast<double>(total / 4.0L);
  CHECK(loss(logits, labels) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backward zeroes dead blocks and feeds the live path") {
  Rng rng(10);
  ResidualNet net = init_net<double>(4, 6, 3, 3, rng);
  randomize_params(net, rng, 0.5);
  MatrixXd batch = random_batch(5, 3, rng);
  std::vector<int> labels = {0, 1, 2, 0, 1};

  ForwardCache cache = forward_train(net, batch, make_mask(std::vector<bool>(4, false)));
  Gradients grads = backward(net, cache, labels);
  for (const auto& block : grads.blocks) {
    CHECK(block.fc1.weight.isZero(0.0));
    CHECK(block.fc1.bias.isZero(0.0));
    CHECK(block.fc2.weight.isZero(0.0));
    CHECK(block.fc2.bias.isZero(0.0));
  }
  CHECK(grads.head.weight.cwiseAbs().maxCoeff() > 0.0);
  CHECK(grads.input_proj.weight.cwiseAbs().maxCoeff() > 0.0);

  // partially dead mask: exactly the dead blocks get zero gradients
  ForwardCache mixed = forward_train(net, batch, make_mask({true, false, true, false}));
  Gradients mixed_grads = backward(net, mixed, labels);
  CHECK(mixed_grads.blocks[1].fc1.weight.isZero(0.0));
  CHECK(mixed_grads.blocks[3].fc2.weight.isZero(0.0));
  CHECK(mixed_grads.blocks[0].fc1.weight.cwiseAbs().maxCoeff() > 0.0);
  CHECK(mixed_grads.blocks[2].fc1.weight.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(20240808);
  for (int trial = 0; trial < 3; ++trial) {
    ResidualNet net = init_net<double>(4, 8, 5, 3, rng);
    randomize_params(net, rng, 0.5);
    MatrixXd batch = random_batch(16, 5, rng);
    std::vector<int> labels = random_labels(16, 3, rng);
    std::vector<bool> alive(4);
    for (int i = 0; i < 4; ++i) alive[i] = rng.bernoulli(0.7);
    double worst = max_grad_rel_error(net, batch, make_mask(alive), labels, 1e-5);
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("a dead block is indistinguishable from a deleted one") {
  Rng rng(12);
  ResidualNet full = init_net<double>(3, 6, 2, 3, rng);
  randomize_params(full, rng, 0.5);

  // same parameters with the middle block removed
  ResidualNet reduced = full;
  reduced.blocks.erase(reduced.blocks.begin() + 1);

  MatrixXd batch = random_batch(6, 2, rng);
  std::vector<int> labels = {0, 1, 2, 1, 0, 2};
  ForwardCache cache_full = forward_train(full, batch, make_mask({true, false, true}));
  ForwardCache cache_reduced = forward_train(reduced, batch, make_mask({true, true}));
  CHECK(same(cache_full.logits, cache_reduced.logits));

  Gradients g_full = backward(full, cache_full, labels);
  Gradients g_reduced = backward(reduced, cache_reduced, labels);
  CHECK((g_full.blocks[0].fc1.weight - g_reduced.blocks[0].fc1.weight)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((g_full.blocks[2].fc2.weight - g_reduced.blocks[1].fc2.weight)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((g_full.input_proj.weight - g_reduced.input_proj.weight).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((g_full.head.weight - g_reduced.head.weight).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward rejects a stale cache") {
  Rng rng(13);
  ResidualNet net = init_net<double>(3, 6, 2, 3, rng);
  ResidualNet other = init_net<double>(3, 9, 2, 3, rng);
  MatrixXd batch = MatrixXd::Zero(2, 2);
  ForwardCache cache = forward_train(net, batch, make_mask({true, true, true}));
  CHECK_THROWS_AS(backward(other, cache, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST_CASE("error rate counts argmax misses, ties go to the lowest class") {
  MatrixXd perfect(3, 3);
  perfect << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  CHECK(error_rate(perfect, {0, 1, 2}) == 0.0);
  CHECK(error_rate(perfect, {1, 2, 0}) == 1.0);

  MatrixXd batch = MatrixXd::Zero(8, 2);
  for (int i = 0; i < 8; ++i) batch(i, 0) = 1.0;  // predicts class 0
  CHECK(error_rate(batch, {0, 0, 0, 0, 0, 0, 1, 1}) == 0.25);

  MatrixXd tie = MatrixXd::Zero(1, 3);  // all equal: argmax resolves to class 0
  CHECK(error_rate(tie, {0}) == 0.0);
  CHECK(error_rate(tie, {2}) == 1.0);
}

TEST_CASE("same seed and inputs give bitwise-identical logits") {
  for (int run = 0; run < 2; ++run) {
    static MatrixXd first;
    Rng rng(314159);
    ResidualNet net = init_net<double>(5, 8, 3, 4, rng);
    MatrixXd batch = random_batch(6, 3, rng);
    SurvivalProfile profile;
    profile.probs.assign(5, 0.75);
    MatrixXd logits = forward_eval(net, batch, profile);
    if (run == 0) {
      first = logits;
    } else {
      CHECK(same(logits, first));
    }
  }
}

TEST_SUITE_END();
