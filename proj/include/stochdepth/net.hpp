#pragma once

#include <Eigen/Core>
#include <vector>

#include "stochdepth/gates.hpp"
#include "stochdepth/rng.hpp"
#include "stochdepth/schedule.hpp"

namespace stochdepth {

template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Activation applied after the input projection, inside each block and
// after every residual add. Identity exists so linear-mode tests can check
// gated forwards against exact expectations.
enum class Activation { ReLU, Identity };

template <typename T>
struct DenseT {
  MatrixT<T> weight;  // out x in
  VectorT<T> bias;    // out

  // y = x * W^T + b, batch rows are examples.
  MatrixT<T> apply(const MatrixT<T>& x) const {
    return (x * weight.transpose()).rowwise() + bias.transpose();
  }
};

// f(h) = fc2(act(fc1(h))); the block's residual contribution.
template <typename T>
struct ResidualBlockT {
  DenseT<T> fc1;
  DenseT<T> fc2;
};

// Parameter container shared by the net itself, gradients and optimizer
// velocity, so they stay structurally identical by construction.
template <typename T>
struct NetParamsT {
  DenseT<T> input_proj;                   // input_dim -> width
  std::vector<ResidualBlockT<T>> blocks;  // width -> width each
  DenseT<T> head;                         // width -> classes
};

template <typename T>
struct ResidualNetT : NetParamsT<T> {
  Activation activation = Activation::ReLU;

  int depth() const { return static_cast<int>(this->blocks.size()); }
  int width() const { return static_cast<int>(this->input_proj.weight.rows()); }
  int input_dim() const { return static_cast<int>(this->input_proj.weight.cols()); }
  int classes() const { return static_cast<int>(this->head.weight.rows()); }
};

// Everything backward() needs from a training forward pass. Entries for
// dead blocks stay empty; h[l - 1] always holds the state after block l.
template <typename T>
struct ForwardCacheT {
  GateMask mask;
  MatrixT<T> input;
  MatrixT<T> proj_pre;             // input_proj output before activation
  MatrixT<T> h0;                   // state entering block 1
  std::vector<MatrixT<T>> fc1_pre;
  std::vector<MatrixT<T>> fc1_post;
  std::vector<MatrixT<T>> res_pre;  // h_{l-1} + f(h_{l-1}) before activation
  std::vector<MatrixT<T>> h;
  MatrixT<T> logits;
  int executed_blocks = 0;  // blocks whose transform actually ran
};

template <typename T>
using GradientsT = NetParamsT<T>;

// He-style initialization: weights uniform on +-sqrt(6 / fan_in) (variance
// 2 / fan_in), with block output transforms (fc2) scaled by a further
// 1/sqrt(L) to keep the residual stack stable; biases zero, head fully
// zero. Weights are drawn row-major, input_proj first, then fc1/fc2 per
// block, one rng draw per entry.
template <typename T>
ResidualNetT<T> init_net(int blocks, int width, int input_dim, int classes,
                         Rng& rng, Activation activation = Activation::ReLU);

// Gated training pass: h_l = act(h_{l-1} + f_l(h_{l-1})) for alive blocks,
// h_l = h_{l-1} bitwise unchanged for dead ones.
template <typename T>
ForwardCacheT<T> forward_train(const ResidualNetT<T>& net, const MatrixT<T>& batch,
                               const GateMask& mask);

// Deterministic inference pass with expectation scaling:
// h_l = act(h_{l-1} + p_l * f_l(h_{l-1})).
template <typename T>
MatrixT<T> forward_eval(const ResidualNetT<T>& net, const MatrixT<T>& batch,
                        const SurvivalProfile& profile);

// Mean softmax cross-entropy, stabilized by per-row max subtraction.
template <typename T>
double loss(const MatrixT<T>& logits, const std::vector<int>& labels);

// Exact gradients of loss() w.r.t. all parameters. Dead blocks receive
// exactly-zero gradients; their skip connections pass gradient through
// unchanged.
template <typename T>
GradientsT<T> backward(const ResidualNetT<T>& net, const ForwardCacheT<T>& cache,
                       const std::vector<int>& labels);

// Fraction of rows whose argmax differs from the label; argmax ties break
// toward the lowest class index.
template <typename T>
double error_rate(const MatrixT<T>& logits, const std::vector<int>& labels);

// Zero-valued parameter set with the same shapes as `like`.
template <typename T>
NetParamsT<T> zeros_like(const NetParamsT<T>& like);

// Casts every parameter tensor to the target scalar type.
template <typename To, typename From>
ResidualNetT<To> net_cast(const ResidualNetT<From>& net);

using ResidualNet = ResidualNetT<double>;
using ForwardCache = ForwardCacheT<double>;
using Gradients = GradientsT<double>;

}  // namespace stochdepth
