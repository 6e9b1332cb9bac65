#include "stochdepth/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stochdepth {

namespace {

template <typename T>
MatrixT<T> activate(const MatrixT<T>& pre, Activation activation) {
  if (activation == Activation::Identity) return pre;
  return pre.cwiseMax(T(0));
}

// Elementwise activation derivative at the cached pre-activation. The ReLU
// subgradient at exactly zero is taken as zero.
template <typename T>
MatrixT<T> activation_grad(const MatrixT<T>& pre, Activation activation) {
  if (activation == Activation::Identity) {
    return MatrixT<T>::Ones(pre.rows(), pre.cols());
  }
  return (pre.array() > T(0)).template cast<T>().matrix();
}

template <typename T>
DenseT<T> init_dense(int out, int in, Rng& rng, double scale = 1.0) {
  DenseT<T> layer;
  layer.weight.resize(out, in);
  double bound = scale * std::sqrt(6.0 / in);
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) {
      layer.weight(r, c) = static_cast<T>(rng.uniform_range(-bound, bound));
    }
  }
  layer.bias = VectorT<T>::Zero(out);
  return layer;
}

template <typename T>
void check_labels(const MatrixT<T>& logits, const std::vector<int>& labels) {
  if (logits.rows() == 0) throw std::invalid_argument("empty logits");
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw std::invalid_argument("label count " + std::to_string(labels.size()) +
                                " does not match logit rows " +
                                std::to_string(logits.rows()));
  }
  for (int y : labels) {
    if (y < 0 || y >= logits.cols()) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside 0.." +
                                  std::to_string(logits.cols() - 1));
    }
  }
}

}  // namespace

template <typename T>
ResidualNetT<T> init_net(int blocks, int width, int input_dim, int classes,
                         Rng& rng, Activation activation) {
  if (blocks < 1 || width < 1 || input_dim < 1 || classes < 1) {
    throw std::invalid_argument("all net dimensions must be >= 1");
  }
  ResidualNetT<T> net;
  net.activation = activation;
  net.input_proj = init_dense<T>(width, input_dim, rng);
  net.blocks.resize(blocks);
  // The block output transform carries an extra 1/sqrt(L) so the hidden
  // state stays O(1) through the residual stack; without it the variance
  // doubles per block and deep norm-free nets diverge immediately.
  double residual_scale = 1.0 / std::sqrt(static_cast<double>(blocks));
  for (auto& block : net.blocks) {
    block.fc1 = init_dense<T>(width, width, rng);
    block.fc2 = init_dense<T>(width, width, rng, residual_scale);
  }
  net.head.weight = MatrixT<T>::Zero(classes, width);
  net.head.bias = VectorT<T>::Zero(classes);
  return net;
}

template <typename T>
ForwardCacheT<T> forward_train(const ResidualNetT<T>& net, const MatrixT<T>& batch,
                               const GateMask& mask) {
  if (mask.depth() != net.depth()) {
    throw std::invalid_argument("mask length " + std::to_string(mask.depth()) +
                                " does not match net depth " +
                                std::to_string(net.depth()));
  }
  if (batch.cols() != net.input_dim()) {
    throw std::invalid_argument("batch width " + std::to_string(batch.cols()) +
                                " does not match input_dim " +
                                std::to_string(net.input_dim()));
  }
  const int depth = net.depth();
  ForwardCacheT<T> cache;
  cache.mask = mask;
  cache.input = batch;
  cache.proj_pre = net.input_proj.apply(batch);
  cache.h0 = activate(cache.proj_pre, net.activation);
  cache.fc1_pre.resize(depth);
  cache.fc1_post.resize(depth);
  cache.res_pre.resize(depth);
  cache.h.resize(depth);
  const MatrixT<T>* prev = &cache.h0;
  for (int i = 0; i < depth; ++i) {
    if (mask.alive[i]) {
      const ResidualBlockT<T>& block = net.blocks[i];
      cache.fc1_pre[i] = block.fc1.apply(*prev);
      cache.fc1_post[i] = activate(cache.fc1_pre[i], net.activation);
      cache.res_pre[i] = *prev + block.fc2.apply(cache.fc1_post[i]);
      cache.h[i] = activate(cache.res_pre[i], net.activation);
      ++cache.executed_blocks;
    } else {
      cache.h[i] = *prev;
    }
    prev = &cache.h[i];
  }
  cache.logits = net.head.apply(*prev);
  return cache;
}

template <typename T>
MatrixT<T> forward_eval(const ResidualNetT<T>& net, const MatrixT<T>& batch,
                        const SurvivalProfile& profile) {
  if (profile.depth() != net.depth()) {
    throw std::invalid_argument("profile length " + std::to_string(profile.depth()) +
                                " does not match net depth " +
                                std::to_string(net.depth()));
  }
  if (batch.cols() != net.input_dim()) {
    throw std::invalid_argument("batch width " + std::to_string(batch.cols()) +
                                " does not match input_dim " +
                                std::to_string(net.input_dim()));
  }
  MatrixT<T> h = activate<T>(net.input_proj.apply(batch), net.activation);
  for (int i = 0; i < net.depth(); ++i) {
    const ResidualBlockT<T>& block = net.blocks[i];
    T p = static_cast<T>(profile.probs[i]);
    MatrixT<T> f = block.fc2.apply(activate<T>(block.fc1.apply(h), net.activation));
    h = activate<T>(h + p * f, net.activation);
  }
  return net.head.apply(h);
}

template <typename T>
double loss(const MatrixT<T>& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  const Eigen::Index rows = logits.rows();
  const Eigen::Index cols = logits.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    double m = static_cast<double>(logits.row(i).maxCoeff());
    double sum = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      sum += std::exp(static_cast<double>(logits(i, j)) - m);
    }
    total += std::log(sum) + m - static_cast<double>(logits(i, labels[i]));
  }
  return total / static_cast<double>(rows);
}

template <typename T>
GradientsT<T> backward(const ResidualNetT<T>& net, const ForwardCacheT<T>& cache,
                       const std::vector<int>& labels) {
  const int depth = net.depth();
  check_labels(cache.logits, labels);
  if (cache.mask.depth() != depth ||
      static_cast<int>(cache.h.size()) != depth ||
      cache.logits.cols() != net.classes() ||
      cache.h0.cols() != net.width() ||
      cache.input.cols() != net.input_dim() ||
      cache.input.rows() != cache.logits.rows()) {
    throw std::invalid_argument("forward cache does not match net");
  }
  const Eigen::Index n = cache.logits.rows();
  const Eigen::Index classes = cache.logits.cols();

  GradientsT<T> grads = zeros_like(static_cast<const NetParamsT<T>&>(net));

  // d(mean cross-entropy)/d(logits) = (softmax - onehot) / n
  MatrixT<T> dlogits(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    T m = cache.logits.row(i).maxCoeff();
    VectorT<T> ex = (cache.logits.row(i).array() - m).exp().matrix().transpose();
    dlogits.row(i) = (ex / ex.sum()).transpose();
    dlogits(i, labels[i]) -= T(1);
  }
  dlogits /= static_cast<T>(n);

  const MatrixT<T>& last = depth > 0 ? cache.h[depth - 1] : cache.h0;
  grads.head.weight = dlogits.transpose() * last;
  grads.head.bias = dlogits.colwise().sum().transpose();

  MatrixT<T> dh = dlogits * net.head.weight;
  for (int i = depth - 1; i >= 0; --i) {
    if (!cache.mask.alive[i]) continue;  // identity skip: gradient unchanged
    const MatrixT<T>& prev = i == 0 ? cache.h0 : cache.h[i - 1];
    const ResidualBlockT<T>& block = net.blocks[i];
    MatrixT<T> du = dh.cwiseProduct(activation_grad(cache.res_pre[i], net.activation));
    grads.blocks[i].fc2.weight = du.transpose() * cache.fc1_post[i];
    grads.blocks[i].fc2.bias = du.colwise().sum().transpose();
    MatrixT<T> da1 = du * block.fc2.weight;
    MatrixT<T> dz1 = da1.cwiseProduct(activation_grad(cache.fc1_pre[i], net.activation));
    grads.blocks[i].fc1.weight = dz1.transpose() * prev;
    grads.blocks[i].fc1.bias = dz1.colwise().sum().transpose();
    dh = du + dz1 * block.fc1.weight;
  }

  MatrixT<T> dproj = dh.cwiseProduct(activation_grad(cache.proj_pre, net.activation));
  grads.input_proj.weight = dproj.transpose() * cache.input;
  grads.input_proj.bias = dproj.colwise().sum().transpose();
  return grads;
}

template <typename T>
double error_rate(const MatrixT<T>& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = static_cast<int>(j);
    }
    if (best != labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(logits.rows());
}

template <typename T>
NetParamsT<T> zeros_like(const NetParamsT<T>& like) {
  NetParamsT<T> out;
  out.input_proj.weight = MatrixT<T>::Zero(like.input_proj.weight.rows(),
                                           like.input_proj.weight.cols());
  out.input_proj.bias = VectorT<T>::Zero(like.input_proj.bias.size());
  out.blocks.resize(like.blocks.size());
  for (std::size_t i = 0; i < like.blocks.size(); ++i) {
    out.blocks[i].fc1.weight = MatrixT<T>::Zero(like.blocks[i].fc1.weight.rows(),
                                                like.blocks[i].fc1.weight.cols());
    out.blocks[i].fc1.bias = VectorT<T>::Zero(like.blocks[i].fc1.bias.size());
    out.blocks[i].fc2.weight = MatrixT<T>::Zero(like.blocks[i].fc2.weight.rows(),
                                                like.blocks[i].fc2.weight.cols());
    out.blocks[i].fc2.bias = VectorT<T>::Zero(like.blocks[i].fc2.bias.size());
  }
  out.head.weight = MatrixT<T>::Zero(like.head.weight.rows(), like.head.weight.cols());
  out.head.bias = VectorT<T>::Zero(like.head.bias.size());
  return out;
}

namespace {

template <typename To, typename From>
DenseT<To> dense_cast(const DenseT<From>& layer) {
  DenseT<To> out;
  out.weight = layer.weight.template cast<To>();
  out.bias = layer.bias.template cast<To>();
  return out;
}

}  // namespace

template <typename To, typename From>
ResidualNetT<To> net_cast(const ResidualNetT<From>& net) {
  ResidualNetT<To> out;
  out.activation = net.activation;
  out.input_proj = dense_cast<To>(net.input_proj);
  out.blocks.resize(net.blocks.size());
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    out.blocks[i].fc1 = dense_cast<To>(net.blocks[i].fc1);
    out.blocks[i].fc2 = dense_cast<To>(net.blocks[i].fc2);
  }
  out.head = dense_cast<To>(net.head);
  return out;
}

#define STOCHDEPTH_INSTANTIATE_NET(T)                                          \
  template ResidualNetT<T> init_net<T>(int, int, int, int, Rng&, Activation);  \
  template ForwardCacheT<T> forward_train<T>(const ResidualNetT<T>&,           \
                                             const MatrixT<T>&,                \
                                             const GateMask&);                 \
  template MatrixT<T> forward_eval<T>(const ResidualNetT<T>&,                  \
                                      const MatrixT<T>&,                       \
                                      const SurvivalProfile&);                 \
  template double loss<T>(const MatrixT<T>&, const std::vector<int>&);         \
  template GradientsT<T> backward<T>(const ResidualNetT<T>&,                   \
                                     const ForwardCacheT<T>&,                  \
                                     const std::vector<int>&);                 \
  template double error_rate<T>(const MatrixT<T>&, const std::vector<int>&);   \
  template NetParamsT<T> zeros_like<T>(const NetParamsT<T>&);

STOCHDEPTH_INSTANTIATE_NET(double)
STOCHDEPTH_INSTANTIATE_NET(float)

template ResidualNetT<double> net_cast<double, double>(const ResidualNetT<double>&);
template ResidualNetT<float> net_cast<float, double>(const ResidualNetT<double>&);
template ResidualNetT<double> net_cast<double, float>(const ResidualNetT<float>&);
template ResidualNetT<float> net_cast<float, float>(const ResidualNetT<float>&);

}  // namespace stochdepth
