#ifndef NSCA_MODEL_HPP
#define NSCA_MODEL_HPP

#include "nsca/numerics.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nsca {

/// Fully connected layer computing `x * weight + bias` on row batches.
template <typename T>
struct DenseLayer {
  DenseMatrix<T> weight;  // fan_in x fan_out
  Vec<T> bias;            // fan_out

  Eigen::Index fan_in() const { return weight.rows(); }
  Eigen::Index fan_out() const { return weight.cols(); }
};

/// Feature extractor f (tanh after every layer) followed by a linear classifier g.
template <typename T>
struct ModelParameters {
  std::vector<DenseLayer<T>> extractor;
  DenseLayer<T> classifier;

  Eigen::Index input_dim() const {
    return extractor.empty() ? classifier.fan_in() : extractor.front().fan_in();
  }
  Eigen::Index feature_dim() const { return classifier.fan_in(); }
  Eigen::Index class_count() const { return classifier.fan_out(); }

  /// Calls fn(Eigen::Map<Vec<T>>) over every tensor in a fixed order.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    auto visit = [&](DenseLayer<T>& l) {
      fn(Eigen::Map<Vec<T>>(l.weight.data(), l.weight.size()));
      fn(Eigen::Map<Vec<T>>(l.bias.data(), l.bias.size()));
    };
    for (auto& l : extractor) visit(l);
    visit(classifier);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    auto visit = [&](const DenseLayer<T>& l) {
      fn(Eigen::Map<const Vec<T>>(l.weight.data(), l.weight.size()));
      fn(Eigen::Map<const Vec<T>>(l.bias.data(), l.bias.size()));
    };
    for (const auto& l : extractor) visit(l);
    visit(classifier);
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for_each_tensor([&](const auto& m) { n += m.size(); });
    return n;
  }

  Vec<T> flatten() const {
    Vec<T> out(parameter_count());
    Eigen::Index at = 0;
    for_each_tensor([&](const auto& m) {
      out.segment(at, m.size()) = m;
      at += m.size();
    });
    return out;
  }

  void assign_flat(const Vec<T>& flat) {
    if (flat.size() != parameter_count()) throw ShapeError("assign_flat: size mismatch");
    Eigen::Index at = 0;
    for_each_tensor([&](auto m) {
      m = flat.segment(at, m.size());
      at += m.size();
    });
  }

  /// Same shapes, all zeros.
  ModelParameters zeros_like() const {
    ModelParameters z = *this;
    z.for_each_tensor([](auto m) { m.setZero(); });
    return z;
  }

  void validate() const {
    Eigen::Index prev = input_dim();
    auto check = [&](const DenseLayer<T>& l, const char* name) {
      if (l.fan_in() != prev || l.bias.size() != l.fan_out())
        throw ShapeError(std::string("ModelParameters: layer dimensions do not chain at ") + name);
      require_finite(l.weight, name);
      require_finite(l.bias, name);
      prev = l.fan_out();
    };
    for (const auto& l : extractor) check(l, "extractor");
    check(classifier, "classifier");
    if (class_count() < 2) throw ShapeError("ModelParameters: need at least 2 classes");
  }
};

/// Parameter gradients share the parameter layout.
template <typename T>
using ParameterGradients = ModelParameters<T>;

struct Architecture {
  Eigen::Index input_dim = 8;
  std::vector<Eigen::Index> hidden = {64, 32};  // extractor widths; the last one is h
  Eigen::Index class_count = 6;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
template <typename T = double>
ModelParameters<T> init_parameters(const Architecture& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto make = [&](Eigen::Index in, Eigen::Index out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer<T> l{DenseMatrix<T>(in, out), Vec<T>(out)};
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = T(u(rng));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = T(u(rng));
    return l;
  };
  ModelParameters<T> p;
  Eigen::Index prev = arch.input_dim;
  for (Eigen::Index width : arch.hidden) {
    p.extractor.push_back(make(prev, width));
    prev = width;
  }
  p.classifier = make(prev, arch.class_count);
  p.validate();
  return p;
}

/// Intermediates of one forward pass, required by backward.
template <typename T>
struct ForwardCache {
  DenseMatrix<T> inputs;
  std::vector<DenseMatrix<T>> activations;  // tanh output of each extractor layer
  DenseMatrix<T> logits;
};

template <typename T>
struct ForwardResult {
  DenseMatrix<T> features;     // bs x h
  DenseMatrix<T> predictions;  // bs x C, rows on the simplex
  ForwardCache<T> cache;
};

template <typename T, typename Derived>
ForwardResult<T> forward(const ModelParameters<T>& params,
                         const Eigen::MatrixBase<Derived>& batch_inputs) {
  if (batch_inputs.cols() != params.input_dim())
    throw ShapeError("forward: input dim " + std::to_string(batch_inputs.cols()) +
                     " does not match model input dim " + std::to_string(params.input_dim()));
  ForwardResult<T> out;
  out.cache.inputs = batch_inputs;
  const DenseMatrix<T>* x = &out.cache.inputs;
  for (const auto& l : params.extractor) {
    DenseMatrix<T> a = ((*x) * l.weight).rowwise() + l.bias.transpose();
    out.cache.activations.push_back(a.array().tanh().matrix());
    x = &out.cache.activations.back();
  }
  out.features = *x;
  out.cache.logits = (out.features * params.classifier.weight).rowwise() +
                     params.classifier.bias.transpose();
  out.predictions = softmax_rows(out.cache.logits);
  return out;
}

/// Reverse-mode pass from dL/dlogits to every parameter gradient.
template <typename T, typename Derived, typename GradDerived>
ParameterGradients<T> backward_from_logit_grad(const ModelParameters<T>& params,
                                               const Eigen::MatrixBase<Derived>& batch_inputs,
                                               const ForwardCache<T>& cache,
                                               const Eigen::MatrixBase<GradDerived>& grad_logits) {
  if (cache.inputs.rows() != batch_inputs.rows() || cache.inputs.cols() != batch_inputs.cols() ||
      cache.inputs != batch_inputs)
    throw ShapeError("backward: forward intermediates belong to a different batch");
  if (cache.activations.size() != params.extractor.size())
    throw ShapeError("backward: cache does not match model depth");
  if (grad_logits.rows() != cache.logits.rows() || grad_logits.cols() != params.class_count())
    throw ShapeError("backward: logit gradient must be bs x C");
  require_finite(grad_logits, "backward");

  ParameterGradients<T> g = params.zeros_like();
  const DenseMatrix<T>& features =
      params.extractor.empty() ? cache.inputs : cache.activations.back();
  g.classifier.weight = features.transpose() * grad_logits;
  g.classifier.bias = grad_logits.colwise().sum().transpose();

  DenseMatrix<T> upstream = grad_logits * params.classifier.weight.transpose();
  for (std::size_t n = params.extractor.size(); n-- > 0;) {
    const DenseMatrix<T>& act = cache.activations[n];
    const DenseMatrix<T> pre_grad =
        (upstream.array() * (T(1) - act.array().square())).matrix();
    const DenseMatrix<T>& in = n == 0 ? cache.inputs : cache.activations[n - 1];
    g.extractor[n].weight = in.transpose() * pre_grad;
    g.extractor[n].bias = pre_grad.colwise().sum().transpose();
    if (n > 0) upstream = pre_grad * params.extractor[n].weight.transpose();
  }
  return g;
}

template <typename T>
struct OptimizerState {
  ModelParameters<T> momentum_buffers;
  T learning_rate = T(0.01);
  T momentum = T(0.9);

  static OptimizerState for_model(const ModelParameters<T>& params, T lr, T momentum) {
    if (!(momentum >= T(0) && momentum < T(1)))
      throw ShapeError("OptimizerState: momentum must lie in [0, 1)");
    return OptimizerState{params.zeros_like(), lr, momentum};
  }
};

/// Heavy-ball momentum: buffer <- mu * buffer + grad; param <- param - lr * buffer.
template <typename T>
void sgd_momentum_step(ModelParameters<T>& params, const ParameterGradients<T>& grads,
                       OptimizerState<T>& state) {
  const Vec<T> g = grads.flatten();
  Vec<T> buf = state.momentum_buffers.flatten();
  if (g.size() != params.parameter_count() || buf.size() != g.size())
    throw ShapeError("sgd_momentum_step: gradient shape mismatch");
  buf = state.momentum * buf + g;
  state.momentum_buffers.assign_flat(buf);
  params.assign_flat(params.flatten() - state.learning_rate * buf);
}

}  // namespace nsca

#endif  // NSCA_MODEL_HPP
