// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/error.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/fields/encoding.hpp"
#include "nerfedit/fields/layers.hpp"
#include "nerfedit/fields/parameters.hpp"

namespace nerfedit::fields {

template <typename T>
struct FieldOutput {
  T density{};
  Vec3<T> color = Vec3<T>::Zero();
};

template <typename T>
struct EditableOutput {
  T density{};
  Vec3<T> color = Vec3<T>::Zero();
  T density_blend{};
  T color_blend{};
};

/// Per-sample outputs of the frozen field, one column per sample.
template <typename T>
struct FieldBatch {
  Row<T> density;
  Mat3X<T> color;

  [[nodiscard]] Eigen::Index size() const { return density.cols(); }
  FieldOutput<T> sample(Eigen::Index i) const { return {density(i), color.col(i)}; }
};

template <typename T>
struct EditableBatch {
  Row<T> density;
  Mat3X<T> color;
  Row<T> density_blend;
  Row<T> color_blend;

  [[nodiscard]] Eigen::Index size() const { return density.cols(); }
  EditableOutput<T> sample(Eigen::Index i) const {
    return {density(i), color.col(i), density_blend(i), color_blend(i)};
  }
  static EditableBatch zeros(Eigen::Index n) {
    return {Row<T>::Zero(n), Mat3X<T>::Zero(3, n), Row<T>::Zero(n), Row<T>::Zero(n)};
  }
};

struct PretrainedArchitecture {
  int depth = 8;
  int width = 256;
  // Index of the trunk layer whose input is [h, gamma(x)].
  int skip_layer = 5;
  int color_width = 128;
  EncodingConfig position{10, true};
  EncodingConfig direction{4, true};

  void validate() const {
    require(depth >= 1 && width >= 1 && color_width >= 1, "PretrainedArchitecture: bad sizes");
    require(skip_layer < depth, "PretrainedArchitecture: skip_layer must be < depth");
    position.validate();
    direction.validate();
  }
  bool operator==(const PretrainedArchitecture&) const = default;
};

struct EditableArchitecture {
  int width = 256;
  int residual_blocks = 2;
  int color_width = 128;
  EncodingConfig position{10, true};
  EncodingConfig direction{4, true};
  // Initial value of both blend ratios.
  double initial_blend = 0.05;
  // Scale applied to the density head's default init; 0 gives sigma_e == 0.
  double density_head_scale = 0.01;

  void validate() const {
    require(width >= 1 && residual_blocks >= 0 && color_width >= 1, "EditableArchitecture: bad sizes");
    require(initial_blend > 0 && initial_blend < 1, "EditableArchitecture: initial_blend must be in (0,1)");
    position.validate();
    direction.validate();
  }
  bool operator==(const EditableArchitecture&) const = default;
};

namespace detail {

/// Normalizes direction columns that are off unit length by more than 1e-6.
template <typename T>
Mat3X<T> normalized_directions(const Mat3X<T>& d) {
  Mat3X<T> out = d;
  bool warned = false;
  for (Eigen::Index i = 0; i < d.cols(); ++i) {
    const T n = d.col(i).norm();
    if (std::abs(static_cast<double>(n) - 1.0) > 1e-6) {
      require(n > T(0) && std::isfinite(static_cast<double>(n)), "field: zero or non-finite view direction");
      out.col(i) /= n;
      if (!warned) {
        log::warn("field: view direction not normalized (|d|={}); normalizing", static_cast<double>(n));
        warned = true;
      }
    }
  }
  return out;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace detail

/// Frozen NeRF-style field: ReLU trunk with one input skip, ReLU density
/// head, view-conditioned logistic color branch.
template <typename T>
class PretrainedField {
 public:
  struct Cache {
    Mat3X<T> positions;
    Mat<T> enc_x, enc_d;
    std::vector<Mat<T>> inputs;  // input to trunk layer i
    std::vector<Mat<T>> pre;     // pre-activation of trunk layer i
    Mat<T> h;                    // trunk output
    Mat<T> density_pre, feature, color_in, color_pre1, color_hidden;
    Mat<T> color;
  };

  explicit PretrainedField(const PretrainedArchitecture& arch, uint64_t seed = 0)
      : arch_(arch), params_(false) {
    build();
    Rng rng(seed);
    for (const auto& l : trunk_) l.init_default(params_, rng);
    density_head_.init_default(params_, rng);
    feature_.init_default(params_, rng);
    color_hidden_.init_default(params_, rng);
    color_out_.init_default(params_, rng);
  }

  /// Adopts an existing parameter payload; the layout must match `arch`.
  PretrainedField(const PretrainedArchitecture& arch, ParameterSet<T> params) : arch_(arch), params_(false) {
    build();
    require(params.specs() == params_.specs(), "PretrainedField: parameter layout does not match architecture");
    require(params.all_finite(), "PretrainedField: non-finite parameters");
    const bool trainable = params_.trainable();
    params_ = std::move(params);
    params_.set_trainable(trainable);
  }

  [[nodiscard]] const PretrainedArchitecture& architecture() const { return arch_; }
  [[nodiscard]] const ParameterSet<T>& params() const { return params_; }
  ParameterSet<T>& mutable_params() { return params_; }

  FieldBatch<T> forward(const Mat3X<T>& x, const Mat3X<T>& d_in, Cache* cache = nullptr) const {
    require(x.cols() == d_in.cols(), "PretrainedField: position/direction count mismatch");
    const Mat3X<T> d = detail::normalized_directions(d_in);
    Mat<T> enc_x = encode_batch(x, arch_.position);
    Mat<T> enc_d = encode_batch(d, arch_.direction);
    Mat<T> h = enc_x;
    std::vector<Mat<T>> inputs, pre;
    for (int i = 0; i < arch_.depth; ++i) {
      if (i == arch_.skip_layer) {
        Mat<T> cat(h.rows() + enc_x.rows(), h.cols());
        cat << h, enc_x;
        h = std::move(cat);
      }
      Mat<T> z = trunk_[i].forward(params_, h);
      if (cache) {
        inputs.push_back(std::move(h));
        pre.push_back(z);
      }
      h = relu(z);
    }
    Mat<T> density_pre = density_head_.forward(params_, h);
    Mat<T> feature = feature_.forward(params_, h);
    Mat<T> color_in(feature.rows() + enc_d.rows(), feature.cols());
    color_in << feature, enc_d;
    Mat<T> color_pre1 = color_hidden_.forward(params_, color_in);
    Mat<T> color_hidden = relu(color_pre1);
    Mat<T> color = logistic<T>(color_out_.forward(params_, color_hidden));

    FieldBatch<T> out{relu(density_pre), color};
    if (cache) {
      cache->positions = x;
      cache->enc_x = std::move(enc_x);
      cache->enc_d = std::move(enc_d);
      cache->inputs = std::move(inputs);
      cache->pre = std::move(pre);
      cache->h = std::move(h);
      cache->density_pre = std::move(density_pre);
      cache->feature = std::move(feature);
      cache->color_in = std::move(color_in);
      cache->color_pre1 = std::move(color_pre1);
      cache->color_hidden = std::move(color_hidden);
      cache->color = std::move(color);
    }
    return out;
  }

  /// Accumulates parameter gradients; optionally returns dL/dx.
  void backward(const Cache& c, const Row<T>& d_density, const Mat3X<T>& d_color, ParameterSet<T>& grads,
                Mat3X<T>* d_x = nullptr) const {
    Mat<T> dz_color = (d_color.array() * c.color.array() * (T(1) - c.color.array())).matrix();
    Mat<T> d_hidden = color_out_.backward(params_, grads, c.color_hidden, dz_color);
    Mat<T> d_color_in = color_hidden_.backward(params_, grads, c.color_in, relu_backward<T>(c.color_pre1, d_hidden));
    Mat<T> d_feature = d_color_in.topRows(feature_.out);
    Mat<T> dh = feature_.backward(params_, grads, c.h, d_feature);
    Mat<T> dz_density = relu_backward<T>(c.density_pre, Mat<T>(d_density));
    dh += density_head_.backward(params_, grads, c.h, dz_density);

    Mat<T> d_enc_x = Mat<T>::Zero(c.enc_x.rows(), c.enc_x.cols());
    for (int i = arch_.depth - 1; i >= 0; --i) {
      Mat<T> dz = relu_backward<T>(c.pre[i], dh);
      Mat<T> d_in = trunk_[i].backward(params_, grads, c.inputs[i], dz, i > 0 || d_x != nullptr);
      if (i == 0) {
        if (d_x) d_enc_x += d_in;
        break;
      }
      if (i == arch_.skip_layer) {
        d_enc_x += d_in.bottomRows(c.enc_x.rows());
        dh = d_in.topRows(arch_.width);
      } else {
        dh = std::move(d_in);
      }
    }
    if (d_x) *d_x = encode_batch_vjp<T>(c.positions, d_enc_x, arch_.position);
  }

  FieldOutput<T> eval(const Vec3<T>& x, const Vec3<T>& d) const {
    require(params_.all_finite(), "PretrainedField: non-finite parameters");
    Mat3X<T> xm = x;
    Mat3X<T> dm = d;
    return forward(xm, dm).sample(0);
  }

 private:
  void build() {
    arch_.validate();
    const int px = arch_.position.output_dim(3);
    const int pd = arch_.direction.output_dim(3);
    trunk_.clear();
    for (int i = 0; i < arch_.depth; ++i) {
      int in = (i == 0) ? px : arch_.width;
      if (i == arch_.skip_layer && i > 0) in += px;
      trunk_.push_back(Linear::create(params_, "trunk." + std::to_string(i), in, arch_.width));
    }
    density_head_ = Linear::create(params_, "density", arch_.width, 1);
    feature_ = Linear::create(params_, "feature", arch_.width, arch_.width);
    color_hidden_ = Linear::create(params_, "color.hidden", arch_.width + pd, arch_.color_width);
    color_out_ = Linear::create(params_, "color.out", arch_.color_width, 3);
  }

  PretrainedArchitecture arch_;
  ParameterSet<T> params_;
  std::vector<Linear> trunk_;
  Linear density_head_, feature_, color_hidden_, color_out_;
};

/// Gradient with respect to the four editable heads, one column per sample.
template <typename T>
struct EditableGrad {
  Row<T> density;
  Mat3X<T> color;
  Row<T> density_blend;
  Row<T> color_blend;

  static EditableGrad zeros(Eigen::Index n) {
    return {Row<T>::Zero(n), Mat3X<T>::Zero(3, n), Row<T>::Zero(n), Row<T>::Zero(n)};
  }
};

/// Trainable field producing (sigma_e, c_e, beta_sigma, beta_c). Residual
/// trunk; density through ReLU, color and both blend ratios through the
/// logistic function.
template <typename T>
class EditableField {
 public:
  struct Cache {
    Mat3X<T> positions;
    Mat<T> enc_x, enc_d;
    Mat<T> in_pre;
    std::vector<Mat<T>> block_in, block_pre1, block_hidden, block_sum;
    Mat<T> h;
    Mat<T> density_pre, density_blend, color_blend;
    Mat<T> feature, color_in, color_pre1, color_hidden, color;
  };

  explicit EditableField(const EditableArchitecture& arch, uint64_t seed = 0) : arch_(arch), params_(true) {
    build();
    Rng rng(seed);
    input_.init_default(params_, rng);
    for (const auto& b : blocks_) {
      b.first.init_default(params_, rng);
      // Residual branches start near zero so each block is close to identity.
      b.second.init_default(params_, rng, 0.1);
    }
    density_head_.init_default(params_, rng, arch_.density_head_scale);
    density_head_.set_bias(params_, T(0));
    const T blend_logit = static_cast<T>(detail::logit(arch_.initial_blend));
    density_blend_head_.init_default(params_, rng, 0.01);
    density_blend_head_.set_bias(params_, blend_logit);
    color_blend_head_.init_default(params_, rng, 0.01);
    color_blend_head_.set_bias(params_, blend_logit);
    feature_.init_default(params_, rng);
    color_hidden_.init_default(params_, rng);
    color_out_.init_default(params_, rng);
  }

  EditableField(const EditableArchitecture& arch, ParameterSet<T> params) : arch_(arch), params_(true) {
    build();
    require(params.specs() == params_.specs(), "EditableField: parameter layout does not match architecture");
    require(params.all_finite(), "EditableField: non-finite parameters");
    params_ = std::move(params);
    params_.set_trainable(true);
  }

  [[nodiscard]] const EditableArchitecture& architecture() const { return arch_; }
  [[nodiscard]] const ParameterSet<T>& params() const { return params_; }
  ParameterSet<T>& mutable_params() { return params_; }

  // Parameter indices of each head, for gradient-routing checks.
  struct HeadParams {
    std::vector<int> density, density_blend, color_blend, color;
  };
  [[nodiscard]] HeadParams head_params() const {
    return {{density_head_.weight, density_head_.bias},
            {density_blend_head_.weight, density_blend_head_.bias},
            {color_blend_head_.weight, color_blend_head_.bias},
            {feature_.weight, feature_.bias, color_hidden_.weight, color_hidden_.bias, color_out_.weight,
             color_out_.bias}};
  }

  /// Zeroes the density head so sigma_e == 0 everywhere.
  void zero_density_head() {
    params_.matrix(density_head_.weight).setZero();
    params_.matrix(density_head_.bias).setZero();
  }
  /// Sets both blend heads to a constant logit (weights zeroed).
  void set_blend_logits(T density_logit, T color_logit) {
    params_.matrix(density_blend_head_.weight).setZero();
    params_.matrix(density_blend_head_.bias).setConstant(density_logit);
    params_.matrix(color_blend_head_.weight).setZero();
    params_.matrix(color_blend_head_.bias).setConstant(color_logit);
  }

  EditableBatch<T> forward(const Mat3X<T>& x, const Mat3X<T>& d_in, Cache* cache = nullptr) const {
    require(x.cols() == d_in.cols(), "EditableField: position/direction count mismatch");
    const Mat3X<T> d = detail::normalized_directions(d_in);
    Mat<T> enc_x = encode_batch(x, arch_.position);
    Mat<T> enc_d = encode_batch(d, arch_.direction);
    Mat<T> in_pre = input_.forward(params_, enc_x);
    Mat<T> h = relu(in_pre);
    std::vector<Mat<T>> block_in, block_pre1, block_hidden, block_sum;
    for (const auto& [l1, l2] : blocks_) {
      Mat<T> pre1 = l1.forward(params_, h);
      Mat<T> hidden = relu(pre1);
      Mat<T> sum = h + l2.forward(params_, hidden);
      if (cache) {
        block_in.push_back(h);
        block_pre1.push_back(std::move(pre1));
        block_hidden.push_back(std::move(hidden));
        block_sum.push_back(sum);
      }
      h = relu(sum);
    }
    Mat<T> density_pre = density_head_.forward(params_, h);
    Mat<T> density_blend = logistic<T>(density_blend_head_.forward(params_, h));
    Mat<T> color_blend = logistic<T>(color_blend_head_.forward(params_, h));
    Mat<T> feature = feature_.forward(params_, h);
    Mat<T> color_in(feature.rows() + enc_d.rows(), feature.cols());
    color_in << feature, enc_d;
    Mat<T> color_pre1 = color_hidden_.forward(params_, color_in);
    Mat<T> color_hidden = relu(color_pre1);
    Mat<T> color = logistic<T>(color_out_.forward(params_, color_hidden));

    EditableBatch<T> out{relu(density_pre), color, density_blend, color_blend};
    if (cache) {
      cache->positions = x;
      cache->enc_x = std::move(enc_x);
      cache->enc_d = std::move(enc_d);
      cache->in_pre = std::move(in_pre);
      cache->block_in = std::move(block_in);
      cache->block_pre1 = std::move(block_pre1);
      cache->block_hidden = std::move(block_hidden);
      cache->block_sum = std::move(block_sum);
      cache->h = std::move(h);
      cache->density_pre = std::move(density_pre);
      cache->density_blend = std::move(density_blend);
      cache->color_blend = std::move(color_blend);
      cache->feature = std::move(feature);
      cache->color_in = std::move(color_in);
      cache->color_pre1 = std::move(color_pre1);
      cache->color_hidden = std::move(color_hidden);
      cache->color = std::move(color);
    }
    return out;
  }

  void backward(const Cache& c, const EditableGrad<T>& g, ParameterSet<T>& grads, Mat3X<T>* d_x = nullptr) const {
    Mat<T> dz_color = (g.color.array() * c.color.array() * (T(1) - c.color.array())).matrix();
    Mat<T> d_hidden = color_out_.backward(params_, grads, c.color_hidden, dz_color);
    Mat<T> d_color_in = color_hidden_.backward(params_, grads, c.color_in, relu_backward<T>(c.color_pre1, d_hidden));
    Mat<T> dh = feature_.backward(params_, grads, c.h, Mat<T>(d_color_in.topRows(feature_.out)));

    Mat<T> dz_db = (g.density_blend.array() * c.density_blend.array() * (T(1) - c.density_blend.array())).matrix();
    dh += density_blend_head_.backward(params_, grads, c.h, dz_db);
    Mat<T> dz_cb = (g.color_blend.array() * c.color_blend.array() * (T(1) - c.color_blend.array())).matrix();
    dh += color_blend_head_.backward(params_, grads, c.h, dz_cb);
    dh += density_head_.backward(params_, grads, c.h, relu_backward<T>(c.density_pre, Mat<T>(g.density)));

    for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) {
      const auto& [l1, l2] = blocks_[b];
      Mat<T> d_sum = relu_backward<T>(c.block_sum[b], dh);
      Mat<T> d_hidden_b = l2.backward(params_, grads, c.block_hidden[b], d_sum);
      Mat<T> d_in = l1.backward(params_, grads, c.block_in[b], relu_backward<T>(c.block_pre1[b], d_hidden_b));
      dh = d_sum + d_in;
    }
    Mat<T> d_enc = input_.backward(params_, grads, c.enc_x, relu_backward<T>(c.in_pre, dh), d_x != nullptr);
    if (d_x) *d_x = encode_batch_vjp<T>(c.positions, d_enc, arch_.position);
  }

  EditableOutput<T> eval(const Vec3<T>& x, const Vec3<T>& d) const {
    require(params_.all_finite(), "EditableField: non-finite parameters");
    Mat3X<T> xm = x;
    Mat3X<T> dm = d;
    return forward(xm, dm).sample(0);
  }

 private:
  void build() {
    arch_.validate();
    const int px = arch_.position.output_dim(3);
    const int pd = arch_.direction.output_dim(3);
    const int w = arch_.width;
    input_ = Linear::create(params_, "input", px, w);
    blocks_.clear();
    for (int b = 0; b < arch_.residual_blocks; ++b) {
      const std::string n = "block." + std::to_string(b);
      blocks_.emplace_back(Linear::create(params_, n + ".fc1", w, w), Linear::create(params_, n + ".fc2", w, w));
    }
    density_head_ = Linear::create(params_, "density", w, 1);
    density_blend_head_ = Linear::create(params_, "density_blend", w, 1);
    color_blend_head_ = Linear::create(params_, "color_blend", w, 1);
    feature_ = Linear::create(params_, "feature", w, w);
    color_hidden_ = Linear::create(params_, "color.hidden", w + pd, arch_.color_width);
    color_out_ = Linear::create(params_, "color.out", arch_.color_width, 3);
  }

  EditableArchitecture arch_;
  ParameterSet<T> params_;
  Linear input_;
  std::vector<std::pair<Linear, Linear>> blocks_;
  Linear density_head_, density_blend_head_, color_blend_head_, feature_, color_hidden_, color_out_;
};

}  // namespace nerfedit::fields
