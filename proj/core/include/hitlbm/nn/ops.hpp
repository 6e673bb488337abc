// Copyright 2026 The hitlbm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>

#include "hitlbm/nn/matrix.hpp"

namespace hitlbm::nn {

/// Additive value placed on masked attention logits. exp() of it underflows
/// to exactly zero after max-subtraction.
inline constexpr double kMaskValue = -1e9;
inline constexpr double kBceEpsilon = 1e-12;

// ---- affine: y = x W + b --------------------------------------------------

Matrix affine(const Matrix& x, const Matrix& w, std::span<const double> b);

struct AffineGrads {
  Matrix dx;
  Matrix dw;
  Vector db;
};

AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy);

// ---- elementwise ------------------------------------------------------------

double sigmoid(double z);
Matrix relu(const Matrix& x);
/// Gradient through relu given the pre-activation.
Matrix relu_backward(const Matrix& pre, const Matrix& dy);

// ---- softmax / attention ----------------------------------------------------

/// T x T mask with ones strictly above the diagonal (row j may see keys <= j).
Matrix causal_mask(std::size_t t);

/// Row-wise softmax. Entries where mask == 1 receive kMaskValue before the
/// exponent, so they come out exactly 0. A fully masked row is an error.
Matrix masked_softmax(const Matrix& scores, const Matrix* mask = nullptr);

/// dL/dscores given softmax output `probs` and dL/dprobs.
Matrix softmax_backward(const Matrix& probs, const Matrix& dprobs);

struct AttentionCache {
  Matrix q;
  Matrix k;
  Matrix v;
  Matrix probs;
  double scale = 1.0;
};

struct AttentionResult {
  Matrix out;
  AttentionCache cache;
};

/// softmax(Q Kᵀ / sqrt(d_k) + mask) V, where d_k = K.cols().
AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix* mask = nullptr);

struct AttentionGrads {
  Matrix dq;
  Matrix dk;
  Matrix dv;
};

AttentionGrads attention_backward(const AttentionCache& cache, const Matrix& dout);

// ---- losses -----------------------------------------------------------------

struct LossResult {
  double loss = 0.0;
  Vector grad;  // w.r.t. the prediction (or logit) vector
};

/// Mean binary cross-entropy on probabilities clamped to [eps, 1 - eps].
LossResult bce_loss(std::span<const double> pred, std::span<const double> label);

/// Same loss computed from logits; gradient is w.r.t. the logits.
LossResult bce_with_logits(std::span<const double> logits, std::span<const double> label);

}  // namespace hitlbm::nn
