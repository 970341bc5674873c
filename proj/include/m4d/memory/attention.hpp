// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Scaled dot-product attention and its intra-/cross-modal uses.

#ifndef M4D_MEMORY_ATTENTION_HPP
#define M4D_MEMORY_ATTENTION_HPP

#include <cmath>
#include <vector>

#include "m4d/core/types.hpp"

namespace m4d::memory {

/// N_tok x d tokens with their 3D positions at capture time. Image tokens
/// also keep their source pixel so the 2D sinusoid can be re-evaluated.
struct FeatureMap {
  Modality modality = Modality::kLidar;
  Matrix tokens;
  std::vector<Vec3> positions;
  std::vector<Vec2> pixels;

  [[nodiscard]] Eigen::Index size() const { return tokens.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return tokens.cols(); }

  void validate() const {
    if (static_cast<std::size_t>(tokens.rows()) != positions.size()) {
      throw InvalidInput("FeatureMap: token count does not match position count");
    }
    if (modality == Modality::kImage && !pixels.empty() && pixels.size() != positions.size()) {
      throw InvalidInput("FeatureMap: pixel count does not match position count");
    }
    if (!tokens.allFinite()) throw InvalidInput("FeatureMap: non-finite token entries");
  }
};

/// One row per token, aligned with FeatureMap::tokens.
using PosEncodings = Matrix;

/// Row-wise softmax(Q K^T / sqrt(d_head)) for a single head.
inline Matrix attention_weights(const Matrix& queries, const Matrix& keys) {
  if (queries.cols() != keys.cols()) throw InvalidInput("attend: query/key dimensions differ");
  if (keys.rows() == 0) throw InvalidInput("attend: no keys (empty memory)");
  const double scale = queries.cols() > 0 ? 1.0 / std::sqrt(static_cast<double>(queries.cols())) : 1.0;
  Matrix logits = (queries * keys.transpose()) * scale;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - m).exp().matrix();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

/**
 * softmax(Q K^T / sqrt(d)) V. With heads > 1 the embedding is split into
 * equal contiguous slices, each attended independently, then re-joined.
 */
inline Matrix attend(const Matrix& queries, const Matrix& keys, const Matrix& values, int heads = 1) {
  if (keys.rows() == 0) throw InvalidInput("attend: no keys (empty memory)");
  if (queries.cols() != keys.cols()) throw InvalidInput("attend: query/key dimensions differ");
  if (keys.rows() != values.rows()) throw InvalidInput("attend: key/value counts differ");
  if (heads < 1 || queries.cols() % heads != 0 || values.cols() % heads != 0) {
    throw InvalidInput("attend: head count must divide the embedding dimensions");
  }
  if (heads == 1) return attention_weights(queries, keys) * values;

  const Eigen::Index dq = queries.cols() / heads;
  const Eigen::Index dv = values.cols() / heads;
  Matrix out(queries.rows(), values.cols());
  for (int h = 0; h < heads; ++h) {
    const Matrix w = attention_weights(queries.middleCols(h * dq, dq), keys.middleCols(h * dq, dq));
    out.middleCols(h * dv, dv) = w * values.middleCols(h * dv, dv);
  }
  return out;
}

/// SelfAttn(F + P): queries, keys and values are all F + P.
inline FeatureMap self_attend(const FeatureMap& fm, const PosEncodings& pe, int heads = 1) {
  fm.validate();
  if (pe.rows() != fm.tokens.rows() || pe.cols() != fm.tokens.cols()) {
    throw InvalidInput("self_attend: positional encodings not aligned with tokens");
  }
  const Matrix x = fm.tokens + pe;
  FeatureMap out = fm;
  out.tokens = attend(x, x, x, heads);
  return out;
}

/// CrossAttn(target, source + P_source).
inline FeatureMap cross_attend_modal(const FeatureMap& target, const FeatureMap& source,
                                     const PosEncodings& source_pe, int heads = 1) {
  target.validate();
  source.validate();
  if (target.dim() != source.dim()) throw InvalidInput("cross_attend_modal: embedding dimensions differ");
  if (source.size() == 0) throw InvalidInput("cross_attend_modal: empty source");
  if (source_pe.rows() != source.tokens.rows() || source_pe.cols() != source.tokens.cols()) {
    throw InvalidInput("cross_attend_modal: positional encodings not aligned with source tokens");
  }
  const Matrix kv = source.tokens + source_pe;
  FeatureMap out = target;
  out.tokens = attend(target.tokens, kv, kv, heads);
  return out;
}

}  // namespace m4d::memory

#endif  // M4D_MEMORY_ATTENTION_HPP
