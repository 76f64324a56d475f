#pragma once

#include <cstdint>

#include "egoloc/numerics/tensor.hpp"

namespace egoloc::enc {

enum class SemanticKind { kImage, kText };

/// Frozen stand-in for pretrained vision-language encoders: one unit "caption"
/// vector per action class; "image" vectors are noisy copies of it.
class SemanticTable {
 public:
  SemanticTable(int num_classes, int dim, double image_sigma, std::uint64_t seed);

  int num_classes() const { return static_cast<int>(text_.dim(0)); }
  int dim() const { return static_cast<int>(text_.dim(1)); }
  double image_sigma() const { return sigma_; }

  /// [D] caption embedding of class c; throws InvalidArgument for unknown c.
  num::Tensor text(int c) const;
  /// e_L(c) + N(0, (sigma/sqrt(D))^2 I), renormalised; seeded by (seed, c, t).
  num::Tensor image(int c, std::int64_t t, std::uint64_t seed) const;

  const num::Tensor& text_matrix() const { return text_; }
  std::uint64_t checksum() const;

 private:
  num::Tensor text_;  // [C, D]
  double sigma_;
};

inline constexpr double kMaxCaptionOverlap = 0.2;

num::Tensor semantic_embed(const SemanticTable& table, int c, SemanticKind kind, std::int64_t t, std::uint64_t seed);

}  // namespace egoloc::enc
