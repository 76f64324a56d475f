#include "egoloc/encoders/semantic.hpp"

#include <cmath>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::enc {

SemanticTable::SemanticTable(int num_classes, int dim, double image_sigma, std::uint64_t seed)
    : text_(num::Shape{num_classes, dim}, 0.0), sigma_(image_sigma) {
  if (num_classes < 1 || dim < 1) throw ConfigError("semantic table needs classes and dimensions");
  if (image_sigma < 0.0) throw ConfigError("image noise scale must be non-negative");
  Rng rng(derive_seed(seed, {0x73656dULL}));
  const int attempts = 10000;
  for (int c = 0; c < num_classes; ++c) {
    double* row = text_.ptr() + static_cast<std::ptrdiff_t>(c) * dim;
    bool ok = false;
    for (int a = 0; a < attempts && !ok; ++a) {
      for (int k = 0; k < dim; ++k) row[k] = gaussian(rng);
      // Gram-Schmidt against earlier captions while an orthogonal direction exists
      if (c < dim) {
        for (int pass = 0; pass < 2; ++pass) {
          for (int q = 0; q < c; ++q) {
            const double* prev = text_.ptr() + static_cast<std::ptrdiff_t>(q) * dim;
            double d = 0.0;
            for (int k = 0; k < dim; ++k) d += row[k] * prev[k];
            for (int k = 0; k < dim; ++k) row[k] -= d * prev[k];
          }
        }
      }
      double n = 0.0;
      for (int k = 0; k < dim; ++k) n += row[k] * row[k];
      n = std::sqrt(n);
      if (n < 1e-9) continue;
      for (int k = 0; k < dim; ++k) row[k] /= n;
      ok = true;
      for (int q = 0; q < c && ok; ++q) {
        const double* prev = text_.ptr() + static_cast<std::ptrdiff_t>(q) * dim;
        double d = 0.0;
        for (int k = 0; k < dim; ++k) d += row[k] * prev[k];
        ok = std::abs(d) <= kMaxCaptionOverlap;
      }
    }
    if (!ok) {
      throw ConfigError("cannot place " + std::to_string(num_classes) + " caption vectors in " + std::to_string(dim) +
                        " dimensions with overlap <= 0.2");
    }
  }
}

num::Tensor SemanticTable::text(int c) const {
  if (c < 0 || c >= num_classes()) throw InvalidArgument("unknown action class " + std::to_string(c));
  const int D = dim();
  num::Tensor out(num::Shape{D}, 0.0);
  std::copy(text_.ptr() + static_cast<std::ptrdiff_t>(c) * D, text_.ptr() + static_cast<std::ptrdiff_t>(c + 1) * D,
            out.ptr());
  return out;
}

num::Tensor SemanticTable::image(int c, std::int64_t t, std::uint64_t seed) const {
  num::Tensor e = text(c);
  if (sigma_ == 0.0) return e;
  const int D = dim();
  Rng rng(derive_seed(seed, {0x696d67ULL, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(t)}));
  const double sd = sigma_ / std::sqrt(static_cast<double>(D));
  double n = 0.0;
  for (auto& v : e.data()) {
    v += gaussian(rng, 0.0, sd);
    n += v * v;
  }
  n = std::sqrt(n);
  for (auto& v : e.data()) v /= n;
  return e;
}

std::uint64_t SemanticTable::checksum() const {
  std::uint64_t h = io::fnv1a64(text_.ptr(), sizeof(double) * static_cast<std::size_t>(text_.size()));
  return io::fnv1a64(&sigma_, sizeof(sigma_), h);
}

num::Tensor semantic_embed(const SemanticTable& table, int c, SemanticKind kind, std::int64_t t, std::uint64_t seed) {
  return kind == SemanticKind::kText ? table.text(c) : table.image(c, t, seed);
}

}  // namespace egoloc::enc
