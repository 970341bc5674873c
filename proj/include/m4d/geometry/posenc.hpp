// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Unified multi-modal positional encoding: native-space sinusoids plus an
// MLP embedding of 3D position shared by image pseudo-points and LiDAR points.

#ifndef M4D_GEOMETRY_POSENC_HPP
#define M4D_GEOMETRY_POSENC_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "m4d/core/types.hpp"

namespace m4d::geometry {

enum class EncodingKind : std::uint8_t { kSinusoidal2D, kSinusoidal3D, kMlp, kComposed };

struct PosEncoding {
  Vector values;
  EncodingKind kind = EncodingKind::kComposed;

  [[nodiscard]] Eigen::Index dim() const { return values.size(); }
};

/// Frequency ladder: band k has wavelength base * 2^k, so band 0 is finest.
struct SinusoidConfig {
  double base_wavelength_px = 32.0;
  double base_wavelength_m = 2.0;
  /// Scales every sinusoidal entry. Zero disables the sinusoidal part.
  double amplitude = 1.0;
};

inline double band_wavelength(int band, double base) { return base * std::ldexp(1.0, band); }

namespace detail {
// Writes [sin w0 x, cos w0 x, sin w1 x, cos w1 x, ...] for `bands` bands.
inline void write_axis_bands(double x, int bands, double base, double amplitude, double* out) {
  for (int k = 0; k < bands; ++k) {
    const double omega = 2.0 * std::numbers::pi / band_wavelength(k, base);
    out[2 * k] = amplitude * std::sin(omega * x);
    out[2 * k + 1] = amplitude * std::cos(omega * x);
  }
}
}  // namespace detail

/// Per-axis blocks [u-bands | v-bands], d/4 bands per axis.
inline PosEncoding sinpe2d(double u, double v, int d, const SinusoidConfig& cfg = {}) {
  if (d <= 0 || d % 4 != 0) throw InvalidInput("sinpe2d: dimension must be a positive multiple of 4");
  PosEncoding pe{Vector::Zero(d), EncodingKind::kSinusoidal2D};
  const int bands = d / 4;
  detail::write_axis_bands(u, bands, cfg.base_wavelength_px, cfg.amplitude, pe.values.data());
  detail::write_axis_bands(v, bands, cfg.base_wavelength_px, cfg.amplitude, pe.values.data() + d / 2);
  return pe;
}

/// Per-axis blocks [x-bands | y-bands | z-bands], d/6 bands per axis.
inline PosEncoding sinpe3d(double x, double y, double z, int d, const SinusoidConfig& cfg = {}) {
  if (d <= 0 || d % 6 != 0) throw InvalidInput("sinpe3d: dimension must be a positive multiple of 6");
  PosEncoding pe{Vector::Zero(d), EncodingKind::kSinusoidal3D};
  const int bands = d / 6;
  const double axes[3] = {x, y, z};
  for (int a = 0; a < 3; ++a) {
    detail::write_axis_bands(axes[a], bands, cfg.base_wavelength_m, cfg.amplitude,
                             pe.values.data() + a * (d / 3));
  }
  return pe;
}

/**
 * Fully connected network with tanh after every layer. Weights are untrained;
 * the seeded initializer draws uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
 */
class MlpParams {
 public:
  MlpParams() = default;

  MlpParams(std::vector<Matrix> weights, std::vector<Vector> biases)
      : weights_(std::move(weights)), biases_(std::move(biases)) {
    validate();
  }

  /// Layer sizes {3, h1, ..., d}.
  static MlpParams seeded(std::span<const int> sizes, std::uint64_t seed) {
    if (sizes.size() < 2) throw InvalidInput("MlpParams: need at least input and output sizes");
    std::mt19937_64 rng(seed);
    std::vector<Matrix> w;
    std::vector<Vector> b;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const int fan_in = sizes[i];
      const int fan_out = sizes[i + 1];
      if (fan_in <= 0 || fan_out <= 0) throw InvalidInput("MlpParams: layer sizes must be positive");
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      Matrix wi(fan_out, fan_in);
      for (Eigen::Index r = 0; r < wi.rows(); ++r)
        for (Eigen::Index c = 0; c < wi.cols(); ++c) wi(r, c) = dist(rng);
      Vector bi(fan_out);
      for (Eigen::Index r = 0; r < bi.size(); ++r) bi(r) = dist(rng);
      w.push_back(std::move(wi));
      b.push_back(std::move(bi));
    }
    return MlpParams(std::move(w), std::move(b));
  }

  /// Two hidden layers of width d: 3 -> d -> d -> d.
  static MlpParams default_for(int d, std::uint64_t seed) {
    const int sizes[] = {3, d, d, d};
    return seeded(sizes, seed);
  }

  /// All-zero parameters with the default shape; embeds everything to 0.
  static MlpParams zeros(int d) {
    std::vector<Matrix> w = {Matrix::Zero(d, 3), Matrix::Zero(d, d), Matrix::Zero(d, d)};
    std::vector<Vector> b = {Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
    return MlpParams(std::move(w), std::move(b));
  }

  [[nodiscard]] const std::vector<Matrix>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<Vector>& biases() const { return biases_; }
  [[nodiscard]] bool empty() const { return weights_.empty(); }
  [[nodiscard]] Eigen::Index input_dim() const { return weights_.front().cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return weights_.back().rows(); }

  [[nodiscard]] Vector evaluate(const Vec3& p) const {
    Vector h = p;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      h = (weights_[i] * h + biases_[i]).array().tanh().matrix();
    }
    return h;
  }

 private:
  void validate() const {
    if (weights_.empty() || weights_.size() != biases_.size()) {
      throw InvalidInput("MlpParams: weights and biases must be non-empty and paired");
    }
    if (weights_.front().cols() != 3) throw InvalidInput("MlpParams: first layer must take 3 inputs");
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (biases_[i].size() != weights_[i].rows()) {
        throw InvalidInput("MlpParams: bias size does not match layer output");
      }
      if (i > 0 && weights_[i].cols() != weights_[i - 1].rows()) {
        throw InvalidInput("MlpParams: consecutive layer shapes do not chain");
      }
    }
  }

  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

inline std::vector<PosEncoding> mlp_embed(std::span<const Vec3> points, const MlpParams& params) {
  if (params.empty()) throw InvalidInput("mlp_embed: empty MLP");
  std::vector<PosEncoding> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back({params.evaluate(p), EncodingKind::kMlp});
  return out;
}

struct UmpeParams {
  int dim = 48;
  SinusoidConfig sinusoid;
  MlpParams mlp;

  static UmpeParams seeded(int dim, std::uint64_t seed, SinusoidConfig sin = {}) {
    return UmpeParams{dim, sin, MlpParams::default_for(dim, seed)};
  }

  /// Sinusoid amplitude zero and an all-zero MLP: the encoding is identically 0.
  static UmpeParams degenerate(int dim) {
    SinusoidConfig sin;
    sin.amplitude = 0.0;
    return UmpeParams{dim, sin, MlpParams::zeros(dim)};
  }
};

/// A position to encode. Image tokens carry their pixel and lifted 3D point.
struct EncodingSite {
  Modality modality = Modality::kLidar;
  std::optional<Vec2> pixel;
  std::optional<Vec3> position;

  static EncodingSite lidar(const Vec3& p) { return {Modality::kLidar, std::nullopt, p}; }
  static EncodingSite image(const Vec2& px, const Vec3& lifted) { return {Modality::kImage, px, lifted}; }
};

/// Native sinusoid, zero-padded up to `dim`.
inline Vector sinusoid_part(const EncodingSite& site, const UmpeParams& params) {
  const int d = params.dim;
  Vector out = Vector::Zero(d);
  if (site.modality == Modality::kImage) {
    if (!site.pixel) throw InvalidInput("umpe: image encoding requires the pixel coordinate");
    const int ds = d - d % 4;
    if (ds > 0) out.head(ds) = sinpe2d(site.pixel->x(), site.pixel->y(), ds, params.sinusoid).values;
  } else {
    if (!site.position) throw InvalidInput("umpe: lidar encoding requires a 3D position");
    const int ds = d - d % 6;
    const auto& p = *site.position;
    if (ds > 0) out.head(ds) = sinpe3d(p.x(), p.y(), p.z(), ds, params.sinusoid).values;
  }
  return out;
}

inline Vector mlp_part(const EncodingSite& site, const UmpeParams& params) {
  if (!site.position) {
    throw InvalidInput(site.modality == Modality::kImage
                           ? "umpe: image encoding requires the lifted 3D position"
                           : "umpe: lidar encoding requires a 3D position");
  }
  if (params.mlp.output_dim() != params.dim) {
    throw InvalidInput("umpe: MLP output dimension does not match encoding dimension");
  }
  return params.mlp.evaluate(*site.position);
}

/// Element-wise sum of the modality's sinusoid and the shared MLP embedding.
inline PosEncoding umpe(const EncodingSite& site, const UmpeParams& params) {
  if (params.dim <= 0) throw InvalidInput("umpe: dimension must be positive");
  Vector mlp = mlp_part(site, params);
  return {sinusoid_part(site, params) + mlp, EncodingKind::kComposed};
}

}  // namespace m4d::geometry

#endif  // M4D_GEOMETRY_POSENC_HPP
