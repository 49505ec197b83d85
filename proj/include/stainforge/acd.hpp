#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stainforge/image.hpp"

// Adaptive color deconvolution: a per-image stain model (SCA matrix plus
// hematoxylin/eosin weights) fitted by gradient descent on a separation
// objective, and the stain separation it defines.

namespace stainforge::acd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kMinWeight = 0.05;
inline constexpr double kMaxWeight = 20.0;
inline constexpr double kMaxConditionNumber = 1e6;
inline constexpr double kMinStainSeparationDeg = 3.0;

/// Stain color appearance model of one image. Columns of `sca` are the unit
/// OD vectors of hematoxylin, eosin and the residual channel.
struct StainProfile {
  Mat3 sca = Mat3::Identity();
  double wh = 1.0;
  double we = 1.0;

  Vec3 hematoxylin() const { return sca.col(0); }
  Vec3 eosin() const { return sca.col(1); }
  Vec3 residual() const { return sca.col(2); }

  /// diag(wh, we, 1) * sca^-1. Throws SingularMatrix past the condition guard.
  Mat3 separation_matrix() const;
  /// sca * diag(1/wh, 1/we, 1), the algebraic inverse of separation_matrix().
  Mat3 reconstruction_matrix() const;

  /// Throws InvalidArgument naming the first violated invariant.
  void validate() const;

  friend bool operator==(const StainProfile& a, const StainProfile& b) {
    return a.sca == b.sca && a.wh == b.wh && a.we == b.we;
  }
};

/// Unconstrained-ish parameterization: spherical angles of the H and E unit
/// vectors (nonnegative octant) and log stain weights.
struct AcdParams {
  double theta_h = 0.0;
  double phi_h = 0.0;
  double theta_e = 0.0;
  double phi_e = 0.0;
  double log_wh = 0.0;
  double log_we = 0.0;

  std::array<double, 6> to_array() const;
  static AcdParams from_array(const std::array<double, 6>& a);
  /// Angles of the given (not necessarily normalized) nonnegative vectors.
  static AcdParams from_vectors(const Vec3& h, const Vec3& e, double wh = 1.0, double we = 1.0);

  friend bool operator==(const AcdParams&, const AcdParams&) = default;
};

/// Standard Ruifrok H&E directions with unit weights.
AcdParams ruifrok_init();

/// (sin t cos p, sin t sin p, cos t)
Vec3 unit_vector(double theta, double phi);

enum class WeightInit {
  Balanced,  // rescale the initial weights so the balance and intensity terms start at zero
  Given,     // use the init weights unchanged
};

struct AcdHyperparams {
  double lambda_p = 0.001;
  double lambda_b = 10.0;
  double lambda_e = 1.0;
  double eta = 0.6;
  double gamma = 0.3;
  double learning_rate = 0.05;
  std::size_t max_iters = 300;
  double tol = 1e-7;
  std::size_t sample_n = 10000;
  std::uint64_t seed = 0;
  WeightInit weight_init = WeightInit::Balanced;
  double tissue_threshold = 0.15;
  // Worker threads for the objective reduction. Results do not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

struct ObjectiveBreakdown {
  double lp = 0.0;
  double lb = 0.0;
  double le = 0.0;
  double total = 0.0;
};

using Gradient = std::array<double, 6>;

struct Evaluation {
  ObjectiveBreakdown value;
  Gradient gradient{};
};

/// Builds the SCA matrix; residual column is the unit cross product of H and E.
/// Throws DegenerateStains when H and E are closer than 3 degrees.
StainProfile build_matrix(const AcdParams& params);

/// s = diag(wh, we, 1) * sca^-1 * od per pixel.
StainDensityMap separate(const OdImage& od, const StainProfile& profile);

/// Saturation term 2he / (h^2 + e^2), defined as 0 at h = e = 0.
double saturation(double h, double e);

/// Objective on already-separated densities. Throws EmptySample if empty.
ObjectiveBreakdown objective(std::span<const Vec3> densities, const AcdHyperparams& hp);

/// Objective and its analytic gradient with respect to the six AcdParams
/// scalars, evaluated on OD samples.
Evaluation evaluate(std::span<const Vec3> od_samples, const AcdParams& params,
                    const AcdHyperparams& hp);

Gradient gradient(std::span<const Vec3> od_samples, const AcdParams& params,
                  const AcdHyperparams& hp);

/// Seeded draw of hp.sample_n tissue OD vectors: without replacement when the
/// mask has enough pixels, with replacement otherwise. Throws
/// InsufficientTissue below 100 tissue pixels.
std::vector<Vec3> sample_tissue(const OdImage& od, const TissueMask& mask, const AcdHyperparams& hp);

/// Weights that zero the balance and intensity terms at the init directions.
AcdParams balance_weights(std::span<const Vec3> od_samples, const AcdParams& init,
                          const AcdHyperparams& hp);

struct FitResult {
  StainProfile profile;
  AcdParams params;
  std::vector<ObjectiveBreakdown> trace;
  std::size_t best_iteration = 0;
};

FitResult fit(const OdImage& od, const TissueMask& mask, const AcdHyperparams& hp,
              const AcdParams& init = ruifrok_init());

/// Same descent on a prepared sample set.
FitResult fit_samples(std::span<const Vec3> od_samples, const AcdHyperparams& hp,
                      const AcdParams& init = ruifrok_init());

double angle_between_deg(const Vec3& a, const Vec3& b);

}  // namespace stainforge::acd
