#include "stainforge/acd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stainforge/error.hpp"
#include "stainforge/parallel.hpp"
#include "stainforge/rng.hpp"

namespace stainforge::acd {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr std::size_t kChunk = 2048;
constexpr std::size_t kMinTissuePixels = 100;
constexpr std::size_t kCalmIterations = 10;
constexpr std::size_t kDecayEvery = 25;
constexpr double kDecay = 0.97;

Vec3 d_theta(double theta, double phi) {
  return {std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), -std::sin(theta)};
}

Vec3 d_phi(double theta, double phi) {
  return {-std::sin(theta) * std::sin(phi), std::sin(theta) * std::cos(phi), 0.0};
}

double condition_number(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(2) <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / sv(2);
}

void check_angle(double a, const char* name) {
  constexpr double slack = 1e-12;
  if (!(a >= -slack && a <= kHalfPi + slack)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(name) + " = " + std::to_string(a) + " outside [0, pi/2]");
  }
}

// Partial sums over one chunk of samples. The per-pixel gradient factors that
// depend on the global means are applied afterwards through sum_od.
struct Partial {
  double sum_h = 0.0;
  double sum_e = 0.0;
  double sum_d2 = 0.0;
  double sum_f = 0.0;
  Vec3 sum_od = Vec3::Zero();
  Mat3 g_local = Mat3::Zero();  // sum of (lp*f_h, lp*f_e, 2d) od^T
};

Partial accumulate(std::span<const Vec3> od, const Mat3& a, double lambda_p, bool with_gradient) {
  Partial p;
  for (const Vec3& o : od) {
    const Vec3 s = a * o;
    const double h = s(0), e = s(1), d = s(2);
    p.sum_h += h;
    p.sum_e += e;
    p.sum_d2 += d * d;
    const double den = h * h + e * e;
    if (den > 0.0) {
      p.sum_f += 2.0 * h * e / den;
    }
    if (with_gradient) {
      Vec3 g(0.0, 0.0, 2.0 * d);
      if (den > 0.0) {
        const double den2 = den * den;
        g(0) = lambda_p * 2.0 * e * (e * e - h * h) / den2;
        g(1) = lambda_p * 2.0 * h * (h * h - e * e) / den2;
      }
      p.sum_od += o;
      p.g_local.noalias() += g * o.transpose();
    }
  }
  return p;
}

Partial reduce(std::span<const Vec3> od, const Mat3& a, double lambda_p, bool with_gradient,
               std::size_t threads) {
  const std::size_t chunks = (od.size() + kChunk - 1) / kChunk;
  std::vector<Partial> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t len = std::min(kChunk, od.size() - begin);
    parts[c] = accumulate(od.subspan(begin, len), a, lambda_p, with_gradient);
  });
  // Fixed combination order keeps results independent of the thread count.
  Partial total;
  for (const Partial& p : parts) {
    total.sum_h += p.sum_h;
    total.sum_e += p.sum_e;
    total.sum_d2 += p.sum_d2;
    total.sum_f += p.sum_f;
    total.sum_od += p.sum_od;
    total.g_local += p.g_local;
  }
  return total;
}

ObjectiveBreakdown combine(double mean_h, double mean_e, double mean_d2, double mean_f,
                           const AcdHyperparams& hp) {
  ObjectiveBreakdown out;
  out.lp = mean_d2 + hp.lambda_p * mean_f;
  const double balance = (1.0 - hp.eta) * mean_h - hp.eta * mean_e;
  out.lb = balance * balance;
  const double intensity = hp.gamma - (mean_h + mean_e);
  out.le = intensity * intensity;
  out.total = out.lp + hp.lambda_b * out.lb + hp.lambda_e * out.le;
  return out;
}

AcdParams project(AcdParams p) {
  p.theta_h = std::clamp(p.theta_h, 0.0, kHalfPi);
  p.phi_h = std::clamp(p.phi_h, 0.0, kHalfPi);
  p.theta_e = std::clamp(p.theta_e, 0.0, kHalfPi);
  p.phi_e = std::clamp(p.phi_e, 0.0, kHalfPi);
  p.log_wh = std::clamp(p.log_wh, std::log(kMinWeight), std::log(kMaxWeight));
  p.log_we = std::clamp(p.log_we, std::log(kMinWeight), std::log(kMaxWeight));
  return p;
}

}  // namespace

Vec3 unit_vector(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

double angle_between_deg(const Vec3& a, const Vec3& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

std::array<double, 6> AcdParams::to_array() const {
  return {theta_h, phi_h, theta_e, phi_e, log_wh, log_we};
}

AcdParams AcdParams::from_array(const std::array<double, 6>& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5]};
}

AcdParams AcdParams::from_vectors(const Vec3& h, const Vec3& e, double wh, double we) {
  if (h.minCoeff() < 0.0 || e.minCoeff() < 0.0 || h.norm() == 0.0 || e.norm() == 0.0) {
    throw Error(ErrorCode::InvalidArgument, "stain vectors must be nonzero and nonnegative");
  }
  if (!(wh > 0.0) || !(we > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "stain weights must be > 0");
  }
  const Vec3 hu = h.normalized();
  const Vec3 eu = e.normalized();
  AcdParams p;
  p.theta_h = std::acos(std::clamp(hu(2), -1.0, 1.0));
  p.phi_h = std::atan2(hu(1), hu(0));
  p.theta_e = std::acos(std::clamp(eu(2), -1.0, 1.0));
  p.phi_e = std::atan2(eu(1), eu(0));
  p.log_wh = std::log(wh);
  p.log_we = std::log(we);
  return p;
}

AcdParams ruifrok_init() {
  return AcdParams::from_vectors(Vec3(0.65, 0.70, 0.29), Vec3(0.07, 0.99, 0.11));
}

Mat3 StainProfile::separation_matrix() const {
  const double cond = condition_number(sca);
  if (!(cond < kMaxConditionNumber)) {
    throw Error(ErrorCode::SingularMatrix,
                "SCA matrix condition number " + std::to_string(cond) + " exceeds guard");
  }
  Mat3 d = sca.inverse();
  d.row(0) *= wh;
  d.row(1) *= we;
  return d;
}

Mat3 StainProfile::reconstruction_matrix() const {
  Mat3 m = sca;
  m.col(0) /= wh;
  m.col(1) /= we;
  return m;
}

void StainProfile::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (std::abs(sca.col(c).norm() - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidArgument, "SCA column " + std::to_string(c) + " is not unit norm");
    }
  }
  if (sca.leftCols<2>().minCoeff() < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "H/E stain vectors must be nonnegative");
  }
  if (!(condition_number(sca) < kMaxConditionNumber)) {
    throw Error(ErrorCode::InvalidArgument, "SCA matrix is not safely invertible");
  }
  for (double w : {wh, we}) {
    if (!(w >= kMinWeight && w <= kMaxWeight)) {
      throw Error(ErrorCode::InvalidArgument,
                  "stain weight " + std::to_string(w) + " outside [0.05, 20]");
    }
  }
}

void AcdHyperparams::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(lambda_p >= 0.0) || !(lambda_b >= 0.0) || !(lambda_e >= 0.0)) bad("lambda weights must be >= 0");
  if (!(eta > 0.0 && eta < 1.0)) bad("eta must lie strictly inside (0, 1)");
  if (!(gamma > 0.0)) bad("gamma must be > 0");
  if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
  if (!(tol > 0.0)) bad("tol must be > 0");
  if (sample_n < 100) bad("sample_n must be >= 100");
  if (!(tissue_threshold >= 0.0)) bad("tissue_threshold must be >= 0");
}

StainProfile build_matrix(const AcdParams& params) {
  check_angle(params.theta_h, "theta_h");
  check_angle(params.phi_h, "phi_h");
  check_angle(params.theta_e, "theta_e");
  check_angle(params.phi_e, "phi_e");
  const Vec3 h = unit_vector(params.theta_h, params.phi_h);
  const Vec3 e = unit_vector(params.theta_e, params.phi_e);
  const double sep = angle_between_deg(h, e);
  if (!(sep >= kMinStainSeparationDeg)) {
    throw Error(ErrorCode::DegenerateStains,
                "H and E stain vectors are " + std::to_string(sep) + " degrees apart");
  }
  StainProfile p;
  p.sca.col(0) = h;
  p.sca.col(1) = e;
  p.sca.col(2) = h.cross(e).normalized();
  p.wh = std::exp(params.log_wh);
  p.we = std::exp(params.log_we);
  return p;
}

StainDensityMap separate(const OdImage& od, const StainProfile& profile) {
  const Mat3 a = profile.separation_matrix();
  StainDensityMap out(od.width(), od.height());
  auto src = od.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < od.pixel_count(); ++i) {
    const Vec3 s = a * Vec3(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
    dst[3 * i] = s(0);
    dst[3 * i + 1] = s(1);
    dst[3 * i + 2] = s(2);
  }
  return out;
}

double saturation(double h, double e) {
  const double den = h * h + e * e;
  return den > 0.0 ? 2.0 * h * e / den : 0.0;
}

ObjectiveBreakdown objective(std::span<const Vec3> densities, const AcdHyperparams& hp) {
  if (densities.empty()) throw Error(ErrorCode::EmptySample, "objective needs at least one pixel");
  double sh = 0.0, se = 0.0, sd2 = 0.0, sf = 0.0;
  for (const Vec3& s : densities) {
    sh += s(0);
    se += s(1);
    sd2 += s(2) * s(2);
    sf += saturation(s(0), s(1));
  }
  const double n = static_cast<double>(densities.size());
  return combine(sh / n, se / n, sd2 / n, sf / n, hp);
}

Evaluation evaluate(std::span<const Vec3> od_samples, const AcdParams& params,
                    const AcdHyperparams& hp) {
  if (od_samples.empty()) throw Error(ErrorCode::EmptySample, "objective needs at least one pixel");
  const StainProfile profile = build_matrix(params);
  const Mat3 d = profile.sca.inverse();
  const Mat3 a = profile.separation_matrix();
  const Partial p = reduce(od_samples, a, hp.lambda_p, true, hp.threads);

  const double n = static_cast<double>(od_samples.size());
  const double mean_h = p.sum_h / n;
  const double mean_e = p.sum_e / n;
  Evaluation ev;
  ev.value = combine(mean_h, mean_e, p.sum_d2 / n, p.sum_f / n, hp);

  // dL/dA, A = W D, accumulated as sum_k (dL/ds_k) od_k^T.
  const double balance = (1.0 - hp.eta) * mean_h - hp.eta * mean_e;
  const double intensity = hp.gamma - (mean_h + mean_e);
  const double ch = 2.0 * hp.lambda_b * balance * (1.0 - hp.eta) - 2.0 * hp.lambda_e * intensity;
  const double ce = -2.0 * hp.lambda_b * balance * hp.eta - 2.0 * hp.lambda_e * intensity;
  Mat3 g = p.g_local;
  g.row(0) += ch * p.sum_od.transpose();
  g.row(1) += ce * p.sum_od.transpose();
  g /= n;

  // Weights scale rows of A.
  ev.gradient[4] = g.row(0).dot(a.row(0));
  ev.gradient[5] = g.row(1).dot(a.row(1));

  // dA = -A dM D, so dL/dM = -A^T G D^T.
  const Mat3 dm = -(a.transpose() * g * d.transpose());
  const Vec3 h = profile.hematoxylin();
  const Vec3 e = profile.eosin();
  const Vec3 r = profile.residual();
  const Vec3 c = h.cross(e);
  const Mat3 dr_dc = (Mat3::Identity() - r * r.transpose()) / c.norm();

  const Vec3 dh[2] = {d_theta(params.theta_h, params.phi_h), d_phi(params.theta_h, params.phi_h)};
  const Vec3 de[2] = {d_theta(params.theta_e, params.phi_e), d_phi(params.theta_e, params.phi_e)};
  for (int k = 0; k < 2; ++k) {
    const Vec3 dr_h = dr_dc * dh[k].cross(e);
    ev.gradient[k] = dm.col(0).dot(dh[k]) + dm.col(2).dot(dr_h);
    const Vec3 dr_e = dr_dc * h.cross(de[k]);
    ev.gradient[2 + k] = dm.col(1).dot(de[k]) + dm.col(2).dot(dr_e);
  }
  return ev;
}

Gradient gradient(std::span<const Vec3> od_samples, const AcdParams& params,
                  const AcdHyperparams& hp) {
  return evaluate(od_samples, params, hp).gradient;
}

std::vector<Vec3> sample_tissue(const OdImage& od, const TissueMask& mask, const AcdHyperparams& hp) {
  if (mask.size() != od.pixel_count()) {
    throw Error(ErrorCode::InvalidArgument, "tissue mask does not match image dimensions");
  }
  const std::vector<std::size_t> tissue = mask.indices();
  if (tissue.size() < kMinTissuePixels) {
    throw Error(ErrorCode::InsufficientTissue,
                "only " + std::to_string(tissue.size()) + " tissue pixels (need >= 100)");
  }
  SplitMix64 rng(hp.seed);
  std::vector<std::size_t> picks;
  if (tissue.size() >= hp.sample_n) {
    picks = rng.sample_indices(tissue.size(), hp.sample_n);
  } else {
    picks.resize(hp.sample_n);
    for (auto& p : picks) p = static_cast<std::size_t>(rng.below(tissue.size()));
  }
  std::vector<Vec3> out;
  out.reserve(picks.size());
  auto d = od.data();
  for (std::size_t p : picks) {
    const std::size_t i = tissue[p];
    out.emplace_back(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
  }
  return out;
}

AcdParams balance_weights(std::span<const Vec3> od_samples, const AcdParams& init,
                          const AcdHyperparams& hp) {
  AcdParams unit = init;
  unit.log_wh = 0.0;
  unit.log_we = 0.0;
  const Mat3 d = build_matrix(unit).sca.inverse();
  double sh = 0.0, se = 0.0;
  for (const Vec3& o : od_samples) {
    const Vec3 s = d * o;
    sh += s(0);
    se += s(1);
  }
  const double n = static_cast<double>(od_samples.size());
  AcdParams out = init;
  // Targets solve (1 - eta) mh = eta me and mh + me = gamma.
  if (n > 0.0 && sh > 0.0 && se > 0.0) {
    out.log_wh = std::log(hp.gamma * hp.eta / (sh / n));
    out.log_we = std::log(hp.gamma * (1.0 - hp.eta) / (se / n));
  }
  return project(out);
}

FitResult fit_samples(std::span<const Vec3> od_samples, const AcdHyperparams& hp,
                      const AcdParams& init) {
  hp.validate();
  if (od_samples.empty()) throw Error(ErrorCode::EmptySample, "no pixels to fit");
  AcdParams params = hp.weight_init == WeightInit::Balanced ? balance_weights(od_samples, init, hp)
                                                            : project(init);
  FitResult result;
  result.trace.reserve(hp.max_iters);
  double best = std::numeric_limits<double>::infinity();
  AcdParams best_params = params;
  std::size_t calm = 0;
  for (std::size_t it = 0; it < hp.max_iters; ++it) {
    const Evaluation ev = evaluate(od_samples, params, hp);
    if (!std::isfinite(ev.value.total)) {
      throw Error(ErrorCode::DegenerateStains, "objective became non-finite at iteration " +
                                                   std::to_string(it));
    }
    if (!result.trace.empty() && std::abs(ev.value.total - result.trace.back().total) < hp.tol) {
      ++calm;
    } else {
      calm = 0;
    }
    result.trace.push_back(ev.value);
    if (ev.value.total < best) {
      best = ev.value.total;
      best_params = params;
      result.best_iteration = it;
    }
    if (calm >= kCalmIterations) break;

    const double step = hp.learning_rate * std::pow(kDecay, static_cast<double>(it / kDecayEvery));
    auto x = params.to_array();
    for (std::size_t k = 0; k < x.size(); ++k) x[k] -= step * ev.gradient[k];
    params = project(AcdParams::from_array(x));
  }
  result.params = best_params;
  result.profile = build_matrix(best_params);
  return result;
}

FitResult fit(const OdImage& od, const TissueMask& mask, const AcdHyperparams& hp,
              const AcdParams& init) {
  hp.validate();
  const std::vector<Vec3> samples = sample_tissue(od, mask, hp);
  return fit_samples(samples, hp, init);
}

}  // namespace stainforge::acd
