#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "treepot/boundary_measure.hpp"
#include "treepot/rng.hpp"

namespace treepot {

// Jump process on the boundary. Reflected mode is the conservative process:
// 1/G₀ is taken as 0 throughout. Thread-safe.
class BoundaryKernel {
 public:
  explicit BoundaryKernel(ExitMeasure mu);

  const ExitMeasure& measure() const { return mu_; }
  RootMode mode() const { return mu_.mode(); }
  // G_n on the ray; +inf for n = 0 in reflected mode
  double G(const Path& ray, int n) const;
  // 1/G_n, exactly 0 for the reflected n = 0 term
  double inv_G(const Path& ray, int n) const;
  double mass(const Path& prefix) const;

 private:
  ExitMeasure mu_;
  std::shared_ptr<std::mutex> cache_mutex_ = std::make_shared<std::mutex>();
  mutable std::unordered_map<std::string, double> g_cache_;
  mutable std::unordered_map<std::string, double> m_cache_;
};

// p(t, ξ, η); needs both rays resolved past |ξ∧η|
double kernel_p(const BoundaryKernel& bk, double t, const Path& xi, const Path& eta);
// Σ (G_n - G_{n+1})/μ(Cⁿ), the exact time integral of the kernel
double green_integral(const BoundaryKernel& bk, const Path& xi, const Path& eta);
// the same integral by quadrature in log time
double green_quadrature(const BoundaryKernel& bk, const Path& xi, const Path& eta, int points = 20001);
double green_identity_residual(const BoundaryKernel& bk, const Path& xi, const Path& eta);

// P_t f through martingale differences
SimpleFn semigroup_apply(const BoundaryKernel& bk, double t, const SimpleFn& f);
// P_t f through the kernel: off-atom kernel values plus the within-atom integral
SimpleFn semigroup_apply_kernel(const BoundaryKernel& bk, double t, const SimpleFn& f);
// ∫_{C^N(ξ)} p(t, ξ, η) μ(dη) with N = |prefix of ξ| used
double within_cylinder_integral(const BoundaryKernel& bk, double t, const Path& xi, int N);

// rate of leaving Cⁿ(ray)
double exit_rate(const BoundaryKernel& bk, int n, const Path& ray);

// kernel restricted below the first-level cylinder of ξ against μ(C¹)(p - (e^{-t/G₀} - e^{-t/G₁}))
double restricted_kernel_residual(const BoundaryKernel& bk, double t, const Path& xi, const Path& eta);

struct ExpSplit {
  double theta1 = 0.0;
  double theta0 = 0.0;
  bool b = false;
};
// Γ₀ ~ exp(λ₀) split into Θ₁ ~ exp(λ₁), B ~ Ber(1 - λ₀/λ₁) and Θ₀ ~ exp(λ₀)
ExpSplit exp_split(double gamma0, double lambda0, double lambda1, Rng& rng);
double exp_merge(const ExpSplit& s);

struct BoundaryPath {
  enum class Status { killed, horizon } status = Status::horizon;
  std::vector<double> times;  // segment start times, strictly increasing
  std::vector<Path> rays;     // ray at the simulation resolution per segment
  double end_time = 0.0;      // killing time or horizon
  std::uint64_t renewals = 0;  // restarts from μ (level-0 events)
  std::uint64_t seed = 0;
  std::uint64_t index = 0;

  // ray at time t, or nullptr after the end
  const Path* at(double t) const;
  // first time the path is outside the level-n cylinder of its start ray (or is killed)
  double exit_time(int n) const;
};
const char* to_string(BoundaryPath::Status s);

// Cascade sampler at cylinder resolution N. `start` is extended to resolution N
// by sampling from μ below it; an empty start therefore samples the start from μ.
class BoundarySimulator {
 public:
  BoundarySimulator(const BoundaryKernel& bk, int resolution);
  BoundaryPath run(const Path& start, double horizon, std::uint64_t seed, std::uint64_t index) const;
  // ray below `prefix`, sampled from μ(·|C(prefix)) down to the resolution
  Path sample_below(const Path& prefix, Rng& rng) const;
  int resolution() const { return N_; }

 private:
  const BoundaryKernel& bk_;
  int N_;
};

BoundaryPath simulate_boundary(const BoundaryKernel& bk, const Path& start, int resolution, double horizon,
                               std::uint64_t seed, std::uint64_t index = 0);
// reflected variant: needs a reflected kernel and a finite horizon
BoundaryPath simulate_boundary_reflected(const BoundaryKernel& bk, const Path& start, int resolution, double horizon,
                                         std::uint64_t seed, std::uint64_t index = 0);

// Kolmogorov-Smirnov statistic of the samples against a continuous cdf
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
// asymptotic critical value at level alpha ∈ {0.1, 0.05, 0.01, 0.001}
double ks_critical(std::size_t n, double alpha = 0.01);

}  // namespace treepot
