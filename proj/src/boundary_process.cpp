#include "treepot/boundary_process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "treepot/error.hpp"

namespace treepot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Path prefix(const Path& p, int n) { return Path(p.begin(), p.begin() + n); }

// e^{-a t} - e^{-b t} for a <= b, without cancellation for small t
double exp_gap(double a, double b, double t) { return -std::exp(-a * t) * std::expm1(-(b - a) * t); }

int meet_level(const Path& xi, const Path& eta) {
  const int m = common_prefix(xi, eta);
  if (m >= static_cast<int>(std::min(xi.size(), eta.size())))
    throw Error("resolution", "boundary_process", "rays not separated at their resolution",
                {{"xi", path_string(xi)}, {"eta", path_string(eta)}});
  return m;
}

}  // namespace

BoundaryKernel::BoundaryKernel(ExitMeasure mu) : mu_(std::move(mu)) {}

double BoundaryKernel::G(const Path& ray, int n) const {
  if (n == 0 && mode() == RootMode::reflected) return kInf;
  std::string key = std::to_string(n) + "#" + path_string(prefix(ray, std::max(0, n - 1)));
  {
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    auto it = g_cache_.find(key);
    if (it != g_cache_.end()) return it->second;
  }
  double g = treepot::G(mu_, ray, n);
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  g_cache_.emplace(key, g);
  return g;
}

double BoundaryKernel::inv_G(const Path& ray, int n) const {
  if (n == 0 && mode() == RootMode::reflected) return 0.0;
  return 1.0 / G(ray, n);
}

double BoundaryKernel::mass(const Path& p) const {
  std::string key = path_string(p);
  {
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    auto it = m_cache_.find(key);
    if (it != m_cache_.end()) return it->second;
  }
  double m = mu_.mass(p);
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  m_cache_.emplace(key, m);
  return m;
}

double kernel_p(const BoundaryKernel& bk, double t, const Path& xi, const Path& eta) {
  if (!(t > 0.0)) throw Error("bad_argument", "boundary_process", "kernel needs t > 0");
  const int m = meet_level(xi, eta);
  double s = 0.0;
  for (int n = 0; n <= m; ++n) {
    const double mass = bk.mass(prefix(xi, n));
    if (mass <= 0.0)
      throw Error("zero_mass", "boundary_process", "zero-mass cylinder on the ray", {{"atom", path_string(prefix(xi, n))}});
    s += exp_gap(bk.inv_G(xi, n), bk.inv_G(xi, n + 1), t) / mass;
  }
  return s;
}

double green_integral(const BoundaryKernel& bk, const Path& xi, const Path& eta) {
  if (bk.mode() == RootMode::reflected)
    throw Error("bad_argument", "boundary_process", "the conservative process has no finite Green kernel");
  const int m = meet_level(xi, eta);
  double s = 0.0;
  for (int n = 0; n <= m; ++n) s += (bk.G(xi, n) - bk.G(xi, n + 1)) / bk.mass(prefix(xi, n));
  return s;
}

double green_quadrature(const BoundaryKernel& bk, const Path& xi, const Path& eta, int points) {
  if (bk.mode() == RootMode::reflected)
    throw Error("bad_argument", "boundary_process", "the conservative process has no finite Green kernel");
  const int m = meet_level(xi, eta);
  if (points < 3) points = 3;
  if (points % 2 == 0) ++points;
  // t = e^u, Simpson in u; the range covers e^{-60} decay and the linear onset
  const double lo = std::log(1e-14 * bk.G(xi, m + 1));
  const double hi = std::log(60.0 * bk.G(xi, 0));
  const double h = (hi - lo) / (points - 1);
  double s = 0.0;
  for (int k = 0; k < points; ++k) {
    const double u = lo + k * h;
    const double t = std::exp(u);
    const double c = (k == 0 || k == points - 1) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    s += c * kernel_p(bk, t, xi, eta) * t;
  }
  return s * h / 3.0;
}

double green_identity_residual(const BoundaryKernel& bk, const Path& xi, const Path& eta) {
  const int m = meet_level(xi, eta);
  return std::abs(green_integral(bk, xi, eta) - bk.measure().weights().w(m));
}

SimpleFn semigroup_apply(const BoundaryKernel& bk, double t, const SimpleFn& f) {
  if (t < 0.0) throw Error("bad_argument", "boundary_process", "negative time");
  const ExitMeasure& mu = bk.measure();
  const int N = f.level;
  SimpleFn out{N, {}};
  for (auto& b : mu.atoms(N)) {
    double prev = 0.0, s = 0.0;
    for (int n = 0; n <= N; ++n) {
      double e = conditional_expectation(mu, f, prefix(b, n));
      s += std::exp(-t * bk.inv_G(b, n)) * (e - prev);
      prev = e;
    }
    out.values[b] = s;
  }
  return out;
}

double within_cylinder_integral(const BoundaryKernel& bk, double t, const Path& xi, int N) {
  const double mN = bk.mass(prefix(xi, N));
  double s = std::exp(-t * bk.inv_G(xi, N));
  for (int n = 0; n < N; ++n) s += exp_gap(bk.inv_G(xi, n), bk.inv_G(xi, n + 1), t) * mN / bk.mass(prefix(xi, n));
  return s;
}

SimpleFn semigroup_apply_kernel(const BoundaryKernel& bk, double t, const SimpleFn& f) {
  const ExitMeasure& mu = bk.measure();
  const int N = f.level;
  auto atoms = mu.atoms(N);
  SimpleFn out{N, {}};
  for (auto& b : atoms) {
    double s = f.at(b) * within_cylinder_integral(bk, t, b, N);
    for (auto& a : atoms) {
      if (a == b) continue;
      double fa = f.at(a);
      if (fa != 0.0) s += kernel_p(bk, t, b, a) * fa * bk.mass(a);
    }
    out.values[b] = s;
  }
  return out;
}

double exit_rate(const BoundaryKernel& bk, int n, const Path& ray) {
  if (n < 0 || n > static_cast<int>(ray.size()))
    throw Error("resolution", "boundary_process", "ray resolution below the exit level");
  double s = bk.inv_G(ray, 0);
  double prev = 1.0;
  for (int k = 1; k <= n; ++k) {
    double m = bk.mass(prefix(ray, k));
    if (m <= 0.0) throw Error("zero_mass", "boundary_process", "zero-mass cylinder", {{"atom", path_string(prefix(ray, k))}});
    s += bk.inv_G(ray, k) * (1.0 / m - 1.0 / prev);
    prev = m;
  }
  return prev * s;
}

double restricted_kernel_residual(const BoundaryKernel& bk, double t, const Path& xi, const Path& eta) {
  if (xi.empty() || eta.empty() || xi[0] != eta[0])
    throw Error("bad_argument", "boundary_process", "both rays must lie in one first-level cylinder");
  const int m = meet_level(xi, eta);
  const double m1 = bk.mass(prefix(xi, 1));
  // kernel of the process on C¹: shifted G and measure conditioned on C¹
  double bar = 0.0;
  for (int n = 0; n <= m - 1; ++n)
    bar += exp_gap(bk.inv_G(xi, n + 1), bk.inv_G(xi, n + 2), t) / (bk.mass(prefix(xi, n + 1)) / m1);
  double rhs = m1 * (kernel_p(bk, t, xi, eta) - exp_gap(bk.inv_G(xi, 0), bk.inv_G(xi, 1), t));
  return std::abs(bar - rhs);
}

ExpSplit exp_split(double gamma0, double lambda0, double lambda1, Rng& rng) {
  if (!(lambda0 > 0.0) || !(lambda0 < lambda1))
    throw Error("bad_argument", "boundary_process", "need 0 < lambda0 < lambda1");
  ExpSplit s;
  const double z1 = rng.exponential(lambda1 - lambda0);
  if (z1 < gamma0) {
    s.theta1 = z1;
    s.b = true;
    s.theta0 = gamma0 - z1;
  } else {
    s.theta1 = gamma0;
    s.b = false;
    s.theta0 = rng.exponential(lambda0);
  }
  return s;
}

double exp_merge(const ExpSplit& s) { return s.b ? s.theta1 + s.theta0 : s.theta1; }

const char* to_string(BoundaryPath::Status s) { return s == BoundaryPath::Status::killed ? "killed" : "horizon"; }

const Path* BoundaryPath::at(double t) const {
  if (t < 0.0 || t >= end_time || times.empty()) return nullptr;
  auto it = std::upper_bound(times.begin(), times.end(), t);
  return &rays[(it - times.begin()) - 1];
}

double BoundaryPath::exit_time(int n) const {
  const Path& r0 = rays.front();
  for (std::size_t k = 1; k < rays.size(); ++k)
    if (common_prefix(rays[k], r0) < n) return times[k];
  return status == Status::killed ? end_time : kInf;
}

BoundarySimulator::BoundarySimulator(const BoundaryKernel& bk, int resolution) : bk_(bk), N_(resolution) {
  if (N_ < 1) throw Error("bad_argument", "boundary_process", "resolution must be at least 1");
  if (N_ >= bk.measure().analysis().depth())
    throw Error("resolution", "boundary_process", "resolution beyond the certified depth",
                {{"resolution", std::to_string(N_)}, {"depth", std::to_string(bk.measure().analysis().depth())}});
}

Path BoundarySimulator::sample_below(const Path& p, Rng& rng) const {
  const ChainAnalysis& a = bk_.measure().analysis();
  Path out = p;
  int type = path_type(a.spec(), p);
  for (int l = static_cast<int>(p.size()); l < N_; ++l) {
    std::uint64_t c = a.sample_child(type, l, rng);
    type = a.child_type(type, l, c);
    out.push_back(static_cast<std::uint32_t>(c));
  }
  return out;
}

BoundaryPath BoundarySimulator::run(const Path& start, double horizon, std::uint64_t seed, std::uint64_t index) const {
  Rng rng(seed, index);
  BoundaryPath bp;
  bp.seed = seed;
  bp.index = index;
  Path ray = static_cast<int>(start.size()) >= N_ ? prefix(start, N_) : sample_below(start, rng);
  double t = 0.0;
  bp.times.push_back(0.0);
  bp.rays.push_back(ray);
  for (;;) {
    // the level-N process stays in its cylinder for its whole lifetime
    const double hold = rng.exponential(bk_.inv_G(ray, N_));
    if (t + hold >= horizon) {
      bp.status = BoundaryPath::Status::horizon;
      bp.end_time = horizon;
      return bp;
    }
    t += hold;
    bool restarted = false;
    for (int k = N_; k >= 1; --k) {
      // the level-(k-1) process survives the death of level k with probability 1 - G_k/G_{k-1}
      const double p = 1.0 - bk_.inv_G(ray, k - 1) / bk_.inv_G(ray, k);
      if (rng.bernoulli(p)) {
        ray = sample_below(prefix(ray, k - 1), rng);
        if (k == 1) ++bp.renewals;
        bp.times.push_back(t);
        bp.rays.push_back(ray);
        restarted = true;
        break;
      }
    }
    if (!restarted) {
      bp.status = BoundaryPath::Status::killed;
      bp.end_time = t;
      return bp;
    }
  }
}

BoundaryPath simulate_boundary(const BoundaryKernel& bk, const Path& start, int resolution, double horizon,
                               std::uint64_t seed, std::uint64_t index) {
  if (bk.mode() != RootMode::absorbed)
    throw Error("bad_argument", "boundary_process", "use the reflected simulator for a reflected kernel");
  if (!(horizon > 0.0)) throw Error("bad_argument", "boundary_process", "horizon must be positive");
  return BoundarySimulator(bk, resolution).run(start, horizon, seed, index);
}

BoundaryPath simulate_boundary_reflected(const BoundaryKernel& bk, const Path& start, int resolution, double horizon,
                                         std::uint64_t seed, std::uint64_t index) {
  if (bk.mode() != RootMode::reflected)
    throw Error("bad_argument", "boundary_process", "reflected simulation needs a reflected kernel");
  if (!(horizon > 0.0) || std::isinf(horizon))
    throw Error("bad_argument", "boundary_process", "reflected simulation needs a finite positive horizon");
  return BoundarySimulator(bk, resolution).run(start, horizon, seed, index);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw Error("bad_argument", "boundary_process", "no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  return d;
}

double ks_critical(std::size_t n, double alpha) {
  double c;
  if (alpha >= 0.1)
    c = 1.224;
  else if (alpha >= 0.05)
    c = 1.358;
  else if (alpha >= 0.01)
    c = 1.628;
  else
    c = 1.949;
  return c / std::sqrt(static_cast<double>(n));
}

}  // namespace treepot
