#include "treepot/weights.hpp"

#include <cmath>
#include <memory>

#include "treepot/error.hpp"

namespace treepot {

namespace {
constexpr int kMaxLevel = 1 << 21;
}

WeightSequence::WeightSequence(const WeightSequence& o)
    : tail_(o.tail_), label_(o.label_), prefix_(o.prefix_), p1_(o.p1_), p2_(o.p2_), p3_(o.p3_), next_(o.next_),
      max_level_(o.max_level_) {}

WeightSequence& WeightSequence::operator=(const WeightSequence& o) {
  if (this == &o) return *this;
  std::scoped_lock lock(mutex_);
  tail_ = o.tail_;
  label_ = o.label_;
  prefix_ = o.prefix_;
  p1_ = o.p1_;
  p2_ = o.p2_;
  p3_ = o.p3_;
  next_ = o.next_;
  max_level_ = o.max_level_;
  w_.clear();
  delta_.clear();
  log_delta_.clear();
  return *this;
}

void WeightSequence::validate_prefix() {
  if (prefix_.empty() && tail_ != Tail::bounded && tail_ != Tail::gap_ratio)
    throw Error("bad_weights", "tree_matrix", "weight prefix is empty");
  for (std::size_t k = 0; k < prefix_.size(); ++k) {
    double prev = k ? prefix_[k - 1] : 0.0;
    if (!(prefix_[k] > prev))
      throw Error("bad_weights", "tree_matrix", k ? "weights must be strictly increasing" : "w_0 must be positive",
                  {{"level", std::to_string(k)}});
  }
}

WeightSequence WeightSequence::finite(std::vector<double> w) {
  WeightSequence s;
  s.tail_ = Tail::none;
  s.label_ = "finite";
  s.prefix_ = std::move(w);
  s.validate_prefix();
  s.max_level_ = static_cast<int>(s.prefix_.size()) - 1;
  return s;
}

WeightSequence WeightSequence::arithmetic(std::vector<double> prefix, double d) {
  if (!(d > 0)) throw Error("bad_weights", "tree_matrix", "arithmetic step must be positive");
  WeightSequence s;
  s.tail_ = Tail::arithmetic;
  s.label_ = "arithmetic";
  s.prefix_ = std::move(prefix);
  s.p1_ = d;
  s.validate_prefix();
  return s;
}

WeightSequence WeightSequence::geometric_gap(std::vector<double> prefix, double rho) {
  if (!(rho > 0)) throw Error("bad_weights", "tree_matrix", "gap ratio must be positive");
  WeightSequence s;
  s.tail_ = Tail::geometric_gap;
  s.label_ = "geometric-gap";
  s.prefix_ = std::move(prefix);
  s.p1_ = rho;
  s.validate_prefix();
  return s;
}

WeightSequence WeightSequence::bounded(double w_inf, double c, double rho) {
  if (!(rho > 0 && rho < 1 && c > 0 && w_inf - c > 0))
    throw Error("bad_weights", "tree_matrix", "bounded tail needs 0<rho<1, c>0 and w_0 = w_inf - c > 0");
  WeightSequence s;
  s.tail_ = Tail::bounded;
  s.label_ = "bounded";
  s.p1_ = w_inf;
  s.p2_ = c;
  s.p3_ = rho;
  return s;
}

WeightSequence WeightSequence::gap_ratio(double w0, double delta1, double a, double b) {
  if (!(w0 > 0 && delta1 > 0 && a > 0 && b > 0)) throw Error("bad_weights", "tree_matrix", "gap-ratio parameters must be positive");
  WeightSequence s;
  s.tail_ = Tail::gap_ratio;
  s.label_ = "gap-ratio";
  s.prefix_ = {w0, w0 + delta1};
  s.p1_ = a;
  s.p2_ = b;
  s.validate_prefix();
  return s;
}

WeightSequence WeightSequence::custom(std::vector<double> prefix, Recurrence next, std::string label) {
  WeightSequence s;
  s.tail_ = Tail::custom;
  s.label_ = std::move(label);
  s.prefix_ = std::move(prefix);
  s.next_ = std::move(next);
  s.validate_prefix();
  return s;
}

void WeightSequence::extend_to(int n) const {
  if (n < 0) throw Error("bad_argument", "tree_matrix", "negative level");
  if (n > max_level_)
    throw Error("depth_cap", "tree_matrix", "level beyond the weight sequence", {{"level", std::to_string(n)}});
  if (n > kMaxLevel) throw Error("depth_cap", "tree_matrix", "level too deep", {{"level", std::to_string(n)}});
  while (static_cast<int>(delta_.size()) <= n) {
    int k = static_cast<int>(delta_.size());
    double wprev = k ? w_[k - 1] : 0.0;
    double d = 0, ld = 0;
    if (tail_ == Tail::bounded) {
      // Δ_k = c ρ^{k-1}(1-ρ) for k >= 1; computed directly to avoid cancellation
      d = k == 0 ? p1_ - p2_ : p2_ * std::pow(p3_, k - 1) * (1.0 - p3_);
      ld = std::log(d);
    } else if (k < static_cast<int>(prefix_.size())) {
      d = prefix_[k] - wprev;
      ld = std::log(d);
    } else {
      double dprev = delta_[k - 1];
      switch (tail_) {
        case Tail::arithmetic: d = p1_; ld = std::log(d); break;
        case Tail::geometric_gap: ld = log_delta_[k - 1] + std::log(p1_); d = std::exp(ld); break;
        case Tail::gap_ratio:
          ld = log_delta_[k - 1] + std::log(p1_) + (k - 1) * std::log(p2_);
          d = std::exp(ld);
          break;
        case Tail::custom: d = next_(k, wprev, dprev); ld = std::log(d); break;
        default: break;
      }
    }
    if (!(d > 0) || std::isnan(d))
      throw Error("bad_weights", "tree_matrix", "weights must be strictly increasing", {{"level", std::to_string(k)}});
    delta_.push_back(d);
    log_delta_.push_back(ld);
    w_.push_back(wprev + d);
  }
}

double WeightSequence::w(int n) const {
  std::scoped_lock lock(mutex_);
  extend_to(n);
  if (tail_ == Tail::bounded) return p1_ - p2_ * std::pow(p3_, n);
  return w_[n];
}

double WeightSequence::delta(int n) const {
  std::scoped_lock lock(mutex_);
  extend_to(n);
  return delta_[n];
}

double WeightSequence::log_delta(int n) const {
  std::scoped_lock lock(mutex_);
  extend_to(n);
  return log_delta_[n];
}

double WeightSequence::limit() const {
  switch (tail_) {
    case Tail::bounded: return p1_;
    case Tail::none: return prefix_.back();
    case Tail::geometric_gap:
      if (p1_ < 1.0) {
        double last = prefix_.back();
        double dlast = prefix_.size() > 1 ? prefix_.back() - prefix_[prefix_.size() - 2] : prefix_.back();
        return last + dlast * p1_ / (1.0 - p1_);
      }
      return std::numeric_limits<double>::infinity();
    default: return std::numeric_limits<double>::infinity();
  }
}

WeightSequence WeightSequence::perturbed(int n, double value) const {
  WeightSequence s(*this);
  if (tail_ == Tail::bounded || tail_ == Tail::gap_ratio) {
    std::vector<double> pre;
    for (int k = 0; k <= n + 1; ++k) pre.push_back(w(k));
    auto base = std::make_shared<WeightSequence>(*this);
    s = custom(pre, [base](int k, double, double) { return base->delta(k); }, label_ + "+perturbed");
  }
  while (static_cast<int>(s.prefix_.size()) <= n) s.prefix_.push_back(w(static_cast<int>(s.prefix_.size())));
  // keep the original increments after n so only w_n moves
  if (s.tail_ == Tail::arithmetic || s.tail_ == Tail::geometric_gap || s.tail_ == Tail::custom) {
    while (static_cast<int>(s.prefix_.size()) <= n + 1) s.prefix_.push_back(w(static_cast<int>(s.prefix_.size())));
  }
  s.prefix_[n] = value;
  s.validate_prefix();
  return s;
}

}  // namespace treepot
