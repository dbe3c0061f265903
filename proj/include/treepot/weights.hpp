#pragma once

#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <vector>

namespace treepot {

// Strictly increasing positive level function w_0 < w_1 < ...
// The increments Δ_k = w_k - w_{k-1} (with w_{-1} = 0) are the primary data.
class WeightSequence {
 public:
  enum class Tail { none, arithmetic, geometric_gap, bounded, gap_ratio, custom };
  // Δ_n from the previous increment; n >= prefix length
  using Recurrence = std::function<double(int n, double w_prev, double delta_prev)>;

  // only levels 0..w.size()-1 exist
  static WeightSequence finite(std::vector<double> w);
  // w_{n+1} = w_n + d beyond the prefix
  static WeightSequence arithmetic(std::vector<double> prefix, double d);
  // Δ_{n+1} = ρ Δ_n beyond the prefix
  static WeightSequence geometric_gap(std::vector<double> prefix, double rho);
  // w_n = w_inf - c ρ^n for every n
  static WeightSequence bounded(double w_inf, double c, double rho);
  // w_0 given, Δ_1 given, Δ_{n+1} = a b^n Δ_n
  static WeightSequence gap_ratio(double w0, double delta1, double a, double b);
  static WeightSequence custom(std::vector<double> prefix, Recurrence next, std::string label = "custom");

  WeightSequence(const WeightSequence& o);
  WeightSequence& operator=(const WeightSequence& o);

  double w(int n) const;
  double delta(int n) const;
  double log_delta(int n) const;
  // largest valid level; INT_MAX for infinite sequences
  int max_level() const { return max_level_; }
  bool is_bounded() const { return tail_ == Tail::bounded || tail_ == Tail::none; }
  // lim w_n; +inf for unbounded tails
  double limit() const;
  Tail tail() const { return tail_; }
  const std::string& label() const { return label_; }

  // copy with w_n replaced (validated again)
  WeightSequence perturbed(int n, double value) const;

 private:
  WeightSequence() = default;
  void extend_to(int n) const;
  void validate_prefix();

  Tail tail_ = Tail::none;
  std::string label_;
  std::vector<double> prefix_;
  double p1_ = 0, p2_ = 0, p3_ = 0;
  Recurrence next_;
  int max_level_ = std::numeric_limits<int>::max();

  mutable std::mutex mutex_;
  mutable std::vector<double> w_;
  mutable std::vector<double> delta_;
  mutable std::vector<double> log_delta_;
};

}  // namespace treepot
