#pragma once

#include <ostream>
#include <utility>
#include <vector>

namespace resshift {

struct ScheduleParams {
  int steps = 15;        // T, number of diffusion steps (>= 2)
  double power = 0.3;    // p, growth-rate exponent of the geometric schedule
  double kappa = 2.0;    // global noise magnitude

  void validate() const;
  bool operator==(const ScheduleParams&) const = default;
};

/// Shifting sequence eta_0..eta_T (eta_0 = 0) and increments alpha_t = eta_t - eta_{t-1}.
/// Immutable after construction.
class NoiseSchedule {
 public:
  int steps() const { return params_.steps; }
  double kappa() const { return params_.kappa; }
  const ScheduleParams& params() const { return params_; }

  // t in 0..T
  double eta(int t) const;
  // t in 1..T
  double alpha(int t) const;
  const std::vector<double>& etas() const { return etas_; }

  // Throws StepError unless t is in 1..T.
  void check_step(int t) const;

 private:
  friend NoiseSchedule build_schedule(const ScheduleParams& params);
  NoiseSchedule(ScheduleParams params, std::vector<double> etas);

  ScheduleParams params_;
  std::vector<double> etas_;    // index 0..T
  std::vector<double> alphas_;  // index 0..T, alphas_[0] unused
};

// eta_1 = min((0.04 / kappa)^2, 0.001), so that kappa * sqrt(eta_1) <= 0.04.
double eta_one(double kappa);

/// Builds the non-uniform geometric schedule:
///   sqrt(eta_t) = sqrt(eta_1) * b0^beta_t,  t = 2..T-1
///   beta_t = ((t-1)/(T-1))^p * (T-1),  b0 = exp(ln(eta_T/eta_1) / (2(T-1)))
/// with eta_T = 0.999. Fails with InvalidParameter if rounding breaks strict
/// monotonicity.
NoiseSchedule build_schedule(const ScheduleParams& params);

inline constexpr double kEtaFinal = 0.999;

// Base b0 of the geometric schedule.
double schedule_base(int steps, double kappa);
// Exponent beta_t, t in 1..T.
double schedule_exponent(int t, int steps, double power);

// w_t = alpha_t / (2 kappa^2 eta_t eta_{t-1}); t must be in 2..T.
double loss_weight(const NoiseSchedule& schedule, int t);

// (t, kappa * sqrt(eta_t)) for t = 1..T: the marginal noise std, equal to
// sqrt(1/snr) for a unit-power signal.
std::vector<std::pair<int, double>> relative_noise_curve(const NoiseSchedule& schedule);

// CSV with header `t,eta,alpha,rel_noise`, one row per t in 1..T, %.17g values.
void write_schedule_csv(std::ostream& os, const NoiseSchedule& schedule);

}  // namespace resshift
