#include "resshift/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "resshift/error.hpp"

namespace resshift {

void ScheduleParams::validate() const {
  if (steps < 2) {
    throw InvalidParameter("schedule: T must be >= 2, got " + std::to_string(steps));
  }
  if (!(power > 0.0) || !std::isfinite(power)) {
    throw InvalidParameter("schedule: p must be positive, got " + std::to_string(power));
  }
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw InvalidParameter("schedule: kappa must be positive, got " + std::to_string(kappa));
  }
}

double eta_one(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw InvalidParameter("eta_one: kappa must be positive, got " + std::to_string(kappa));
  }
  const double r = 0.04 / kappa;
  return std::min(r * r, 0.001);
}

double schedule_base(int steps, double kappa) {
  return std::exp(std::log(kEtaFinal / eta_one(kappa)) / (2.0 * (steps - 1)));
}

double schedule_exponent(int t, int steps, double power) {
  const double frac = static_cast<double>(t - 1) / static_cast<double>(steps - 1);
  return std::pow(frac, power) * (steps - 1);
}

NoiseSchedule::NoiseSchedule(ScheduleParams params, std::vector<double> etas)
    : params_(params), etas_(std::move(etas)), alphas_(etas_.size(), 0.0) {
  for (std::size_t t = 1; t < etas_.size(); ++t) alphas_[t] = etas_[t] - etas_[t - 1];
}

double NoiseSchedule::eta(int t) const {
  if (t < 0 || t > steps()) {
    throw StepError("eta: step " + std::to_string(t) + " outside 0.." + std::to_string(steps()));
  }
  return etas_[t];
}

double NoiseSchedule::alpha(int t) const {
  check_step(t);
  return alphas_[t];
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps()) {
    throw StepError("step " + std::to_string(t) + " outside 1.." + std::to_string(steps()));
  }
}

NoiseSchedule build_schedule(const ScheduleParams& params) {
  params.validate();
  const int T = params.steps;
  const double eta1 = eta_one(params.kappa);
  const double sqrt_eta1 = std::sqrt(eta1);
  const double log_base = std::log(schedule_base(T, params.kappa));

  std::vector<double> etas(static_cast<std::size_t>(T) + 1, 0.0);
  etas[1] = eta1;
  etas[T] = kEtaFinal;
  for (int t = 2; t < T; ++t) {
    const double s = sqrt_eta1 * std::exp(schedule_exponent(t, T, params.power) * log_base);
    etas[t] = s * s;
  }
  for (int t = 1; t <= T; ++t) {
    if (!(etas[t] > etas[t - 1])) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "schedule not strictly increasing at t=%d (eta[t-1]=%.17g, eta[t]=%.17g)", t,
                    etas[t - 1], etas[t]);
      throw InvalidParameter(buf);
    }
  }
  return NoiseSchedule(params, std::move(etas));
}

double loss_weight(const NoiseSchedule& schedule, int t) {
  schedule.check_step(t);
  if (t == 1) {
    throw UndefinedWeight("loss weight w_1 is undefined (eta_0 = 0); use the unweighted loss");
  }
  const double k = schedule.kappa();
  return schedule.alpha(t) / (2.0 * k * k * schedule.eta(t) * schedule.eta(t - 1));
}

std::vector<std::pair<int, double>> relative_noise_curve(const NoiseSchedule& schedule) {
  std::vector<std::pair<int, double>> curve;
  curve.reserve(static_cast<std::size_t>(schedule.steps()));
  for (int t = 1; t <= schedule.steps(); ++t) {
    curve.emplace_back(t, schedule.kappa() * std::sqrt(schedule.eta(t)));
  }
  return curve;
}

void write_schedule_csv(std::ostream& os, const NoiseSchedule& schedule) {
  os << "t,eta,alpha,rel_noise\n";
  char buf[128];
  for (const auto& [t, rel] : relative_noise_curve(schedule)) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", t, schedule.eta(t),
                  schedule.alpha(t), rel);
    os << buf;
  }
}

}  // namespace resshift
