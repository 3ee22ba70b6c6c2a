#include "gstds/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gstds/errors.hpp"

namespace gstds {

Policy parse_policy(std::string_view name) {
  if (name == "constant") return Policy::constant;
  if (name == "sigmoid") return Policy::sigmoid;
  if (name == "sinc") return Policy::sinc;
  if (name == "sinusoid") return Policy::sinusoid;
  if (name == "gamma") return Policy::gamma;
  if (name == "aimd_mellow") return Policy::aimd_mellow;
  if (name == "aimd_aggressive") return Policy::aimd_aggressive;
  throw Error(ErrorCode::invalid_argument,
              "unknown policy '" + std::string(name) + "'");
}

std::string to_string(Policy policy) {
  switch (policy) {
    case Policy::constant: return "constant";
    case Policy::sigmoid: return "sigmoid";
    case Policy::sinc: return "sinc";
    case Policy::sinusoid: return "sinusoid";
    case Policy::gamma: return "gamma";
    case Policy::aimd_mellow: return "aimd_mellow";
    case Policy::aimd_aggressive: return "aimd_aggressive";
  }
  return "?";
}

double sigmoid_value(const SigmoidParams& p, double x) {
  return p.a + (p.b - p.a) / (1.0 + std::exp(-p.k * (x - p.x0)));
}

namespace {

double discrete_mean(const SigmoidParams& p, size_t total_steps) {
  double sum = 0.0;
  for (size_t i = 0; i < total_steps; ++i)
    sum += sigmoid_value(p, static_cast<double>(i));
  return sum / static_cast<double>(total_steps);
}

}  // namespace

SigmoidParams calibrate_sigmoid(double mean_target, double max_target,
                                double min_target, size_t total_steps,
                                double steepness_scale) {
  if (!(min_target < mean_target && mean_target < max_target &&
        max_target <= 1.0 && min_target > 0.0))
    throw Error(ErrorCode::infeasible,
                "need 0 < min_target < mean_target < max_target <= 1");
  if (total_steps < 2)
    throw Error(ErrorCode::invalid_argument, "total_steps must be >= 2");
  if (steepness_scale <= 0.0)
    throw Error(ErrorCode::invalid_argument, "steepness_scale must be > 0");

  SigmoidParams p;
  p.a = min_target;
  p.b = max_target;
  p.k = steepness_scale / static_cast<double>(total_steps);

  double t = static_cast<double>(total_steps);
  double lo = -2.0 * t;  // mean near b
  double hi = 3.0 * t;   // mean near a
  p.x0 = lo;
  double mean = discrete_mean(p, total_steps);
  if (mean < mean_target)
    throw Error(ErrorCode::infeasible, "mean_target unreachable from above");
  p.x0 = hi;
  if (discrete_mean(p, total_steps) > mean_target)
    throw Error(ErrorCode::infeasible, "mean_target unreachable from below");

  bool converged = false;
  for (int iter = 0; iter < 200; ++iter) {
    p.x0 = 0.5 * (lo + hi);
    mean = discrete_mean(p, total_steps);
    if (std::abs(mean - mean_target) < 1e-6) {
      converged = true;
      break;
    }
    if (mean > mean_target)
      lo = p.x0;
    else
      hi = p.x0;
  }
  if (!converged && std::abs(mean - mean_target) >= 1e-3)
    throw Error(ErrorCode::non_convergence,
                "sigmoid calibration residual " +
                    std::to_string(std::abs(mean - mean_target)));
  return p;
}

Schedule build_schedule(Policy policy, const ScheduleParams& params,
                        size_t n_epochs, size_t m_batches) {
  if (n_epochs < 1 || m_batches < 1)
    throw Error(ErrorCode::invalid_argument,
                "n_epochs and m_batches must be >= 1");
  size_t total = n_epochs * m_batches;
  double t = static_cast<double>(total);

  Schedule sched;
  sched.policy = policy;
  sched.params = params;
  sched.values.resize(total);

  auto check_bounds = [&](double lo, double hi) {
    if (!(lo > 0.0 && lo < hi && hi <= 1.0))
      throw Error(ErrorCode::invalid_argument,
                  "ratio bounds must satisfy 0 < r_min < r_max <= 1");
  };

  switch (policy) {
    case Policy::constant: {
      double v = params.constant_value;
      if (!(v > 0.0 && v <= 1.0))
        throw Error(ErrorCode::invalid_argument,
                    "constant ratio must lie in (0, 1]");
      std::fill(sched.values.begin(), sched.values.end(), v);
      break;
    }
    case Policy::sigmoid: {
      const auto& p = params.sigmoid;
      if (!(p.a > 0.0 && p.a < p.b && p.b <= 1.0 && p.k > 0.0))
        throw Error(ErrorCode::invalid_argument, "invalid sigmoid params");
      for (size_t i = 0; i < total; ++i)
        sched.values[i] = sigmoid_value(p, static_cast<double>(i));
      break;
    }
    case Policy::sinusoid: {
      check_bounds(params.r_min, params.r_max);
      double c = 0.5 * (params.r_min + params.r_max);
      double amp = 0.5 * (params.r_max - params.r_min);
      for (size_t i = 0; i < total; ++i) {
        double v = c + amp * std::sin(2.0 * std::numbers::pi *
                                      params.sinusoid_cycles *
                                      static_cast<double>(i) / t);
        sched.values[i] = std::clamp(v, params.r_min, params.r_max);
      }
      break;
    }
    case Policy::sinc: {
      check_bounds(params.r_min, params.r_max);
      for (size_t i = 0; i < total; ++i) {
        double x =
            params.sinc_width * (static_cast<double>(i) - 0.5 * t) / t;
        double s = x == 0.0 ? 1.0
                            : std::sin(std::numbers::pi * x) /
                                  (std::numbers::pi * x);
        sched.values[i] =
            params.r_min + (params.r_max - params.r_min) * std::abs(s);
      }
      break;
    }
    case Policy::gamma: {
      check_bounds(params.r_min, params.r_max);
      double alpha = params.gamma_shape;
      if (alpha <= 1.0)
        throw Error(ErrorCode::invalid_argument, "gamma_shape must be > 1");
      double peak = alpha - 1.0;
      double gmax = std::pow(peak, alpha - 1.0) * std::exp(-peak);
      double denom = total > 1 ? static_cast<double>(total - 1) : 1.0;
      for (size_t i = 0; i < total; ++i) {
        double x = peak * static_cast<double>(i) / denom;
        double g = x == 0.0 ? 0.0 : std::pow(x, alpha - 1.0) * std::exp(-x);
        sched.values[i] =
            params.r_min + (params.r_max - params.r_min) * g / gmax;
      }
      break;
    }
    case Policy::aimd_mellow:
    case Policy::aimd_aggressive: {
      check_bounds(params.aimd.r_min, params.aimd.r_max);
      // Placeholders: a reactive run replaces these online via aimd_step.
      std::fill(sched.values.begin(), sched.values.end(), params.aimd.r_min);
      sched.reactive = true;
      break;
    }
  }
  return sched;
}

double aimd_step(AimdState& state, AimdFeedback feedback) {
  const AimdParams& p = state.params;
  if (feedback == AimdFeedback::improved) {
    state.ratio = std::max(state.ratio - p.delta_add, p.r_min);
    state.degrade_streak = 0;
  } else {
    state.degrade_streak += 1;
    if (state.degrade_streak >= p.streak_limit) {
      state.ratio = std::clamp(state.history_mean(), p.r_min, p.r_max);
      state.degrade_streak = 0;
    } else {
      state.ratio = std::min(state.ratio * p.beta_mult, p.r_max);
    }
  }
  state.history_sum += state.ratio;
  state.history_count += 1;
  return state.ratio;
}

}  // namespace gstds
