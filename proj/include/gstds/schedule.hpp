#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gstds {

enum class Policy {
  constant,
  sigmoid,
  sinc,
  sinusoid,
  gamma,
  aimd_mellow,
  aimd_aggressive,
};

Policy parse_policy(std::string_view name);
std::string to_string(Policy policy);

struct SigmoidParams {
  double a = 0.18;   // lower bound
  double b = 0.88;   // upper bound
  double k = 0.0;    // steepness
  double x0 = 0.0;   // midpoint, in global step units
};

struct AimdParams {
  double delta_add = 0.005;
  double beta_mult = 1.5;  // 2.0 for the aggressive variant
  int streak_limit = 3;
  double r_min = 0.18;
  double r_max = 0.88;
};

struct ScheduleParams {
  double constant_value = 1.0;
  SigmoidParams sigmoid;
  double r_min = 0.18;
  double r_max = 0.88;
  double sinusoid_cycles = 3.0;  // full sine periods over the run
  double sinc_width = 6.0;       // argument scale of the sinc envelope
  double gamma_shape = 6.0;      // >1: ratio ramps toward the pdf peak
  AimdParams aimd;
};

struct Schedule {
  std::vector<double> values;  // length n_epochs * m_batches
  Policy policy = Policy::constant;
  ScheduleParams params;
  bool reactive = false;  // true only for AIMD policies
};

// Fixes a = min_target, b = max_target, k = steepness_scale / total_steps and
// bisects x0 until the discrete mean of f over [0, total_steps) hits
// mean_target within 1e-3. The discrete mean is strictly decreasing in x0,
// so the root brackets cleanly.
SigmoidParams calibrate_sigmoid(double mean_target, double max_target,
                                double min_target, size_t total_steps,
                                double steepness_scale);

double sigmoid_value(const SigmoidParams& p, double x);

Schedule build_schedule(Policy policy, const ScheduleParams& params,
                        size_t n_epochs, size_t m_batches);

struct AimdState {
  double ratio = 0.18;
  int degrade_streak = 0;
  double history_sum = 0.0;
  size_t history_count = 0;
  AimdParams params;

  double history_mean() const {
    return history_count == 0 ? ratio
                              : history_sum / static_cast<double>(history_count);
  }
};

enum class AimdFeedback { improved, degraded };

// Emits the next ratio and folds it into the running history mean.
double aimd_step(AimdState& state, AimdFeedback feedback);

}  // namespace gstds
