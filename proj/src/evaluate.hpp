#ifndef VIPER_EVALUATE_HPP
#define VIPER_EVALUATE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "envs.hpp"
#include "learners.hpp"

namespace viper::eval {

// Exact state values V[h][s] for h in 1..H+1 (V[H+1] = 0) of the
// two-state hard MDP, computed by backward dynamic programming with
// exact transition and reward queries.
struct ValueTable {
  int horizon = 0;
  std::vector<std::array<double, 2>> v;  // index h-1; size horizon+1

  double at(int h, int s) const { return v.at(h - 1).at(s); }
};

ValueTable exact_policy_values(const envs::LinearMdpSpec& spec,
                               const algos::Policy& policy);
ValueTable exact_optimal_values(const envs::LinearMdpSpec& spec);

// E_{s1 ~ uniform{0,1}} [ V*_1(s1) - V^pi_1(s1) ].
double subopt_mdp(const envs::LinearMdpSpec& spec, const algos::Policy& policy);

struct McReport {
  double subopt = 0.0;
  double stderr_ = 0.0;
  int n_eval = 0;
};

// Monte-Carlo suboptimality over n_eval fresh states (fixed by seed):
// mean over states of max_a r(s,a) - r(s, pi(s)).
McReport subopt_bandit_mc(const envs::BanditTask& task,
                          const algos::Policy& policy, int n_eval,
                          uint64_t seed);

struct LatencyReport {
  double median_us = 0.0;
  double p95_us = 0.0;
  std::vector<double> samples_us;
};

// Per-action-selection latency over n_states probe states x repeats
// selections after `warmup` discarded selections. The measured section
// runs on the calling thread only.
LatencyReport bench_bandit_select(const envs::BanditTask& task,
                                  const algos::Policy& policy, int n_states,
                                  int repeats, int warmup, uint64_t seed);
LatencyReport bench_mdp_select(const envs::LinearMdpSpec& spec,
                               const algos::Policy& policy, int repeats,
                               int warmup);

struct GaussianLawReport {
  double max_mean_abs_err = 0.0;
  double mean_err_bound = 0.0;
  double cov_fro_rel_err = 0.0;
  bool mean_ok = false;
  bool cov_ok = false;
};

// Draws n_draws closed-form perturbed ridge solutions on a random (d, K)
// fixture and checks that theta~ - theta^ has mean ~ 0 and covariance
// ~ sigma^2 Lambda^-1 (the covariance identity is exact for lambda = 1).
GaussianLawReport gaussian_law_test(int d, int K, double sigma, double lambda,
                                    int n_draws, uint64_t seed);

struct AntiConcReport {
  double single_freq = 0.0;
  double single_expected = 0.0;  // Phi(-1)
  double ensemble_freq = 0.0;
  int ensemble_m = 0;
};

// Frequency of <g, draw> <= -sigma ||g||_{Lambda^-1} for single draws
// from N(0, sigma^2 Lambda^-1) and for the min over ensemble_m draws.
AntiConcReport anti_concentration_test(int d, int K, double sigma,
                                       double lambda, int n_draws,
                                       int ensemble_m, int n_trials,
                                       uint64_t seed);

// Experiment report rows.
extern const char kCsvHeader[];

struct SuboptRow {
  std::string algo;
  int K = 0;
  int H = 1;
  int m = 0;          // 0 = not applicable
  int M = 0;          // 0 = not applicable
  double sigma = 0.0;
  bool has_sigma = false;
  double beta = 0.0;
  bool has_beta = false;
  uint64_t seed = 0;
  double subopt = 0.0;
  double stderr_ = 0.0;
  double fit_ms = 0.0;
  double select_us_median = 0.0;
  double select_us_p95 = 0.0;
};

std::string csv_row(const SuboptRow& row);

}  // namespace viper::eval

#endif
