#include "evaluate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>

#include "errors.hpp"
#include "textio.hpp"
#include "uq.hpp"

namespace viper::eval {

namespace {

double percentile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const size_t idx = std::min(
      sorted.size() - 1, static_cast<size_t>(q * (sorted.size() - 1) + 0.5));
  return sorted[idx];
}

using Clock = std::chrono::steady_clock;

double elapsed_us(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

LatencyReport summarize(std::vector<double> samples) {
  LatencyReport rep;
  rep.samples_us = samples;
  std::sort(samples.begin(), samples.end());
  rep.median_us = percentile(samples, 0.5);
  rep.p95_us = percentile(samples, 0.95);
  return rep;
}

}  // namespace

ValueTable exact_policy_values(const envs::LinearMdpSpec& spec,
                               const algos::Policy& policy) {
  const int H = spec.horizon();
  ValueTable table;
  table.horizon = H;
  table.v.assign(H + 1, {0.0, 0.0});
  for (int h = H; h >= 1; --h)
    for (int s = 0; s < 2; ++s) {
      const int a = policy.select_mdp(h, s);
      double q = spec.mean_reward(h, s, a);
      for (int sn = 0; sn < 2; ++sn)
        q += spec.transition_prob(h, s, a, sn) * table.v[h][sn];
      table.v[h - 1][s] = q;
    }
  return table;
}

ValueTable exact_optimal_values(const envs::LinearMdpSpec& spec) {
  const int H = spec.horizon();
  ValueTable table;
  table.horizon = H;
  table.v.assign(H + 1, {0.0, 0.0});
  for (int h = H; h >= 1; --h)
    for (int s = 0; s < 2; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < envs::LinearMdpSpec::kActions; ++a) {
        double q = spec.mean_reward(h, s, a);
        for (int sn = 0; sn < 2; ++sn)
          q += spec.transition_prob(h, s, a, sn) * table.v[h][sn];
        best = std::max(best, q);
      }
      table.v[h - 1][s] = best;
    }
  return table;
}

double subopt_mdp(const envs::LinearMdpSpec& spec,
                  const algos::Policy& policy) {
  const ValueTable opt = exact_optimal_values(spec);
  const ValueTable pol = exact_policy_values(spec, policy);
  return 0.5 * ((opt.at(1, 0) - pol.at(1, 0)) + (opt.at(1, 1) - pol.at(1, 1)));
}

McReport subopt_bandit_mc(const envs::BanditTask& task,
                          const algos::Policy& policy, int n_eval,
                          uint64_t seed) {
  if (n_eval < 1) throw ConfigError("n_eval must be >= 1");
  rng::Stream rng = rng::Stream::substream(seed, {0x6576616cu});
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n_eval; ++i) {
    const envs::BanditState s = task.draw_state(rng);
    const int a = policy.select_bandit(s.x);
    const double gap = task.optimal_mean_reward(s) - task.mean_reward(s, a);
    sum += gap;
    sum2 += gap * gap;
  }
  McReport rep;
  rep.n_eval = n_eval;
  rep.subopt = sum / n_eval;
  const double var =
      n_eval > 1 ? (sum2 - sum * sum / n_eval) / (n_eval - 1) : 0.0;
  rep.stderr_ = std::sqrt(std::max(var, 0.0) / n_eval);
  return rep;
}

LatencyReport bench_bandit_select(const envs::BanditTask& task,
                                  const algos::Policy& policy, int n_states,
                                  int repeats, int warmup, uint64_t seed) {
  if (n_states < 1 || repeats < 1) throw ConfigError("empty benchmark");
  rng::Stream rng = rng::Stream::substream(seed, {0x62656e63u});
  std::vector<Eigen::VectorXd> states;
  states.reserve(n_states);
  for (int i = 0; i < n_states; ++i) states.push_back(task.draw_state(rng).x);

  volatile int sink = 0;
  for (int i = 0; i < warmup; ++i)
    sink += policy.select_bandit(states[i % n_states]);

  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(n_states) * repeats);
  for (int r = 0; r < repeats; ++r)
    for (int i = 0; i < n_states; ++i) {
      const auto t0 = Clock::now();
      sink += policy.select_bandit(states[i]);
      const auto t1 = Clock::now();
      samples.push_back(elapsed_us(t0, t1));
    }
  (void)sink;
  return summarize(std::move(samples));
}

LatencyReport bench_mdp_select(const envs::LinearMdpSpec& spec,
                               const algos::Policy& policy, int repeats,
                               int warmup) {
  if (repeats < 1) throw ConfigError("empty benchmark");
  const int H = spec.horizon();
  volatile int sink = 0;
  for (int i = 0; i < warmup; ++i)
    sink += policy.select_mdp(1 + i % H, i % 2);
  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(repeats) * 2 * H);
  for (int r = 0; r < repeats; ++r)
    for (int h = 1; h <= H; ++h)
      for (int s = 0; s < 2; ++s) {
        const auto t0 = Clock::now();
        sink += policy.select_mdp(h, s);
        const auto t1 = Clock::now();
        samples.push_back(elapsed_us(t0, t1));
      }
  (void)sink;
  return summarize(std::move(samples));
}

GaussianLawReport gaussian_law_test(int d, int K, double sigma, double lambda,
                                    int n_draws, uint64_t seed) {
  if (d < 1 || K < 1 || n_draws < 2) throw ConfigError("law test fixture too small");
  rng::Stream fixture = rng::Stream::substream(seed, {0x6c6177u, 0});
  Eigen::MatrixXd Phi(K, d);
  Eigen::VectorXd y(K);
  for (int k = 0; k < K; ++k) {
    Phi.row(k) = envs::random_unit_vector(d, fixture).transpose();
    y[k] = fixture.uniform();
  }
  const Eigen::MatrixXd lambda_m =
      lambda * Eigen::MatrixXd::Identity(d, d) + Phi.transpose() * Phi;
  const Eigen::LLT<Eigen::MatrixXd> llt(lambda_m);
  if (llt.info() != Eigen::Success)
    throw NumericError("fixture factorization failed");
  const Eigen::VectorXd theta_hat = llt.solve(Phi.transpose() * y);

  rng::Stream draws = rng::Stream::substream(seed, {0x6c6177u, 1});
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd xi(K), zeta(d);
  for (int it = 0; it < n_draws; ++it) {
    for (int k = 0; k < K; ++k) xi[k] = sigma * draws.normal();
    for (int j = 0; j < d; ++j) zeta[j] = sigma * draws.normal();
    const Eigen::VectorXd diff =
        llt.solve(Phi.transpose() * xi - lambda * zeta);
    mean += diff;
    second.noalias() += diff * diff.transpose();
  }
  mean /= n_draws;
  Eigen::MatrixXd cov = second / n_draws - mean * mean.transpose();

  const Eigen::MatrixXd expected =
      sigma * sigma *
      llt.solve(Eigen::MatrixXd::Identity(d, d));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lambda_m);
  const double min_eig = eig.eigenvalues().minCoeff();
  GaussianLawReport rep;
  rep.mean_err_bound =
      4.0 * sigma / std::sqrt(min_eig) / std::sqrt(double(n_draws));
  rep.max_mean_abs_err = mean.cwiseAbs().maxCoeff();
  const double denom = expected.norm();
  rep.cov_fro_rel_err =
      denom > 0.0 ? (cov - expected).norm() / denom : cov.norm();
  rep.mean_ok = rep.max_mean_abs_err <= rep.mean_err_bound;
  rep.cov_ok = sigma == 0.0 ? rep.cov_fro_rel_err == 0.0
                            : rep.cov_fro_rel_err <= 0.05;
  return rep;
}

AntiConcReport anti_concentration_test(int d, int K, double sigma,
                                       double lambda, int n_draws,
                                       int ensemble_m, int n_trials,
                                       uint64_t seed) {
  if (d < 1 || K < 1 || n_draws < 1 || ensemble_m < 1 || n_trials < 1)
    throw ConfigError("anti-concentration fixture too small");
  if (sigma <= 0.0) throw ConfigError("sigma must be > 0 for the shift event");
  rng::Stream fixture = rng::Stream::substream(seed, {0x616e7469u, 0});
  uq::CovarianceAccumulator cov(d, lambda);
  for (int k = 0; k < K; ++k)
    cov.update(envs::random_unit_vector(d, fixture));
  const Eigen::VectorXd g = envs::random_unit_vector(d, fixture);
  const double width = cov.quad_form(g);
  const double threshold = -sigma * width;

  rng::Stream draws = rng::Stream::substream(seed, {0x616e7469u, 1});
  long hits = 0;
  for (int it = 0; it < n_draws; ++it)
    if (g.dot(cov.sample(sigma, draws)) <= threshold) ++hits;

  long ens_hits = 0;
  for (int t = 0; t < n_trials; ++t) {
    double min_ip = std::numeric_limits<double>::infinity();
    for (int i = 0; i < ensemble_m; ++i)
      min_ip = std::min(min_ip, g.dot(cov.sample(sigma, draws)));
    if (min_ip <= threshold) ++ens_hits;
  }

  AntiConcReport rep;
  rep.single_freq = double(hits) / n_draws;
  rep.single_expected = uq::normal_cdf(-1.0);
  rep.ensemble_freq = double(ens_hits) / n_trials;
  rep.ensemble_m = ensemble_m;
  return rep;
}

const char kCsvHeader[] =
    "algo,K,H,m,M,sigma,beta,seed,subopt,stderr,fit_ms,select_us_median,"
    "select_us_p95";

std::string csv_row(const SuboptRow& row) {
  std::string out = row.algo;
  out += ',' + std::to_string(row.K);
  out += ',' + std::to_string(row.H);
  out += ',';
  if (row.m > 0) out += std::to_string(row.m);
  out += ',';
  if (row.M > 0) out += std::to_string(row.M);
  out += ',';
  if (row.has_sigma) out += textio::format_real(row.sigma);
  out += ',';
  if (row.has_beta) out += textio::format_real(row.beta);
  out += ',' + std::to_string(row.seed);
  out += ',' + textio::format_real(row.subopt);
  out += ',' + textio::format_real(row.stderr_);
  out += ',' + textio::format_real(row.fit_ms);
  out += ',' + textio::format_real(row.select_us_median);
  out += ',' + textio::format_real(row.select_us_p95);
  return out;
}

}  // namespace viper::eval
