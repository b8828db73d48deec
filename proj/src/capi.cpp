#include "viper/viper.h"

#include <cstring>
#include <fstream>
#include <string>

#include "dataset.hpp"
#include "envs.hpp"
#include "errors.hpp"
#include "evaluate.hpp"
#include "idx.hpp"
#include "learners.hpp"
#include "textio.hpp"
#include "uq.hpp"

using viper::ConfigError;
using viper::DomainError;
using viper::FormatError;
using viper::IoError;
using viper::NumericError;

struct viper_mdp {
  viper::envs::LinearMdpSpec spec;
};

struct viper_bandit {
  viper::envs::BanditTask task;
};

struct viper_dataset {
  viper::data::OfflineDataset ds;
};

struct viper_policy {
  std::unique_ptr<viper::algos::Policy> policy;
};

namespace {

thread_local std::string g_last_error = "no error";

viper_status set_error(viper_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
viper_status guarded(Fn&& fn) {
  try {
    fn();
    return VIPER_OK;
  } catch (const DomainError& e) {
    return set_error(VIPER_ERR_DOMAIN, e.what());
  } catch (const ConfigError& e) {
    return set_error(VIPER_ERR_CONFIG, e.what());
  } catch (const FormatError& e) {
    return set_error(VIPER_ERR_FORMAT, e.what());
  } catch (const NumericError& e) {
    return set_error(VIPER_ERR_NUMERIC, e.what());
  } catch (const IoError& e) {
    return set_error(VIPER_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return set_error(VIPER_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return set_error(VIPER_ERR_UNKNOWN, e.what());
  } catch (...) {
    return set_error(VIPER_ERR_UNKNOWN, "unknown failure");
  }
}

viper_status require(bool ok, const char* what) {
  if (ok) return VIPER_OK;
  return set_error(VIPER_ERR_INVALID_ARGUMENT, what);
}

viper::algos::FitConfig to_core(const viper_fit_config& c, int horizon) {
  viper::algos::FitConfig cfg;
  cfg.ensemble_size = c.ensemble_size;
  cfg.sigma = c.sigma;
  if (c.sigma_per_step)
    cfg.sigma_per_step.assign(c.sigma_per_step, c.sigma_per_step + horizon);
  cfg.beta = c.beta;
  cfg.lambda = c.lambda;
  cfg.eta = c.eta;
  cfg.gd_steps = c.gd_steps;
  cfg.psi = c.psi;
  cfg.width = c.width;
  cfg.split_enabled = c.split_enabled != 0;
  cfg.fit_threads = c.fit_threads;
  cfg.net_depth = c.net_depth;
  cfg.adam.lr = c.adam_lr;
  cfg.adam.epochs = c.adam_epochs;
  cfg.adam.batch = c.adam_batch;
  cfg.per_member_init = c.per_member_init != 0;
  cfg.lcb_grad_at_init = c.lcb_grad_at_init != 0;
  cfg.seed = c.seed;
  return cfg;
}

void write_samples(const char* path, const viper::eval::LatencyReport& rep) {
  if (!path) return;
  std::string body;
  body.reserve(rep.samples_us.size() * 12);
  for (double v : rep.samples_us) {
    body += viper::textio::format_real(v);
    body += '\n';
  }
  viper::textio::atomic_write(path, body);
}

}  // namespace

extern "C" {

const char* viper_version(void) { return "0.1.0"; }

const char* viper_last_error(void) { return g_last_error.c_str(); }

/* ------------------------------- MDP ------------------------------- */

viper_status viper_mdp_create(int32_t horizon, uint64_t seed, viper_mdp** out) {
  if (viper_status s = require(out != nullptr, "out must not be NULL")) return s;
  return guarded([&] {
    *out = new viper_mdp{viper::envs::LinearMdpSpec::make_hard(horizon, seed)};
  });
}

void viper_mdp_free(viper_mdp* mdp) { delete mdp; }

viper_status viper_mdp_save(const viper_mdp* mdp, const char* path) {
  if (viper_status s = require(mdp && path, "mdp and path must not be NULL"))
    return s;
  return guarded([&] { viper::textio::atomic_write(path, mdp->spec.serialize()); });
}

viper_status viper_mdp_load(const char* path, viper_mdp** out) {
  if (viper_status s = require(path && out, "path and out must not be NULL"))
    return s;
  return guarded([&] {
    *out = new viper_mdp{viper::envs::LinearMdpSpec::deserialize(
        viper::textio::read_file(path), path)};
  });
}

int32_t viper_mdp_horizon(const viper_mdp* mdp) {
  return mdp ? mdp->spec.horizon() : -1;
}
int32_t viper_mdp_n_states(const viper_mdp* mdp) {
  return mdp ? viper::envs::LinearMdpSpec::kStates : -1;
}
int32_t viper_mdp_n_actions(const viper_mdp* mdp) {
  return mdp ? viper::envs::LinearMdpSpec::kActions : -1;
}
int32_t viper_mdp_feat_dim(const viper_mdp* mdp) {
  return mdp ? viper::envs::LinearMdpSpec::kFeatDim : -1;
}

viper_status viper_mdp_feature(const viper_mdp* mdp, int32_t s, int32_t a,
                               double* out) {
  if (viper_status st = require(mdp && out, "mdp and out must not be NULL"))
    return st;
  return guarded([&] {
    const Eigen::VectorXd phi = mdp->spec.feature(s, a);
    std::memcpy(out, phi.data(), sizeof(double) * phi.size());
  });
}

viper_status viper_mdp_transition_prob(const viper_mdp* mdp, int32_t h,
                                       int32_t s, int32_t a, int32_t s_next,
                                       double* out) {
  if (viper_status st = require(mdp && out, "mdp and out must not be NULL"))
    return st;
  return guarded([&] { *out = mdp->spec.transition_prob(h, s, a, s_next); });
}

viper_status viper_mdp_mean_reward(const viper_mdp* mdp, int32_t h, int32_t s,
                                   int32_t a, double* out) {
  if (viper_status st = require(mdp && out, "mdp and out must not be NULL"))
    return st;
  return guarded([&] { *out = mdp->spec.mean_reward(h, s, a); });
}

/* ------------------------------ Bandit ----------------------------- */

viper_status viper_bandit_create(const char* kind, int32_t dim,
                                 int32_t n_actions, double epsilon,
                                 double obs_noise, uint64_t seed,
                                 viper_bandit** out) {
  if (viper_status s = require(kind && out, "kind and out must not be NULL"))
    return s;
  return guarded([&] {
    *out = new viper_bandit{viper::envs::BanditTask::make_synthetic(
        viper::envs::bandit_kind_from_name(kind), dim, n_actions, epsilon,
        obs_noise, seed)};
  });
}

viper_status viper_bandit_create_mnist(const char* images_path,
                                       const char* labels_path, double epsilon,
                                       double obs_noise, viper_bandit** out) {
  if (viper_status s =
          require(images_path && labels_path && out, "paths must not be NULL"))
    return s;
  return guarded([&] {
    *out = new viper_bandit{viper::envs::BanditTask::make_mnist(
        viper::ingest::load_idx(images_path, labels_path), epsilon, obs_noise)};
  });
}

void viper_bandit_free(viper_bandit* bandit) { delete bandit; }

int32_t viper_bandit_state_dim(const viper_bandit* bandit) {
  return bandit ? bandit->task.state_dim() : -1;
}
int32_t viper_bandit_n_actions(const viper_bandit* bandit) {
  return bandit ? bandit->task.n_actions() : -1;
}

viper_status viper_bandit_mean_reward(const viper_bandit* bandit,
                                      const double* state, int32_t dim,
                                      int32_t action, double* out) {
  if (viper_status s = require(bandit && state && out, "NULL argument"))
    return s;
  return guarded([&] {
    Eigen::Map<const Eigen::VectorXd> x(state, dim);
    *out = bandit->task.mean_reward(Eigen::VectorXd(x), action);
  });
}

viper_status viper_action_embedding(const double* state, int32_t dim,
                                    int32_t action, int32_t n_actions,
                                    double* out) {
  if (viper_status s = require(state && out, "NULL argument")) return s;
  return guarded([&] {
    Eigen::Map<const Eigen::VectorXd> x(state, dim);
    const Eigen::VectorXd emb =
        viper::envs::action_embedding(Eigen::VectorXd(x), action, n_actions);
    std::memcpy(out, emb.data(), sizeof(double) * emb.size());
  });
}

/* ----------------------------- Dataset ----------------------------- */

viper_status viper_split_indices(int32_t K, int32_t H, int32_t h, int32_t* lo,
                                 int32_t* hi) {
  if (viper_status s = require(lo && hi, "lo and hi must not be NULL")) return s;
  return guarded([&] {
    const auto buckets = viper::data::split_indices(K, H);
    if (h < 1 || h > H) throw DomainError("h outside 1..H");
    *lo = buckets[h - 1].lo;
    *hi = buckets[h - 1].hi;
  });
}

viper_status viper_collect_mdp(const viper_mdp* mdp, int32_t K, uint64_t seed,
                               int32_t split_enabled, viper_dataset** out) {
  if (viper_status s = require(mdp && out, "mdp and out must not be NULL"))
    return s;
  return guarded([&] {
    *out = new viper_dataset{viper::data::OfflineDataset::collect_mdp(
        mdp->spec, K, seed, split_enabled != 0)};
  });
}

viper_status viper_collect_bandit(const viper_bandit* bandit, int32_t K,
                                  uint64_t seed, int32_t split_enabled,
                                  viper_dataset** out) {
  if (viper_status s = require(bandit && out, "bandit and out must not be NULL"))
    return s;
  return guarded([&] {
    *out = new viper_dataset{viper::data::OfflineDataset::collect_bandit(
        bandit->task, K, seed, split_enabled != 0)};
  });
}

void viper_dataset_free(viper_dataset* ds) { delete ds; }

viper_status viper_dataset_save(const viper_dataset* ds, const char* path) {
  if (viper_status s = require(ds && path, "ds and path must not be NULL"))
    return s;
  return guarded([&] { viper::textio::atomic_write(path, ds->ds.serialize()); });
}

viper_status viper_dataset_load(const char* path, viper_dataset** out) {
  if (viper_status s = require(path && out, "path and out must not be NULL"))
    return s;
  return guarded([&] {
    *out = new viper_dataset{viper::data::OfflineDataset::deserialize(
        viper::textio::read_file(path), path)};
  });
}

int32_t viper_dataset_k(const viper_dataset* ds) { return ds ? ds->ds.K() : -1; }
int32_t viper_dataset_h(const viper_dataset* ds) { return ds ? ds->ds.H() : -1; }

/* ------------------------------ Fitting ---------------------------- */

void viper_fit_config_default(viper_fit_config* cfg) {
  if (!cfg) return;
  *cfg = viper_fit_config{};
  cfg->ensemble_size = 1;
  cfg->sigma = 0.0;
  cfg->sigma_per_step = nullptr;
  cfg->beta = 0.0;
  cfg->lambda = 0.01;
  cfg->eta = 0.001;
  cfg->gd_steps = 100;
  cfg->psi = 0.0;
  cfg->width = 64;
  cfg->split_enabled = 0;
  cfg->fit_threads = 1;
  cfg->net_depth = 1;
  cfg->adam_lr = 0.001;
  cfg->adam_epochs = 20;
  cfg->adam_batch = 64;
  cfg->per_member_init = 0;
  cfg->lcb_grad_at_init = 0;
  cfg->seed = 0;
}

viper_status viper_fit_mdp(const viper_mdp* mdp, const viper_dataset* ds,
                           const char* algo, const viper_fit_config* cfg,
                           viper_policy** out) {
  if (viper_status s = require(mdp && ds && algo && cfg && out, "NULL argument"))
    return s;
  return guarded([&] {
    *out = new viper_policy{viper::algos::fit_mdp(
        mdp->spec, ds->ds, viper::algos::algo_from_name(algo),
        to_core(*cfg, mdp->spec.horizon()))};
  });
}

viper_status viper_fit_bandit(const viper_bandit* bandit,
                              const viper_dataset* ds, const char* algo,
                              const viper_fit_config* cfg, viper_policy** out) {
  if (viper_status s =
          require(bandit && ds && algo && cfg && out, "NULL argument"))
    return s;
  return guarded([&] {
    *out = new viper_policy{viper::algos::fit_bandit(
        bandit->task, ds->ds, viper::algos::algo_from_name(algo),
        to_core(*cfg, 1))};
  });
}

/* ------------------------------ Policy ----------------------------- */

void viper_policy_free(viper_policy* policy) { delete policy; }

viper_status viper_policy_select_mdp(const viper_policy* policy, int32_t h,
                                     int32_t s, int32_t* action) {
  if (viper_status st = require(policy && action, "NULL argument")) return st;
  return guarded([&] { *action = policy->policy->select_mdp(h, s); });
}

viper_status viper_policy_select_bandit(const viper_policy* policy,
                                        const double* state, int32_t dim,
                                        int32_t* action) {
  if (viper_status st = require(policy && state && action, "NULL argument"))
    return st;
  return guarded([&] {
    Eigen::Map<const Eigen::VectorXd> x(state, dim);
    *action = policy->policy->select_bandit(Eigen::VectorXd(x));
  });
}

viper_status viper_policy_value_mdp(const viper_policy* policy, int32_t h,
                                    int32_t s, int32_t a, double* out) {
  if (viper_status st = require(policy && out, "NULL argument")) return st;
  return guarded([&] { *out = policy->policy->value_mdp(h, s, a); });
}

viper_status viper_policy_value_bandit(const viper_policy* policy,
                                       const double* state, int32_t dim,
                                       int32_t a, double* out) {
  if (viper_status st = require(policy && state && out, "NULL argument"))
    return st;
  return guarded([&] {
    Eigen::Map<const Eigen::VectorXd> x(state, dim);
    *out = policy->policy->value_bandit(Eigen::VectorXd(x), a);
  });
}

viper_status viper_policy_save(const viper_policy* policy, const char* path) {
  if (viper_status s = require(policy && path, "NULL argument")) return s;
  return guarded(
      [&] { viper::textio::atomic_write(path, policy->policy->serialize()); });
}

viper_status viper_policy_load(const char* path, viper_policy** out) {
  if (viper_status s = require(path && out, "NULL argument")) return s;
  return guarded([&] {
    *out = new viper_policy{viper::algos::Policy::deserialize(
        viper::textio::read_file(path), path)};
  });
}

/* ---------------------------- Evaluation --------------------------- */

viper_status viper_eval_mdp_subopt(const viper_mdp* mdp,
                                   const viper_policy* policy, double* subopt) {
  if (viper_status s = require(mdp && policy && subopt, "NULL argument"))
    return s;
  return guarded(
      [&] { *subopt = viper::eval::subopt_mdp(mdp->spec, *policy->policy); });
}

viper_status viper_eval_mdp_optimal_value(const viper_mdp* mdp, int32_t s,
                                          double* value) {
  if (viper_status st = require(mdp && value, "NULL argument")) return st;
  return guarded([&] {
    if (s < 0 || s > 1) throw DomainError("state outside {0,1}");
    *value = viper::eval::exact_optimal_values(mdp->spec).at(1, s);
  });
}

viper_status viper_eval_bandit_subopt(const viper_bandit* bandit,
                                      const viper_policy* policy,
                                      int32_t n_eval, uint64_t seed,
                                      double* subopt, double* stderr_out) {
  if (viper_status s =
          require(bandit && policy && subopt && stderr_out, "NULL argument"))
    return s;
  return guarded([&] {
    const viper::eval::McReport rep = viper::eval::subopt_bandit_mc(
        bandit->task, *policy->policy, n_eval, seed);
    *subopt = rep.subopt;
    *stderr_out = rep.stderr_;
  });
}

viper_status viper_bench_bandit_select(const viper_bandit* bandit,
                                       const viper_policy* policy,
                                       int32_t n_states, int32_t repeats,
                                       int32_t warmup, uint64_t seed,
                                       const char* samples_path,
                                       double* median_us, double* p95_us) {
  if (viper_status s =
          require(bandit && policy && median_us && p95_us, "NULL argument"))
    return s;
  return guarded([&] {
    const viper::eval::LatencyReport rep = viper::eval::bench_bandit_select(
        bandit->task, *policy->policy, n_states, repeats, warmup, seed);
    write_samples(samples_path, rep);
    *median_us = rep.median_us;
    *p95_us = rep.p95_us;
  });
}

viper_status viper_bench_mdp_select(const viper_mdp* mdp,
                                    const viper_policy* policy,
                                    int32_t repeats, int32_t warmup,
                                    const char* samples_path, double* median_us,
                                    double* p95_us) {
  if (viper_status s =
          require(mdp && policy && median_us && p95_us, "NULL argument"))
    return s;
  return guarded([&] {
    const viper::eval::LatencyReport rep = viper::eval::bench_mdp_select(
        mdp->spec, *policy->policy, repeats, warmup);
    write_samples(samples_path, rep);
    *median_us = rep.median_us;
    *p95_us = rep.p95_us;
  });
}

/* ------------------------- Uncertainty tools ----------------------- */

viper_status viper_ntk_closed_form(const double* x, const double* y, int32_t d,
                                   double* out) {
  if (viper_status s = require(x && y && out, "NULL argument")) return s;
  return guarded([&] {
    Eigen::Map<const Eigen::VectorXd> xv(x, d), yv(y, d);
    *out = viper::uq::ntk_closed_form(Eigen::VectorXd(xv), Eigen::VectorXd(yv));
  });
}

viper_status viper_effective_dimension(const double* gram, int32_t n,
                                       double lambda, int32_t kprime,
                                       double* out) {
  if (viper_status s = require(gram && out, "NULL argument")) return s;
  return guarded([&] {
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = gram[i * n + j];
    *out = viper::uq::effective_dimension(g, lambda, kprime);
  });
}

viper_status viper_ensemble_size(double delta, int32_t H, int32_t S, int32_t A,
                                 int32_t* out) {
  if (viper_status s = require(out != nullptr, "out must not be NULL")) return s;
  return guarded([&] { *out = viper::uq::ensemble_size(delta, H, S, A); });
}

viper_status viper_gaussian_law_test(int32_t d, int32_t K, double sigma,
                                     double lambda, int32_t n_draws,
                                     uint64_t seed, viper_law_report* out) {
  if (viper_status s = require(out != nullptr, "out must not be NULL")) return s;
  return guarded([&] {
    const viper::eval::GaussianLawReport rep =
        viper::eval::gaussian_law_test(d, K, sigma, lambda, n_draws, seed);
    out->max_mean_abs_err = rep.max_mean_abs_err;
    out->mean_err_bound = rep.mean_err_bound;
    out->cov_fro_rel_err = rep.cov_fro_rel_err;
    out->mean_ok = rep.mean_ok ? 1 : 0;
    out->cov_ok = rep.cov_ok ? 1 : 0;
  });
}

viper_status viper_anticoncentration_test(int32_t d, int32_t K, double sigma,
                                          double lambda, int32_t n_draws,
                                          int32_t ensemble_m, int32_t n_trials,
                                          uint64_t seed,
                                          viper_anticonc_report* out) {
  if (viper_status s = require(out != nullptr, "out must not be NULL")) return s;
  return guarded([&] {
    const viper::eval::AntiConcReport rep = viper::eval::anti_concentration_test(
        d, K, sigma, lambda, n_draws, ensemble_m, n_trials, seed);
    out->single_freq = rep.single_freq;
    out->single_expected = rep.single_expected;
    out->ensemble_freq = rep.ensemble_freq;
    out->ensemble_m = rep.ensemble_m;
  });
}

} /* extern "C" */
