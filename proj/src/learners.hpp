#ifndef VIPER_LEARNERS_HPP
#define VIPER_LEARNERS_HPP

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "envs.hpp"
#include "models.hpp"
#include "rng.hpp"
#include "uq.hpp"

namespace viper::algos {

enum class Algo {
  kLinViper,
  kNeuralViper,
  kLinLCB,
  kLinGreedy,
  kNeuraLCB,
  kNeuraLCBDiag,
  kNeuralGreedy,
};

const char* algo_name(Algo a);
Algo algo_from_name(const std::string& name);
bool algo_is_linear(Algo a);

struct FitConfig {
  int ensemble_size = 1;              // M
  double sigma = 0.0;                 // perturbation scale
  std::vector<double> sigma_per_step; // optional length-H override
  double beta = 0.0;                  // LCB multiplier
  double lambda = 0.01;
  double eta = 0.001;
  int gd_steps = 100;                 // J
  double psi = 0.0;
  int width = 64;                     // m
  bool split_enabled = false;
  int fit_threads = 1;
  int net_depth = 1;                  // 1 = GD net, 2 = Adam mlp
  models::AdamConfig adam;
  bool per_member_init = false;       // fresh W0 per ensemble member
  bool lcb_grad_at_init = false;      // NeuraLCB features at W0
  uint64_t seed = 0;

  double sigma_for_step(int h) const {
    if (!sigma_per_step.empty()) return sigma_per_step.at(h - 1);
    return sigma;
  }
  void validate(int horizon) const;
};

// Perturbed regression targets y~_k = r_k + V_next(s'_k) + xi_k with
// xi ~ N(0, sigma^2) iid. `base` already holds r + V_next.
Eigen::VectorXd perturb_targets(const Eigen::VectorXd& base, double sigma,
                                rng::Stream& rng);

// Closed-form perturbed ridge solution
//   theta~ = Lambda^-1 [ sum_k phi_k (y_k + xi_k) - lambda zeta ]
// with xi ~ N(0, sigma^2) and zeta ~ N(0, sigma^2 I).
Eigen::VectorXd lin_viper_solve(const Eigen::MatrixXd& Phi,
                                const Eigen::VectorXd& y, double lambda,
                                double sigma, rng::Stream& rng);
// Deterministic variant with the noise passed in explicitly.
Eigen::VectorXd lin_viper_solve_explicit(const Eigen::MatrixXd& Phi,
                                         const Eigen::VectorXd& y,
                                         double lambda,
                                         const Eigen::VectorXd& xi,
                                         const Eigen::VectorXd& zeta);

// Greedy argmax over action-indexed values with ties resolved to the
// lowest action id.
int greedy_argmax(const Eigen::VectorXd& action_values);

// ------------------------------------------------------------------ //
// Step value functions: Q estimates for a single step h, evaluated on
// model inputs (features or embeddings).
// ------------------------------------------------------------------ //

class StepValueFn {
 public:
  virtual ~StepValueFn() = default;
  virtual double value(const Eigen::VectorXd& x) const = 0;
  virtual double cap() const = 0;
  virtual void serialize(std::string& out) const = 0;
};

std::unique_ptr<StepValueFn> step_fn_deserialize(const std::string& bytes,
                                                 size_t& off,
                                                 const std::string& origin);

// min over ensemble of linear values, truncated to [0, cap].
class LinearEnsembleValue final : public StepValueFn {
 public:
  LinearEnsembleValue(std::vector<Eigen::VectorXd> thetas, double cap);
  double value(const Eigen::VectorXd& x) const override;
  double cap() const override { return cap_; }
  void serialize(std::string& out) const override;
  const std::vector<Eigen::VectorXd>& thetas() const { return thetas_; }

 private:
  std::vector<Eigen::VectorXd> thetas_;
  double cap_;
};

// Linear LCB: <phi, theta> - beta ||phi||_{Lambda^-1}, truncated.
class LinearLcbValue final : public StepValueFn {
 public:
  LinearLcbValue(Eigen::VectorXd theta, double beta,
                 std::shared_ptr<const uq::CovarianceAccumulator> cov,
                 double cap);
  double value(const Eigen::VectorXd& x) const override;
  double cap() const override { return cap_; }
  void serialize(std::string& out) const override;
  const Eigen::VectorXd& theta() const { return theta_; }

 private:
  Eigen::VectorXd theta_;
  double beta_;
  std::shared_ptr<const uq::CovarianceAccumulator> cov_;
  double cap_;
};

// min over an ensemble of two-layer networks, truncated.
class NetEnsembleValue final : public StepValueFn {
 public:
  NetEnsembleValue(std::vector<models::NetParams> members, double cap);
  double value(const Eigen::VectorXd& x) const override;
  double cap() const override { return cap_; }
  void serialize(std::string& out) const override;
  int members() const { return static_cast<int>(members_.size()); }
  const models::NetParams& member(int i) const { return members_.at(i); }

 private:
  std::vector<models::NetParams> members_;
  double cap_;
};

// Network LCB: f(x; W) - beta ||g(x; W*)||_{Lambda^-1}, truncated; the
// gradient features are taken at the trained weights or at W0.
class NetLcbValue final : public StepValueFn {
 public:
  NetLcbValue(models::NetParams net, double beta,
              std::shared_ptr<const uq::CovarianceAccumulator> cov,
              bool grad_at_init, double cap);
  double value(const Eigen::VectorXd& x) const override;
  double cap() const override { return cap_; }
  void serialize(std::string& out) const override;

 private:
  models::NetParams net_;
  double beta_;
  std::shared_ptr<const uq::CovarianceAccumulator> cov_;
  bool grad_at_init_;
  double cap_;
};

// min over an ensemble of depth-2 networks (experiment mode), truncated.
class Mlp2EnsembleValue final : public StepValueFn {
 public:
  Mlp2EnsembleValue(std::vector<models::Mlp2> members, double cap);
  double value(const Eigen::VectorXd& x) const override;
  double cap() const override { return cap_; }
  void serialize(std::string& out) const override;

 private:
  std::vector<models::Mlp2> members_;
  double cap_;
};

class Mlp2LcbValue final : public StepValueFn {
 public:
  Mlp2LcbValue(models::Mlp2 net, double beta,
               std::shared_ptr<const uq::CovarianceAccumulator> cov,
               double cap);
  double value(const Eigen::VectorXd& x) const override;
  double cap() const override { return cap_; }
  void serialize(std::string& out) const override;

 private:
  models::Mlp2 net_;
  double beta_;
  std::shared_ptr<const uq::CovarianceAccumulator> cov_;
  double cap_;
};

// One backward-induction step: fits the step-h value estimate from model
// inputs X (one record per row) and unperturbed targets r + V_next.
std::unique_ptr<StepValueFn> fit_step(Algo algo, const FitConfig& cfg,
                                      const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& targets, int h,
                                      int horizon);

// ------------------------------------------------------------------ //
// Policies: step-indexed greedy action selection.
// ------------------------------------------------------------------ //

class Policy {
 public:
  enum class Kind { kMdp, kBandit };

  Kind kind() const { return kind_; }
  Algo algo() const { return algo_; }
  int horizon() const { return static_cast<int>(steps_.size()); }

  int select_mdp(int h, int s) const;
  double value_mdp(int h, int s, int a) const;

  int select_bandit(const Eigen::VectorXd& state) const;
  double value_bandit(const Eigen::VectorXd& state, int a) const;

  std::string serialize() const;
  static std::unique_ptr<Policy> deserialize(const std::string& bytes,
                                             const std::string& origin);

  const envs::LinearMdpSpec& mdp_spec() const;
  const StepValueFn& step_fn(int h) const;

 private:
  friend std::unique_ptr<Policy> fit_mdp(const envs::LinearMdpSpec&,
                                         const data::OfflineDataset&, Algo,
                                         const FitConfig&);
  friend std::unique_ptr<Policy> fit_bandit(const envs::BanditTask&,
                                            const data::OfflineDataset&, Algo,
                                            const FitConfig&);
  Policy() = default;

  Eigen::VectorXd mdp_input(int s, int a) const;
  Eigen::VectorXd bandit_input(const Eigen::VectorXd& state, int a) const;

  Kind kind_ = Kind::kMdp;
  Algo algo_ = Algo::kLinGreedy;
  bool neural_input_ = false;  // normalize MDP features for network models
  int bandit_dim_ = 0;
  int bandit_actions_ = 0;
  std::shared_ptr<const envs::LinearMdpSpec> spec_;
  std::vector<std::unique_ptr<StepValueFn>> steps_;  // index h-1
};

std::unique_ptr<Policy> fit_mdp(const envs::LinearMdpSpec& spec,
                                const data::OfflineDataset& ds, Algo algo,
                                const FitConfig& cfg);
std::unique_ptr<Policy> fit_bandit(const envs::BanditTask& task,
                                   const data::OfflineDataset& ds, Algo algo,
                                   const FitConfig& cfg);

}  // namespace viper::algos

#endif
