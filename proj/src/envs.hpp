#ifndef VIPER_ENVS_HPP
#define VIPER_ENVS_HPP

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "idx.hpp"
#include "rng.hpp"

namespace viper::envs {

// Two-state hard instance of a linear MDP. The feature map is
// phi(s,a) = [u_a, delta(s,a), 1 - delta(s,a)] with delta(s,a) = 1 iff
// (s,a) = (0,0); u_a is the signed binary code of the action. Transitions
// are deterministic and controlled by the per-step bits alpha_h; the mean
// reward is high_reward at (0,0) and 1 - high_reward elsewhere.
//
// Immutable after construction.
class LinearMdpSpec {
 public:
  static constexpr int kStates = 2;
  static constexpr int kActions = 100;
  static constexpr int kFeatDim = 10;
  static constexpr int kCodeBits = 8;

  static LinearMdpSpec make_hard(int horizon, uint64_t seed);

  int horizon() const { return horizon_; }
  uint64_t seed() const { return seed_; }
  double high_reward() const { return high_reward_; }
  double behavior_p() const { return behavior_p_; }
  const std::vector<uint8_t>& alpha_bits() const { return alpha_; }

  // Signed binary code of action a, entries in {-1, +1}, least
  // significant bit first.
  const std::array<double, kCodeBits>& action_code(int a) const;

  Eigen::VectorXd feature(int s, int a) const;
  double transition_prob(int h, int s, int a, int s_next) const;
  double mean_reward(int h, int s, int a) const;

  int sample_next_state(int h, int s, int a, rng::Stream& rng) const;

  // Behaviour policy: from state 0 only actions {0,1} with P(0) = p;
  // from state 1 action 0 with P = p, the rest uniform over 1..99.
  int sample_behavior_action(int s, rng::Stream& rng) const;
  double behavior_prob(int s, int a) const;

  // Key-value text serialization; integers and bit vectors round-trip
  // exactly, reals are written with 17 significant digits.
  std::string serialize() const;
  static LinearMdpSpec deserialize(const std::string& text,
                                   const std::string& origin);

 private:
  LinearMdpSpec() = default;
  void check_sa(int s, int a) const;

  int horizon_ = 0;
  uint64_t seed_ = 0;
  double high_reward_ = 0.99;
  double behavior_p_ = 0.6;
  std::vector<uint8_t> alpha_;
  std::array<std::array<double, kCodeBits>, kActions> codes_{};
};

enum class BanditKind { kCos, kExp, kMnist };

const char* bandit_kind_name(BanditKind k);
BanditKind bandit_kind_from_name(const std::string& name);

// A state drawn from the task; `index` is the image row for the MNIST
// task and -1 for synthetic tasks.
struct BanditState {
  Eigen::VectorXd x;
  int index = -1;
};

// Contextual bandit task (horizon-1 decision problem). Synthetic kinds
// hold unit action parameters theta_a; the MNIST kind holds an ingested
// image store and rewards the true label. Immutable after construction.
class BanditTask {
 public:
  static BanditTask make_synthetic(BanditKind kind, int dim, int n_actions,
                                   double epsilon, double obs_noise,
                                   uint64_t seed);
  static BanditTask make_mnist(std::shared_ptr<const ingest::ImageStore> store,
                               double epsilon, double obs_noise);

  BanditKind kind() const { return kind_; }
  int state_dim() const { return dim_; }
  int n_actions() const { return n_actions_; }
  double epsilon() const { return epsilon_; }
  double obs_noise() const { return obs_noise_; }
  uint64_t seed() const { return seed_; }
  const Eigen::VectorXd& action_param(int a) const;
  const std::shared_ptr<const ingest::ImageStore>& image_store() const {
    return store_;
  }

  BanditState draw_state(rng::Stream& rng) const;

  // Mean reward of an arbitrary state vector. For the MNIST kind the
  // label is recovered from the store, so the vector must be one of the
  // drawn states (pass the BanditState overload when available).
  double mean_reward(const Eigen::VectorXd& s, int a) const;
  double mean_reward(const BanditState& s, int a) const;

  // Observed reward: mean reward plus N(0, obs_noise^2) when configured.
  double observed_reward(const BanditState& s, int a, rng::Stream& rng) const;

  int optimal_action(const BanditState& s) const;
  double optimal_mean_reward(const BanditState& s) const;

  std::string serialize() const;  // synthetic kinds only
  static BanditTask deserialize(const std::string& text,
                                const std::string& origin);

 private:
  BanditTask() = default;

  BanditKind kind_ = BanditKind::kCos;
  int dim_ = 0;
  int n_actions_ = 0;
  double epsilon_ = 0.5;
  double obs_noise_ = 0.0;
  uint64_t seed_ = 0;
  std::vector<Eigen::VectorXd> params_;
  std::shared_ptr<const ingest::ImageStore> store_;
};

// Block embedding: state copied into block `a` of an (dim * n_actions)
// vector, zeros elsewhere, renormalized to unit length (zero states stay
// zero).
Eigen::VectorXd action_embedding(const Eigen::VectorXd& s, int a,
                                 int n_actions);

// Unit vector uniform on the sphere: gaussian draw, then normalize.
Eigen::VectorXd random_unit_vector(int dim, rng::Stream& rng);

}  // namespace viper::envs

#endif
