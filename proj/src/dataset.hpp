#ifndef VIPER_DATASET_HPP
#define VIPER_DATASET_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "envs.hpp"
#include "rng.hpp"

namespace viper::data {

// 1-based inclusive trajectory-index buckets I_h. Bucket h covers
// [(H-h) K' + 1, (H-h+1) K'] with K' = floor(K/H); the trailing K mod H
// indices are unused. Requires K >= H >= 1.
struct SplitBucket {
  int lo;  // 1-based, inclusive
  int hi;
};
std::vector<SplitBucket> split_indices(int K, int H);

// 0-based trajectory indices feeding the step-h regression: the step-h
// bucket when splitting is on, all of 0..K-1 otherwise.
std::vector<int> bucket_indices(int K, int H, int h, bool split_enabled);

struct MdpTransition {
  int16_t state;
  int16_t action;
  int16_t next_state;
  double reward;
};

struct BanditRecord {
  Eigen::VectorXd state;
  int action;
  double reward;
};

// Offline dataset of K trajectories of H steps each, recorded verbatim
// from the environment. For bandit tasks H == 1 and records carry dense
// state vectors. Immutable once collected.
class OfflineDataset {
 public:
  enum class Kind { kMdp, kBandit };

  static OfflineDataset collect_mdp(const envs::LinearMdpSpec& spec, int K,
                                    uint64_t seed, bool split_enabled);
  static OfflineDataset collect_bandit(const envs::BanditTask& task, int K,
                                       uint64_t seed, bool split_enabled);

  Kind kind() const { return kind_; }
  int K() const { return K_; }
  int H() const { return H_; }
  uint64_t seed() const { return seed_; }
  bool split_enabled() const { return split_enabled_; }
  int state_dim() const { return state_dim_; }

  // Trajectory indices (0-based) feeding the step-h regression. With the
  // split disabled this is all of 0..K-1 for every h.
  std::vector<int> bucket(int h) const;

  const MdpTransition& mdp_at(int traj, int h) const;  // traj 0-based, h 1-based
  const BanditRecord& bandit_at(int traj) const;

  // Columnar text format: '# key = value' header lines then one
  // transition per line.
  std::string serialize() const;
  static OfflineDataset deserialize(const std::string& text,
                                    const std::string& origin);

 private:
  OfflineDataset() = default;

  Kind kind_ = Kind::kMdp;
  int K_ = 0;
  int H_ = 1;
  int state_dim_ = 0;  // bandit only
  uint64_t seed_ = 0;
  bool split_enabled_ = false;
  std::vector<MdpTransition> mdp_;  // K*H, trajectory-major
  std::vector<BanditRecord> bandit_;
};

}  // namespace viper::data

#endif
