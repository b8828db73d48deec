#include "dataset.hpp"

#include <sstream>

#include "errors.hpp"
#include "textio.hpp"

namespace viper::data {

std::vector<SplitBucket> split_indices(int K, int H) {
  if (H < 1) throw ConfigError("H must be >= 1");
  if (K < H)
    throw ConfigError("K = " + std::to_string(K) + " < H = " +
                      std::to_string(H) + ": no trajectories left per step");
  const int kprime = K / H;
  std::vector<SplitBucket> buckets(H);
  for (int h = 1; h <= H; ++h)
    buckets[h - 1] = {(H - h) * kprime + 1, (H - h + 1) * kprime};
  return buckets;
}

OfflineDataset OfflineDataset::collect_mdp(const envs::LinearMdpSpec& spec,
                                           int K, uint64_t seed,
                                           bool split_enabled) {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (split_enabled) split_indices(K, spec.horizon());  // validate K >= H
  OfflineDataset ds;
  ds.kind_ = Kind::kMdp;
  ds.K_ = K;
  ds.H_ = spec.horizon();
  ds.seed_ = seed;
  ds.split_enabled_ = split_enabled;
  ds.mdp_.resize(static_cast<size_t>(K) * spec.horizon());
  rng::Stream rng = rng::Stream::substream(seed, {0x64617461u});
  for (int k = 0; k < K; ++k) {
    int s = static_cast<int>(rng.uniform_int(2));  // uniform initial state
    for (int h = 1; h <= spec.horizon(); ++h) {
      const int a = spec.sample_behavior_action(s, rng);
      const double r = spec.mean_reward(h, s, a);
      const int s_next = spec.sample_next_state(h, s, a, rng);
      ds.mdp_[static_cast<size_t>(k) * spec.horizon() + (h - 1)] = {
          static_cast<int16_t>(s), static_cast<int16_t>(a),
          static_cast<int16_t>(s_next), r};
      s = s_next;
    }
  }
  return ds;
}

OfflineDataset OfflineDataset::collect_bandit(const envs::BanditTask& task,
                                              int K, uint64_t seed,
                                              bool split_enabled) {
  if (K < 1) throw ConfigError("K must be >= 1");
  OfflineDataset ds;
  ds.kind_ = Kind::kBandit;
  ds.K_ = K;
  ds.H_ = 1;
  ds.state_dim_ = task.state_dim();
  ds.seed_ = seed;
  ds.split_enabled_ = split_enabled;
  ds.bandit_.reserve(K);
  rng::Stream rng = rng::Stream::substream(seed, {0x64617461u});
  for (int k = 0; k < K; ++k) {
    const envs::BanditState s = task.draw_state(rng);
    const int opt = task.optimal_action(s);
    int a;
    if (rng.uniform() < 1.0 - task.epsilon()) {
      a = opt;
    } else {
      // uniform over the non-optimal actions
      a = static_cast<int>(rng.uniform_int(task.n_actions() - 1));
      if (a >= opt) ++a;
    }
    const double r = task.observed_reward(s, a, rng);
    ds.bandit_.push_back({s.x, a, r});
  }
  return ds;
}

std::vector<int> bucket_indices(int K, int H, int h, bool split_enabled) {
  if (h < 1 || h > H)
    throw DomainError("step " + std::to_string(h) + " outside 1.." +
                      std::to_string(H));
  std::vector<int> idx;
  if (split_enabled) {
    const SplitBucket b = split_indices(K, H)[h - 1];
    idx.reserve(b.hi - b.lo + 1);
    for (int k = b.lo; k <= b.hi; ++k) idx.push_back(k - 1);
  } else {
    idx.reserve(K);
    for (int k = 0; k < K; ++k) idx.push_back(k);
  }
  return idx;
}

std::vector<int> OfflineDataset::bucket(int h) const {
  return bucket_indices(K_, H_, h, split_enabled_);
}

const MdpTransition& OfflineDataset::mdp_at(int traj, int h) const {
  if (kind_ != Kind::kMdp) throw DomainError("not an MDP dataset");
  if (traj < 0 || traj >= K_ || h < 1 || h > H_)
    throw DomainError("transition index out of range");
  return mdp_[static_cast<size_t>(traj) * H_ + (h - 1)];
}

const BanditRecord& OfflineDataset::bandit_at(int traj) const {
  if (kind_ != Kind::kBandit) throw DomainError("not a bandit dataset");
  if (traj < 0 || traj >= K_) throw DomainError("record index out of range");
  return bandit_[traj];
}

std::string OfflineDataset::serialize() const {
  std::string out;
  out += "# format = viper-dataset-v1\n";
  out += std::string("# kind = ") + (kind_ == Kind::kMdp ? "mdp" : "bandit") + "\n";
  out += "# K = " + std::to_string(K_) + "\n";
  out += "# H = " + std::to_string(H_) + "\n";
  out += "# seed = " + std::to_string(seed_) + "\n";
  out += "# split_enabled = " + std::to_string(split_enabled_ ? 1 : 0) + "\n";
  if (kind_ == Kind::kMdp) {
    out += "# columns = traj h state action reward next_state\n";
    for (int k = 0; k < K_; ++k)
      for (int h = 1; h <= H_; ++h) {
        const MdpTransition& t = mdp_[static_cast<size_t>(k) * H_ + (h - 1)];
        out += std::to_string(k) + " " + std::to_string(h) + " " +
               std::to_string(t.state) + " " + std::to_string(t.action) + " " +
               textio::format_real(t.reward) + " " +
               std::to_string(t.next_state) + "\n";
      }
  } else {
    out += "# state_dim = " + std::to_string(state_dim_) + "\n";
    out += "# columns = traj action reward state...\n";
    for (int k = 0; k < K_; ++k) {
      const BanditRecord& rec = bandit_[k];
      out += std::to_string(k) + " " + std::to_string(rec.action) + " " +
             textio::format_real(rec.reward);
      for (int j = 0; j < state_dim_; ++j)
        out += " " + textio::format_real(rec.state[j]);
      out += "\n";
    }
  }
  return out;
}

OfflineDataset OfflineDataset::deserialize(const std::string& text,
                                           const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  textio::KvMap header;
  std::vector<std::vector<double>> rows;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = textio::trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      textio::KvMap kv = textio::KvMap::parse(t.substr(1), origin);
      for (const auto& [k, v] : kv.entries()) header.set(k, v);
      continue;
    }
    std::vector<double> row;
    for (const std::string& tok : textio::split(t, ' '))
      if (!tok.empty()) row.push_back(textio::parse_real(tok));
    rows.push_back(std::move(row));
  }
  if (!header.has("kind"))
    throw FormatError(origin + ": missing '# kind = ...' header");

  OfflineDataset ds;
  ds.K_ = static_cast<int>(header.get_int("K"));
  ds.H_ = static_cast<int>(header.get_int("H"));
  ds.seed_ = header.get_uint("seed");
  ds.split_enabled_ = header.get_int("split_enabled") != 0;
  const std::string kind = header.get("kind");
  if (kind == "mdp") {
    ds.kind_ = Kind::kMdp;
    if (static_cast<long>(rows.size()) != static_cast<long>(ds.K_) * ds.H_)
      throw FormatError(origin + ": expected " +
                        std::to_string(static_cast<long>(ds.K_) * ds.H_) +
                        " transitions, found " + std::to_string(rows.size()));
    ds.mdp_.resize(rows.size());
    for (const auto& row : rows) {
      if (row.size() != 6) throw FormatError(origin + ": bad mdp row width");
      const int k = static_cast<int>(row[0]);
      const int h = static_cast<int>(row[1]);
      if (k < 0 || k >= ds.K_ || h < 1 || h > ds.H_)
        throw FormatError(origin + ": transition index out of range");
      ds.mdp_[static_cast<size_t>(k) * ds.H_ + (h - 1)] = {
          static_cast<int16_t>(row[2]), static_cast<int16_t>(row[3]),
          static_cast<int16_t>(row[5]), row[4]};
    }
  } else if (kind == "bandit") {
    ds.kind_ = Kind::kBandit;
    ds.state_dim_ = static_cast<int>(header.get_int("state_dim"));
    if (static_cast<int>(rows.size()) != ds.K_)
      throw FormatError(origin + ": expected " + std::to_string(ds.K_) +
                        " records, found " + std::to_string(rows.size()));
    ds.bandit_.resize(rows.size());
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != 3 + ds.state_dim_)
        throw FormatError(origin + ": bad bandit row width");
      const int k = static_cast<int>(row[0]);
      if (k < 0 || k >= ds.K_)
        throw FormatError(origin + ": record index out of range");
      BanditRecord rec;
      rec.action = static_cast<int>(row[1]);
      rec.reward = row[2];
      rec.state.resize(ds.state_dim_);
      for (int j = 0; j < ds.state_dim_; ++j) rec.state[j] = row[3 + j];
      ds.bandit_[k] = std::move(rec);
    }
  } else {
    throw FormatError(origin + ": unknown kind '" + kind + "'");
  }
  return ds;
}

}  // namespace viper::data
