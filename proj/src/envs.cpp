#include "envs.hpp"

#include <cmath>

#include "errors.hpp"
#include "textio.hpp"

namespace viper::envs {

namespace {
int delta00(int s, int a) { return (s == 0 && a == 0) ? 1 : 0; }
}  // namespace

LinearMdpSpec LinearMdpSpec::make_hard(int horizon, uint64_t seed) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  LinearMdpSpec spec;
  spec.horizon_ = horizon;
  spec.seed_ = seed;
  rng::Stream rng = rng::Stream::substream(seed, {0x616cu});
  spec.alpha_.resize(horizon);
  for (int h = 0; h < horizon; ++h)
    spec.alpha_[h] = static_cast<uint8_t>(rng.uniform_int(2));
  for (int a = 0; a < kActions; ++a)
    for (int j = 0; j < kCodeBits; ++j)
      spec.codes_[a][j] = ((a >> j) & 1) ? 1.0 : -1.0;
  return spec;
}

void LinearMdpSpec::check_sa(int s, int a) const {
  if (s < 0 || s >= kStates)
    throw DomainError("state " + std::to_string(s) + " outside {0,1}");
  if (a < 0 || a >= kActions)
    throw DomainError("action " + std::to_string(a) + " outside 0..99");
}

const std::array<double, LinearMdpSpec::kCodeBits>& LinearMdpSpec::action_code(
    int a) const {
  if (a < 0 || a >= kActions)
    throw DomainError("action " + std::to_string(a) + " outside 0..99");
  return codes_[a];
}

Eigen::VectorXd LinearMdpSpec::feature(int s, int a) const {
  check_sa(s, a);
  Eigen::VectorXd phi(kFeatDim);
  for (int j = 0; j < kCodeBits; ++j) phi[j] = codes_[a][j];
  const int d = delta00(s, a);
  phi[kCodeBits] = d;
  phi[kCodeBits + 1] = 1 - d;
  return phi;
}

double LinearMdpSpec::transition_prob(int h, int s, int a, int s_next) const {
  check_sa(s, a);
  if (h < 1 || h > horizon_)
    throw DomainError("step " + std::to_string(h) + " outside 1.." +
                      std::to_string(horizon_));
  if (s_next < 0 || s_next >= kStates)
    throw DomainError("next state " + std::to_string(s_next) + " outside {0,1}");
  const int alpha = alpha_[h - 1];
  const int d = delta00(s, a);
  return d * ((1 - s_next) ^ alpha) + (1 - d) * (s_next ^ alpha);
}

double LinearMdpSpec::mean_reward(int h, int s, int a) const {
  check_sa(s, a);
  if (h < 1 || h > horizon_)
    throw DomainError("step " + std::to_string(h) + " outside 1.." +
                      std::to_string(horizon_));
  return delta00(s, a) ? high_reward_ : 1.0 - high_reward_;
}

int LinearMdpSpec::sample_next_state(int h, int s, int a,
                                     rng::Stream& rng) const {
  const double p0 = transition_prob(h, s, a, 0);
  return rng.uniform() < p0 ? 0 : 1;
}

int LinearMdpSpec::sample_behavior_action(int s, rng::Stream& rng) const {
  if (s != 0 && s != 1) throw DomainError("state outside {0,1}");
  if (rng.uniform() < behavior_p_) return 0;
  if (s == 0) return 1;
  return 1 + static_cast<int>(rng.uniform_int(kActions - 1));
}

double LinearMdpSpec::behavior_prob(int s, int a) const {
  check_sa(s, a);
  if (s == 0) {
    if (a == 0) return behavior_p_;
    if (a == 1) return 1.0 - behavior_p_;
    return 0.0;
  }
  if (a == 0) return behavior_p_;
  return (1.0 - behavior_p_) / (kActions - 1);
}

std::string LinearMdpSpec::serialize() const {
  textio::KvMap kv;
  kv.set("type", "hard-linear-mdp");
  kv.set_int("horizon", horizon_);
  kv.set_uint("seed", seed_);
  kv.set_real("high_reward", high_reward_);
  kv.set_real("behavior_p", behavior_p_);
  std::string bits(alpha_.size(), '0');
  for (size_t h = 0; h < alpha_.size(); ++h) bits[h] = alpha_[h] ? '1' : '0';
  kv.set("alpha_bits", bits);
  return kv.serialize();
}

LinearMdpSpec LinearMdpSpec::deserialize(const std::string& text,
                                         const std::string& origin) {
  textio::KvMap kv = textio::KvMap::parse(text, origin);
  if (kv.get("type") != "hard-linear-mdp")
    throw FormatError(origin + ": unexpected type '" + kv.get("type") + "'");
  LinearMdpSpec spec =
      make_hard(static_cast<int>(kv.get_int("horizon")), kv.get_uint("seed"));
  spec.high_reward_ = kv.get_real("high_reward");
  spec.behavior_p_ = kv.get_real("behavior_p");
  const std::string& bits = kv.get("alpha_bits");
  if (static_cast<int>(bits.size()) != spec.horizon_)
    throw FormatError(origin + ": alpha_bits length " +
                      std::to_string(bits.size()) + " != horizon " +
                      std::to_string(spec.horizon_));
  for (int h = 0; h < spec.horizon_; ++h) {
    if (bits[h] != '0' && bits[h] != '1')
      throw FormatError(origin + ": alpha_bits must be 0/1");
    spec.alpha_[h] = bits[h] == '1';
  }
  return spec;
}

const char* bandit_kind_name(BanditKind k) {
  switch (k) {
    case BanditKind::kCos: return "cos";
    case BanditKind::kExp: return "exp";
    case BanditKind::kMnist: return "mnist";
  }
  return "?";
}

BanditKind bandit_kind_from_name(const std::string& name) {
  if (name == "cos") return BanditKind::kCos;
  if (name == "exp") return BanditKind::kExp;
  if (name == "mnist") return BanditKind::kMnist;
  throw ConfigError("unknown bandit kind '" + name + "'");
}

BanditTask BanditTask::make_synthetic(BanditKind kind, int dim, int n_actions,
                                      double epsilon, double obs_noise,
                                      uint64_t seed) {
  if (kind == BanditKind::kMnist)
    throw ConfigError("mnist task requires an image store");
  if (dim < 1 || n_actions < 2)
    throw ConfigError("bandit needs dim >= 1 and n_actions >= 2");
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ConfigError("epsilon must be in [0,1]");
  BanditTask t;
  t.kind_ = kind;
  t.dim_ = dim;
  t.n_actions_ = n_actions;
  t.epsilon_ = epsilon;
  t.obs_noise_ = obs_noise;
  t.seed_ = seed;
  rng::Stream rng = rng::Stream::substream(seed, {0x7468u});
  t.params_.reserve(n_actions);
  for (int a = 0; a < n_actions; ++a)
    t.params_.push_back(random_unit_vector(dim, rng));
  return t;
}

BanditTask BanditTask::make_mnist(
    std::shared_ptr<const ingest::ImageStore> store, double epsilon,
    double obs_noise) {
  if (!store || store->count() == 0) throw ConfigError("empty image store");
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ConfigError("epsilon must be in [0,1]");
  BanditTask t;
  t.kind_ = BanditKind::kMnist;
  t.dim_ = store->pixels();
  t.n_actions_ = 10;
  t.epsilon_ = epsilon;
  t.obs_noise_ = obs_noise;
  t.store_ = std::move(store);
  return t;
}

const Eigen::VectorXd& BanditTask::action_param(int a) const {
  if (a < 0 || a >= n_actions_ || kind_ == BanditKind::kMnist)
    throw DomainError("no action parameter for action " + std::to_string(a));
  return params_[a];
}

BanditState BanditTask::draw_state(rng::Stream& rng) const {
  BanditState s;
  if (kind_ == BanditKind::kMnist) {
    s.index = static_cast<int>(rng.uniform_int(store_->count()));
    s.x = store_->images.row(s.index).transpose();
  } else {
    s.x = random_unit_vector(dim_, rng);
  }
  return s;
}

double BanditTask::mean_reward(const Eigen::VectorXd& s, int a) const {
  if (s.size() != dim_)
    throw DomainError("state dimension " + std::to_string(s.size()) +
                      " != task dimension " + std::to_string(dim_));
  if (a < 0 || a >= n_actions_)
    throw DomainError("action " + std::to_string(a) + " outside 0.." +
                      std::to_string(n_actions_ - 1));
  switch (kind_) {
    case BanditKind::kCos:
      return std::cos(3.0 * s.dot(params_[a]));
    case BanditKind::kExp: {
      const double u = s.dot(params_[a]);
      return std::exp(-10.0 * u * u);
    }
    case BanditKind::kMnist:
      throw DomainError("mnist rewards need a drawn state with its index");
  }
  return 0.0;
}

double BanditTask::mean_reward(const BanditState& s, int a) const {
  if (kind_ == BanditKind::kMnist) {
    if (s.index < 0 || s.index >= store_->count())
      throw DomainError("state index " + std::to_string(s.index) +
                        " outside image store");
    if (a < 0 || a >= n_actions_)
      throw DomainError("action " + std::to_string(a) + " outside 0..9");
    return store_->labels[s.index] == a ? 1.0 : 0.0;
  }
  return mean_reward(s.x, a);
}

double BanditTask::observed_reward(const BanditState& s, int a,
                                   rng::Stream& rng) const {
  double r = mean_reward(s, a);
  if (obs_noise_ > 0.0) r += obs_noise_ * rng.normal();
  return r;
}

int BanditTask::optimal_action(const BanditState& s) const {
  if (kind_ == BanditKind::kMnist) return store_->labels[s.index];
  int best = 0;
  double best_r = mean_reward(s.x, 0);
  for (int a = 1; a < n_actions_; ++a) {
    const double r = mean_reward(s.x, a);
    if (r > best_r) {
      best_r = r;
      best = a;
    }
  }
  return best;
}

double BanditTask::optimal_mean_reward(const BanditState& s) const {
  return mean_reward(s, optimal_action(s));
}

std::string BanditTask::serialize() const {
  if (kind_ == BanditKind::kMnist)
    throw ConfigError("mnist task is reconstructed from its IDX files");
  textio::KvMap kv;
  kv.set("type", "bandit");
  kv.set("kind", bandit_kind_name(kind_));
  kv.set_int("dim", dim_);
  kv.set_int("n_actions", n_actions_);
  kv.set_real("epsilon", epsilon_);
  kv.set_real("obs_noise", obs_noise_);
  kv.set_uint("seed", seed_);
  for (int a = 0; a < n_actions_; ++a) {
    std::string row;
    for (int j = 0; j < dim_; ++j) {
      if (j) row += ' ';
      row += textio::format_real(params_[a][j]);
    }
    kv.set("theta_" + std::to_string(a), row);
  }
  return kv.serialize();
}

BanditTask BanditTask::deserialize(const std::string& text,
                                   const std::string& origin) {
  textio::KvMap kv = textio::KvMap::parse(text, origin);
  if (kv.get("type") != "bandit")
    throw FormatError(origin + ": unexpected type '" + kv.get("type") + "'");
  BanditTask t;
  t.kind_ = bandit_kind_from_name(kv.get("kind"));
  t.dim_ = static_cast<int>(kv.get_int("dim"));
  t.n_actions_ = static_cast<int>(kv.get_int("n_actions"));
  t.epsilon_ = kv.get_real("epsilon");
  t.obs_noise_ = kv.get_real("obs_noise");
  t.seed_ = kv.get_uint("seed");
  t.params_.resize(t.n_actions_);
  for (int a = 0; a < t.n_actions_; ++a) {
    const std::string& row = kv.get("theta_" + std::to_string(a));
    Eigen::VectorXd v(t.dim_);
    int j = 0;
    for (const std::string& tok : textio::split(row, ' ')) {
      if (tok.empty()) continue;
      if (j >= t.dim_) throw FormatError(origin + ": too many entries in theta");
      v[j++] = textio::parse_real(tok);
    }
    if (j != t.dim_) throw FormatError(origin + ": short theta row");
    t.params_[a] = v;
  }
  return t;
}

Eigen::VectorXd action_embedding(const Eigen::VectorXd& s, int a,
                                 int n_actions) {
  if (a < 0 || a >= n_actions)
    throw DomainError("action " + std::to_string(a) + " outside 0.." +
                      std::to_string(n_actions - 1));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(s.size() * n_actions);
  const double norm = s.norm();
  if (norm > 0.0)
    out.segment(a * s.size(), s.size()) = s / norm;
  return out;
}

Eigen::VectorXd random_unit_vector(int dim, rng::Stream& rng) {
  Eigen::VectorXd v(dim);
  double norm2;
  do {
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
    norm2 = v.squaredNorm();
  } while (norm2 == 0.0);
  return v / std::sqrt(norm2);
}

}  // namespace viper::envs
