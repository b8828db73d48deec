#include "learners.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "binio.hpp"
#include "errors.hpp"

namespace viper::algos {

namespace {

// substream path tags
constexpr uint64_t kInitTag = 0x696e6974u;  // "init"
constexpr uint64_t kFitTag = 0x666974u;     // "fit"

constexpr char kPolicyMagic[8] = {'V', 'I', 'P', 'R', 'P', 'O', 'L', '1'};

double viper_cap(int h, int horizon, double psi) {
  return (horizon - h + 1) * (1.0 + psi);
}
double base_cap(int h, int horizon) { return double(horizon - h + 1); }

double truncate(double q, double cap) {
  return std::max(std::min(q, cap), 0.0);
}

void serialize_cov(std::string& out, const uq::CovarianceAccumulator& cov) {
  binio::append_pod<uint8_t>(
      out, cov.mode() == uq::CovarianceAccumulator::Mode::kFull ? 0 : 1);
  binio::append_pod<uint32_t>(out, cov.dim());
  binio::append_pod<uint32_t>(out, cov.count());
  binio::append_pod<double>(out, cov.lambda());
  const Eigen::MatrixXd m = cov.matrix();
  if (cov.mode() == uq::CovarianceAccumulator::Mode::kFull) {
    binio::append_matrix(out, m);
  } else {
    binio::append_vector(out, m.diagonal());
  }
}

std::shared_ptr<uq::CovarianceAccumulator> deserialize_cov(
    const std::string& bytes, size_t& off, const std::string& origin) {
  const uint8_t mode = binio::read_pod<uint8_t>(bytes, off, origin);
  const int dim =
      static_cast<int>(binio::read_pod<uint32_t>(bytes, off, origin));
  const int count =
      static_cast<int>(binio::read_pod<uint32_t>(bytes, off, origin));
  const double lambda = binio::read_pod<double>(bytes, off, origin);
  if (mode == 0) {
    Eigen::MatrixXd m = binio::read_matrix(bytes, off, dim, dim, origin);
    return std::make_shared<uq::CovarianceAccumulator>(
        uq::CovarianceAccumulator::from_dense(m, lambda, count));
  }
  Eigen::VectorXd d = binio::read_vector(bytes, off, origin);
  if (d.size() != dim) throw FormatError(origin + ": diagonal size mismatch");
  return std::make_shared<uq::CovarianceAccumulator>(
      uq::CovarianceAccumulator::from_diag(d, lambda, count));
}

enum StepFnTag : uint8_t {
  kTagLinearEnsemble = 1,
  kTagLinearLcb = 2,
  kTagNetEnsemble = 3,
  kTagNetLcb = 4,
  kTagMlp2Ensemble = 5,
  kTagMlp2Lcb = 6,
};

}  // namespace

const char* algo_name(Algo a) {
  switch (a) {
    case Algo::kLinViper: return "Lin-VIPeR";
    case Algo::kNeuralViper: return "Neural-VIPeR";
    case Algo::kLinLCB: return "LinLCB";
    case Algo::kLinGreedy: return "LinGreedy";
    case Algo::kNeuraLCB: return "NeuraLCB";
    case Algo::kNeuraLCBDiag: return "NeuraLCB-Diag";
    case Algo::kNeuralGreedy: return "NeuralGreedy";
  }
  return "?";
}

Algo algo_from_name(const std::string& name) {
  for (Algo a : {Algo::kLinViper, Algo::kNeuralViper, Algo::kLinLCB,
                 Algo::kLinGreedy, Algo::kNeuraLCB, Algo::kNeuraLCBDiag,
                 Algo::kNeuralGreedy})
    if (name == algo_name(a)) return a;
  throw ConfigError("unknown algorithm '" + name + "'");
}

bool algo_is_linear(Algo a) {
  return a == Algo::kLinViper || a == Algo::kLinLCB || a == Algo::kLinGreedy;
}

void FitConfig::validate(int horizon) const {
  if (ensemble_size < 1) throw ConfigError("ensemble size M must be >= 1");
  if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
  for (double s : sigma_per_step)
    if (s < 0.0) throw ConfigError("sigma must be >= 0");
  if (!sigma_per_step.empty() &&
      static_cast<int>(sigma_per_step.size()) != horizon)
    throw ConfigError("per-step sigma must have one entry per step");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  if (lambda <= 0.0) throw ConfigError("lambda must be > 0");
  if (eta <= 0.0) throw ConfigError("eta must be > 0");
  if (gd_steps < 0) throw ConfigError("J must be >= 0");
  if (psi < 0.0) throw ConfigError("psi must be >= 0");
  if (width < 2 || width % 2 != 0)
    throw ConfigError("width m must be even and >= 2");
  if (fit_threads < 1) throw ConfigError("fit_threads must be >= 1");
  if (net_depth != 1 && net_depth != 2)
    throw ConfigError("net_depth must be 1 or 2");
}

Eigen::VectorXd perturb_targets(const Eigen::VectorXd& base, double sigma,
                                rng::Stream& rng) {
  if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
  Eigen::VectorXd out = base;
  if (sigma > 0.0)
    for (Eigen::Index k = 0; k < out.size(); ++k) out[k] += sigma * rng.normal();
  return out;
}

Eigen::VectorXd lin_viper_solve_explicit(const Eigen::MatrixXd& Phi,
                                         const Eigen::VectorXd& y,
                                         double lambda,
                                         const Eigen::VectorXd& xi,
                                         const Eigen::VectorXd& zeta) {
  if (Phi.rows() != y.size() || Phi.rows() != xi.size() ||
      Phi.cols() != zeta.size())
    throw DomainError("perturbed ridge shape mismatch");
  uq::CovarianceAccumulator cov(static_cast<int>(Phi.cols()), lambda);
  for (Eigen::Index k = 0; k < Phi.rows(); ++k)
    cov.update(Phi.row(k).transpose());
  const Eigen::VectorXd rhs = Phi.transpose() * (y + xi) - lambda * zeta;
  return cov.solve(rhs);
}

Eigen::VectorXd lin_viper_solve(const Eigen::MatrixXd& Phi,
                                const Eigen::VectorXd& y, double lambda,
                                double sigma, rng::Stream& rng) {
  Eigen::VectorXd xi(Phi.rows());
  for (Eigen::Index k = 0; k < xi.size(); ++k)
    xi[k] = sigma > 0.0 ? sigma * rng.normal() : 0.0;
  Eigen::VectorXd zeta(Phi.cols());
  for (Eigen::Index j = 0; j < zeta.size(); ++j)
    zeta[j] = sigma > 0.0 ? sigma * rng.normal() : 0.0;
  return lin_viper_solve_explicit(Phi, y, lambda, xi, zeta);
}

int greedy_argmax(const Eigen::VectorXd& action_values) {
  int best = 0;
  for (int a = 1; a < action_values.size(); ++a)
    if (action_values[a] > action_values[best]) best = a;
  return best;
}

// ------------------------------------------------------------------ //

LinearEnsembleValue::LinearEnsembleValue(std::vector<Eigen::VectorXd> thetas,
                                         double cap)
    : thetas_(std::move(thetas)), cap_(cap) {
  if (thetas_.empty()) throw ConfigError("empty ensemble");
}

double LinearEnsembleValue::value(const Eigen::VectorXd& x) const {
  double q = thetas_[0].dot(x);
  for (size_t i = 1; i < thetas_.size(); ++i)
    q = std::min(q, thetas_[i].dot(x));
  return truncate(q, cap_);
}

void LinearEnsembleValue::serialize(std::string& out) const {
  binio::append_pod<uint8_t>(out, kTagLinearEnsemble);
  binio::append_pod<double>(out, cap_);
  binio::append_pod<uint32_t>(out, static_cast<uint32_t>(thetas_.size()));
  for (const auto& t : thetas_) binio::append_vector(out, t);
}

LinearLcbValue::LinearLcbValue(
    Eigen::VectorXd theta, double beta,
    std::shared_ptr<const uq::CovarianceAccumulator> cov, double cap)
    : theta_(std::move(theta)), beta_(beta), cov_(std::move(cov)), cap_(cap) {}

double LinearLcbValue::value(const Eigen::VectorXd& x) const {
  const double q = theta_.dot(x) - beta_ * cov_->quad_form(x);
  return truncate(q, cap_);
}

void LinearLcbValue::serialize(std::string& out) const {
  binio::append_pod<uint8_t>(out, kTagLinearLcb);
  binio::append_pod<double>(out, cap_);
  binio::append_pod<double>(out, beta_);
  binio::append_vector(out, theta_);
  serialize_cov(out, *cov_);
}

NetEnsembleValue::NetEnsembleValue(std::vector<models::NetParams> members,
                                   double cap)
    : members_(std::move(members)), cap_(cap) {
  if (members_.empty()) throw ConfigError("empty ensemble");
}

double NetEnsembleValue::value(const Eigen::VectorXd& x) const {
  double q = models::net_forward(members_[0], x);
  for (size_t i = 1; i < members_.size(); ++i)
    q = std::min(q, models::net_forward(members_[i], x));
  return truncate(q, cap_);
}

void NetEnsembleValue::serialize(std::string& out) const {
  binio::append_pod<uint8_t>(out, kTagNetEnsemble);
  binio::append_pod<double>(out, cap_);
  binio::append_pod<uint32_t>(out, static_cast<uint32_t>(members_.size()));
  for (const auto& p : members_)
    binio::append_string(out, models::net_checkpoint_serialize(p));
}

NetLcbValue::NetLcbValue(models::NetParams net, double beta,
                         std::shared_ptr<const uq::CovarianceAccumulator> cov,
                         bool grad_at_init, double cap)
    : net_(std::move(net)),
      beta_(beta),
      cov_(std::move(cov)),
      grad_at_init_(grad_at_init),
      cap_(cap) {}

double NetLcbValue::value(const Eigen::VectorXd& x) const {
  const double f = models::net_forward(net_, x);
  const Eigen::VectorXd g =
      models::net_grad_at(net_, grad_at_init_ ? net_.W0 : net_.W, x);
  const double q = f - beta_ * cov_->quad_form(g);
  return truncate(q, cap_);
}

void NetLcbValue::serialize(std::string& out) const {
  binio::append_pod<uint8_t>(out, kTagNetLcb);
  binio::append_pod<double>(out, cap_);
  binio::append_pod<double>(out, beta_);
  binio::append_pod<uint8_t>(out, grad_at_init_ ? 1 : 0);
  binio::append_string(out, models::net_checkpoint_serialize(net_));
  serialize_cov(out, *cov_);
}

Mlp2EnsembleValue::Mlp2EnsembleValue(std::vector<models::Mlp2> members,
                                     double cap)
    : members_(std::move(members)), cap_(cap) {
  if (members_.empty()) throw ConfigError("empty ensemble");
}

double Mlp2EnsembleValue::value(const Eigen::VectorXd& x) const {
  double q = models::mlp2_forward(members_[0], x);
  for (size_t i = 1; i < members_.size(); ++i)
    q = std::min(q, models::mlp2_forward(members_[i], x));
  return truncate(q, cap_);
}

void Mlp2EnsembleValue::serialize(std::string& out) const {
  binio::append_pod<uint8_t>(out, kTagMlp2Ensemble);
  binio::append_pod<double>(out, cap_);
  binio::append_pod<uint32_t>(out, static_cast<uint32_t>(members_.size()));
  for (const auto& net : members_)
    binio::append_string(out, models::mlp2_checkpoint_serialize(net));
}

Mlp2LcbValue::Mlp2LcbValue(models::Mlp2 net, double beta,
                           std::shared_ptr<const uq::CovarianceAccumulator> cov,
                           double cap)
    : net_(std::move(net)), beta_(beta), cov_(std::move(cov)), cap_(cap) {}

double Mlp2LcbValue::value(const Eigen::VectorXd& x) const {
  const double f = models::mlp2_forward(net_, x);
  const double q = f - beta_ * cov_->quad_form(models::mlp2_grad(net_, x));
  return truncate(q, cap_);
}

void Mlp2LcbValue::serialize(std::string& out) const {
  binio::append_pod<uint8_t>(out, kTagMlp2Lcb);
  binio::append_pod<double>(out, cap_);
  binio::append_pod<double>(out, beta_);
  binio::append_string(out, models::mlp2_checkpoint_serialize(net_));
  serialize_cov(out, *cov_);
}

std::unique_ptr<StepValueFn> step_fn_deserialize(const std::string& bytes,
                                                 size_t& off,
                                                 const std::string& origin) {
  const uint8_t tag = binio::read_pod<uint8_t>(bytes, off, origin);
  const double cap = binio::read_pod<double>(bytes, off, origin);
  switch (tag) {
    case kTagLinearEnsemble: {
      const uint32_t n = binio::read_pod<uint32_t>(bytes, off, origin);
      std::vector<Eigen::VectorXd> thetas(n);
      for (uint32_t i = 0; i < n; ++i)
        thetas[i] = binio::read_vector(bytes, off, origin);
      return std::make_unique<LinearEnsembleValue>(std::move(thetas), cap);
    }
    case kTagLinearLcb: {
      const double beta = binio::read_pod<double>(bytes, off, origin);
      Eigen::VectorXd theta = binio::read_vector(bytes, off, origin);
      auto cov = deserialize_cov(bytes, off, origin);
      return std::make_unique<LinearLcbValue>(std::move(theta), beta,
                                              std::move(cov), cap);
    }
    case kTagNetEnsemble: {
      const uint32_t n = binio::read_pod<uint32_t>(bytes, off, origin);
      std::vector<models::NetParams> members(n);
      for (uint32_t i = 0; i < n; ++i)
        members[i] = models::net_checkpoint_deserialize(
            binio::read_string(bytes, off, origin), origin);
      return std::make_unique<NetEnsembleValue>(std::move(members), cap);
    }
    case kTagNetLcb: {
      const double beta = binio::read_pod<double>(bytes, off, origin);
      const bool at_init = binio::read_pod<uint8_t>(bytes, off, origin) != 0;
      models::NetParams net = models::net_checkpoint_deserialize(
          binio::read_string(bytes, off, origin), origin);
      auto cov = deserialize_cov(bytes, off, origin);
      return std::make_unique<NetLcbValue>(std::move(net), beta, std::move(cov),
                                           at_init, cap);
    }
    case kTagMlp2Ensemble: {
      const uint32_t n = binio::read_pod<uint32_t>(bytes, off, origin);
      std::vector<models::Mlp2> members(n);
      for (uint32_t i = 0; i < n; ++i)
        members[i] = models::mlp2_checkpoint_deserialize(
            binio::read_string(bytes, off, origin), origin);
      return std::make_unique<Mlp2EnsembleValue>(std::move(members), cap);
    }
    case kTagMlp2Lcb: {
      const double beta = binio::read_pod<double>(bytes, off, origin);
      models::Mlp2 net = models::mlp2_checkpoint_deserialize(
          binio::read_string(bytes, off, origin), origin);
      auto cov = deserialize_cov(bytes, off, origin);
      return std::make_unique<Mlp2LcbValue>(std::move(net), beta,
                                            std::move(cov), cap);
    }
    default:
      throw FormatError(origin + ": unknown value-function tag " +
                        std::to_string(tag));
  }
}

// ------------------------------------------------------------------ //

namespace {

// ensemble member noise for step h: xi over the records, then zeta with
// the full parameter dimension, drawn from the member substream
struct MemberNoise {
  Eigen::VectorXd targets;  // perturbed
  Eigen::MatrixXd zeta;     // parameter shape
};

MemberNoise draw_member_noise(const Eigen::VectorXd& base, double sigma,
                              int rows, int cols, uint64_t seed, int h, int i) {
  rng::Stream stream = rng::Stream::substream(seed, {kFitTag, uint64_t(h),
                                                     uint64_t(i)});
  MemberNoise noise;
  noise.targets = perturb_targets(base, sigma, stream);
  noise.zeta.resize(rows, cols);
  if (sigma > 0.0) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) noise.zeta(r, c) = sigma * stream.normal();
  } else {
    noise.zeta.setZero();
  }
  return noise;
}

std::unique_ptr<StepValueFn> fit_step_linear(Algo algo, const FitConfig& cfg,
                                             const Eigen::MatrixXd& X,
                                             const Eigen::VectorXd& targets,
                                             int h, int horizon) {
  const int dim = static_cast<int>(X.cols());
  auto cov = std::make_shared<uq::CovarianceAccumulator>(dim, cfg.lambda);
  for (Eigen::Index k = 0; k < X.rows(); ++k) cov->update(X.row(k).transpose());

  if (algo == Algo::kLinViper) {
    const double sigma_h = cfg.sigma_for_step(h);
    std::vector<Eigen::VectorXd> thetas(cfg.ensemble_size);
    for (int i = 0; i < cfg.ensemble_size; ++i) {
      MemberNoise noise =
          draw_member_noise(targets, sigma_h, dim, 1, cfg.seed, h, i);
      const Eigen::VectorXd rhs =
          X.transpose() * noise.targets - cfg.lambda * noise.zeta.col(0);
      thetas[i] = cov->solve(rhs);
    }
    return std::make_unique<LinearEnsembleValue>(std::move(thetas),
                                                 viper_cap(h, horizon, cfg.psi));
  }

  const Eigen::VectorXd theta = cov->solve(X.transpose() * targets);
  if (algo == Algo::kLinGreedy)
    return std::make_unique<LinearEnsembleValue>(
        std::vector<Eigen::VectorXd>{theta}, base_cap(h, horizon));
  return std::make_unique<LinearLcbValue>(theta, cfg.beta, std::move(cov),
                                          base_cap(h, horizon));
}

std::unique_ptr<StepValueFn> fit_step_net(Algo algo, const FitConfig& cfg,
                                          const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& targets,
                                          int h, int horizon) {
  const int dim = static_cast<int>(X.cols());
  const models::GdConfig gd{cfg.lambda, cfg.eta, cfg.gd_steps};

  auto shared_init = [&]() {
    rng::Stream stream =
        rng::Stream::substream(cfg.seed, {kInitTag, uint64_t(h)});
    return models::symmetric_init(cfg.width, dim, stream);
  };
  auto member_init = [&](int i) {
    if (!cfg.per_member_init) return shared_init();
    rng::Stream stream = rng::Stream::substream(
        cfg.seed, {kInitTag, uint64_t(h), uint64_t(i)});
    return models::symmetric_init(cfg.width, dim, stream);
  };

  if (algo == Algo::kNeuralViper) {
    const double sigma_h = cfg.sigma_for_step(h);
    std::vector<models::NetParams> members(cfg.ensemble_size);
    for (int i = 0; i < cfg.ensemble_size; ++i) members[i] = member_init(i);
    auto train_one = [&](int i) {
      MemberNoise noise =
          draw_member_noise(targets, sigma_h, cfg.width, dim, cfg.seed, h, i);
      members[i].W =
          models::net_gradient_descent(members[i], gd, X, noise.targets,
                                       noise.zeta)
              .W;
    };
    if (cfg.fit_threads > 1 && cfg.ensemble_size > 1) {
      std::vector<std::thread> pool;
      std::atomic<int> next{0};
      const int n_threads = std::min(cfg.fit_threads, cfg.ensemble_size);
      std::vector<std::exception_ptr> errors(n_threads);
      for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&, t] {
          try {
            for (int i = next.fetch_add(1); i < cfg.ensemble_size;
                 i = next.fetch_add(1))
              train_one(i);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
      for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    } else {
      for (int i = 0; i < cfg.ensemble_size; ++i) train_one(i);
    }
    return std::make_unique<NetEnsembleValue>(std::move(members),
                                              viper_cap(h, horizon, cfg.psi));
  }

  // single-model families
  models::NetParams base = shared_init();
  Eigen::MatrixXd zeta = Eigen::MatrixXd::Zero(cfg.width, dim);
  models::NetGdResult fit = models::net_gradient_descent(base, gd, X, targets, zeta);

  if (algo == Algo::kNeuralGreedy) {
    models::NetParams trained = std::move(base);
    trained.W = std::move(fit.W);
    return std::make_unique<NetEnsembleValue>(
        std::vector<models::NetParams>{std::move(trained)},
        base_cap(h, horizon));
  }

  // NeuraLCB: covariance of gradient features at the trained weights
  // (or at the initialization when requested)
  const auto mode = algo == Algo::kNeuraLCBDiag
                        ? uq::CovarianceAccumulator::Mode::kDiagonal
                        : uq::CovarianceAccumulator::Mode::kFull;
  auto cov = std::make_shared<uq::CovarianceAccumulator>(cfg.width * dim,
                                                         cfg.lambda, mode);
  const Eigen::MatrixXd& feat_w = cfg.lcb_grad_at_init ? base.W0 : fit.W;
  for (Eigen::Index k = 0; k < X.rows(); ++k)
    cov->update(models::net_grad_at(base, feat_w, X.row(k).transpose()));
  models::NetParams trained = std::move(base);
  trained.W = std::move(fit.W);
  return std::make_unique<NetLcbValue>(std::move(trained), cfg.beta,
                                       std::move(cov), cfg.lcb_grad_at_init,
                                       base_cap(h, horizon));
}

std::unique_ptr<StepValueFn> fit_step_mlp2(Algo algo, const FitConfig& cfg,
                                           const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& targets,
                                           int h, int horizon) {
  const int dim = static_cast<int>(X.cols());
  auto init_net = [&](int i, bool per_member) {
    rng::Stream stream =
        per_member ? rng::Stream::substream(
                         cfg.seed, {kInitTag, uint64_t(h), uint64_t(i)})
                   : rng::Stream::substream(cfg.seed, {kInitTag, uint64_t(h)});
    return models::mlp2_init(cfg.width, dim, stream);
  };

  if (algo == Algo::kNeuralViper) {
    const double sigma_h = cfg.sigma_for_step(h);
    std::vector<models::Mlp2> members;
    members.reserve(cfg.ensemble_size);
    for (int i = 0; i < cfg.ensemble_size; ++i) {
      models::Mlp2 net = init_net(i, cfg.per_member_init);
      rng::Stream stream = rng::Stream::substream(
          cfg.seed, {kFitTag, uint64_t(h), uint64_t(i)});
      Eigen::VectorXd ytil = perturb_targets(targets, sigma_h, stream);
      Eigen::VectorXd zeta(net.n_params());
      for (Eigen::Index j = 0; j < zeta.size(); ++j)
        zeta[j] = sigma_h > 0.0 ? sigma_h * stream.normal() : 0.0;
      models::mlp2_train_adam(net, X, ytil, cfg.lambda, zeta, cfg.adam, stream);
      members.push_back(std::move(net));
    }
    return std::make_unique<Mlp2EnsembleValue>(std::move(members),
                                               viper_cap(h, horizon, cfg.psi));
  }

  models::Mlp2 net = init_net(0, false);
  rng::Stream stream =
      rng::Stream::substream(cfg.seed, {kFitTag, uint64_t(h), 0});
  models::mlp2_train_adam(net, X, targets, cfg.lambda, Eigen::VectorXd(),
                          cfg.adam, stream);

  if (algo == Algo::kNeuralGreedy)
    return std::make_unique<Mlp2EnsembleValue>(
        std::vector<models::Mlp2>{std::move(net)}, base_cap(h, horizon));

  const auto mode = algo == Algo::kNeuraLCBDiag
                        ? uq::CovarianceAccumulator::Mode::kDiagonal
                        : uq::CovarianceAccumulator::Mode::kFull;
  auto cov = std::make_shared<uq::CovarianceAccumulator>(net.n_params(),
                                                         cfg.lambda, mode);
  for (Eigen::Index k = 0; k < X.rows(); ++k)
    cov->update(models::mlp2_grad(net, X.row(k).transpose()));
  return std::make_unique<Mlp2LcbValue>(std::move(net), cfg.beta,
                                        std::move(cov), base_cap(h, horizon));
}

}  // namespace

std::unique_ptr<StepValueFn> fit_step(Algo algo, const FitConfig& cfg,
                                      const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& targets, int h,
                                      int horizon) {
  if (X.rows() == 0) throw ConfigError("no records for step " + std::to_string(h));
  if (X.rows() != targets.size())
    throw DomainError("records/targets length mismatch");
  if (algo_is_linear(algo)) return fit_step_linear(algo, cfg, X, targets, h, horizon);
  if (cfg.net_depth == 2) return fit_step_mlp2(algo, cfg, X, targets, h, horizon);
  return fit_step_net(algo, cfg, X, targets, h, horizon);
}

// ------------------------------------------------------------------ //

int Policy::select_mdp(int h, int s) const {
  const StepValueFn& fn = step_fn(h);
  Eigen::VectorXd vals(envs::LinearMdpSpec::kActions);
  for (int a = 0; a < envs::LinearMdpSpec::kActions; ++a)
    vals[a] = fn.value(mdp_input(s, a));
  return greedy_argmax(vals);
}

double Policy::value_mdp(int h, int s, int a) const {
  return step_fn(h).value(mdp_input(s, a));
}

int Policy::select_bandit(const Eigen::VectorXd& state) const {
  if (kind_ != Kind::kBandit) throw DomainError("not a bandit policy");
  if (state.size() != bandit_dim_)
    throw DomainError("state dimension " + std::to_string(state.size()) +
                      " != policy dimension " + std::to_string(bandit_dim_));
  const StepValueFn& fn = *steps_[0];
  const double norm = state.norm();
  thread_local Eigen::VectorXd buf;
  const Eigen::Index want = static_cast<Eigen::Index>(bandit_dim_) * bandit_actions_;
  if (buf.size() != want) buf = Eigen::VectorXd::Zero(want);
  int best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < bandit_actions_; ++a) {
    if (norm > 0.0)
      buf.segment(static_cast<Eigen::Index>(a) * bandit_dim_, bandit_dim_) =
          state / norm;
    const double q = fn.value(buf);
    buf.segment(static_cast<Eigen::Index>(a) * bandit_dim_, bandit_dim_)
        .setZero();
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

double Policy::value_bandit(const Eigen::VectorXd& state, int a) const {
  if (kind_ != Kind::kBandit) throw DomainError("not a bandit policy");
  return steps_[0]->value(bandit_input(state, a));
}

Eigen::VectorXd Policy::mdp_input(int s, int a) const {
  Eigen::VectorXd phi = spec_->feature(s, a);
  if (neural_input_) phi /= phi.norm();
  return phi;
}

Eigen::VectorXd Policy::bandit_input(const Eigen::VectorXd& state, int a) const {
  return envs::action_embedding(state, a, bandit_actions_);
}

const envs::LinearMdpSpec& Policy::mdp_spec() const {
  if (kind_ != Kind::kMdp || !spec_) throw DomainError("not an MDP policy");
  return *spec_;
}

const StepValueFn& Policy::step_fn(int h) const {
  if (kind_ != Kind::kMdp) throw DomainError("not an MDP policy");
  if (h < 1 || h > horizon())
    throw DomainError("step " + std::to_string(h) + " outside 1.." +
                      std::to_string(horizon()));
  return *steps_[h - 1];
}

std::string Policy::serialize() const {
  std::string out;
  binio::append_raw(out, kPolicyMagic, sizeof kPolicyMagic);
  binio::append_endian_tag(out);
  binio::append_pod<uint8_t>(out, kind_ == Kind::kMdp ? 0 : 1);
  binio::append_string(out, algo_name(algo_));
  binio::append_pod<uint8_t>(out, neural_input_ ? 1 : 0);
  binio::append_pod<uint32_t>(out, static_cast<uint32_t>(steps_.size()));
  if (kind_ == Kind::kMdp) {
    binio::append_string(out, spec_->serialize());
  } else {
    binio::append_pod<uint32_t>(out, bandit_dim_);
    binio::append_pod<uint32_t>(out, bandit_actions_);
  }
  for (const auto& fn : steps_) fn->serialize(out);
  return out;
}

std::unique_ptr<Policy> Policy::deserialize(const std::string& bytes,
                                            const std::string& origin) {
  size_t off = 0;
  if (bytes.size() < sizeof kPolicyMagic ||
      std::memcmp(bytes.data(), kPolicyMagic, sizeof kPolicyMagic) != 0)
    throw FormatError(origin + ": not a policy file");
  off = sizeof kPolicyMagic;
  binio::check_endian_tag(bytes, off, origin);
  auto policy = std::unique_ptr<Policy>(new Policy);
  policy->kind_ =
      binio::read_pod<uint8_t>(bytes, off, origin) == 0 ? Kind::kMdp : Kind::kBandit;
  policy->algo_ = algo_from_name(binio::read_string(bytes, off, origin));
  policy->neural_input_ = binio::read_pod<uint8_t>(bytes, off, origin) != 0;
  const uint32_t H = binio::read_pod<uint32_t>(bytes, off, origin);
  if (policy->kind_ == Kind::kMdp) {
    policy->spec_ = std::make_shared<envs::LinearMdpSpec>(
        envs::LinearMdpSpec::deserialize(binio::read_string(bytes, off, origin),
                                         origin));
  } else {
    policy->bandit_dim_ =
        static_cast<int>(binio::read_pod<uint32_t>(bytes, off, origin));
    policy->bandit_actions_ =
        static_cast<int>(binio::read_pod<uint32_t>(bytes, off, origin));
  }
  policy->steps_.reserve(H);
  for (uint32_t h = 0; h < H; ++h)
    policy->steps_.push_back(step_fn_deserialize(bytes, off, origin));
  return policy;
}

// ------------------------------------------------------------------ //

std::unique_ptr<Policy> fit_mdp(const envs::LinearMdpSpec& spec,
                                const data::OfflineDataset& ds, Algo algo,
                                const FitConfig& cfg) {
  if (ds.kind() != data::OfflineDataset::Kind::kMdp)
    throw DomainError("fit_mdp needs an MDP dataset");
  if (ds.H() != spec.horizon())
    throw ConfigError("dataset horizon != environment horizon");
  cfg.validate(spec.horizon());

  auto policy = std::unique_ptr<Policy>(new Policy);
  policy->kind_ = Policy::Kind::kMdp;
  policy->algo_ = algo;
  policy->neural_input_ = !algo_is_linear(algo);
  policy->spec_ = std::make_shared<envs::LinearMdpSpec>(spec);
  const int H = spec.horizon();
  policy->steps_.resize(H);

  std::array<double, 2> v_next{0.0, 0.0};
  for (int h = H; h >= 1; --h) {
    const std::vector<int> idx =
        data::bucket_indices(ds.K(), ds.H(), h, cfg.split_enabled);
    const int n = static_cast<int>(idx.size());
    const int dim = envs::LinearMdpSpec::kFeatDim;
    Eigen::MatrixXd X(n, dim);
    Eigen::VectorXd y(n);
    for (int r = 0; r < n; ++r) {
      const data::MdpTransition& t = ds.mdp_at(idx[r], h);
      X.row(r) = policy->mdp_input(t.state, t.action).transpose();
      y[r] = t.reward + v_next[t.next_state];
    }
    policy->steps_[h - 1] = fit_step(algo, cfg, X, y, h, H);
    for (int s = 0; s < 2; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < envs::LinearMdpSpec::kActions; ++a)
        best = std::max(best,
                        policy->steps_[h - 1]->value(policy->mdp_input(s, a)));
      v_next[s] = best;
    }
  }
  return policy;
}

std::unique_ptr<Policy> fit_bandit(const envs::BanditTask& task,
                                   const data::OfflineDataset& ds, Algo algo,
                                   const FitConfig& cfg) {
  if (ds.kind() != data::OfflineDataset::Kind::kBandit)
    throw DomainError("fit_bandit needs a bandit dataset");
  if (ds.state_dim() != task.state_dim())
    throw ConfigError("dataset state dimension != task dimension");
  cfg.validate(1);

  auto policy = std::unique_ptr<Policy>(new Policy);
  policy->kind_ = Policy::Kind::kBandit;
  policy->algo_ = algo;
  policy->neural_input_ = !algo_is_linear(algo);
  policy->bandit_dim_ = task.state_dim();
  policy->bandit_actions_ = task.n_actions();

  const std::vector<int> idx =
      data::bucket_indices(ds.K(), 1, 1, cfg.split_enabled);
  const int n = static_cast<int>(idx.size());
  const int dim = task.state_dim() * task.n_actions();
  Eigen::MatrixXd X(n, dim);
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) {
    const data::BanditRecord& rec = ds.bandit_at(idx[r]);
    X.row(r) =
        envs::action_embedding(rec.state, rec.action, task.n_actions())
            .transpose();
    y[r] = rec.reward;
  }
  policy->steps_.resize(1);
  policy->steps_[0] = fit_step(algo, cfg, X, y, 1, 1);
  return policy;
}

}  // namespace viper::algos
