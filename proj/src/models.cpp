#include "models.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "binio.hpp"
#include "errors.hpp"

namespace viper::models {

namespace {

void check_input_dim(int d, const Eigen::VectorXd& x) {
  if (x.size() != d)
    throw DomainError("input dimension " + std::to_string(x.size()) +
                      " != model dimension " + std::to_string(d));
}

void warn_if_not_unit(const Eigen::VectorXd& x) {
  static std::atomic<bool> warned{false};
  if (warned.load(std::memory_order_relaxed)) return;
  const double n2 = x.squaredNorm();
  if (n2 != 0.0 && std::abs(n2 - 1.0) > 1e-6 &&
      !warned.exchange(true, std::memory_order_relaxed))
    std::fprintf(stderr,
                 "viper: warning: network input has norm %.6g, expected unit "
                 "norm (reported once)\n",
                 std::sqrt(n2));
}

using binio::append_matrix;
using binio::append_raw;
using binio::read_matrix;

constexpr char kNetMagic[8] = {'V', 'I', 'P', 'N', 'E', 'T', '1', '\0'};
constexpr char kMlpMagic[8] = {'V', 'I', 'P', 'M', 'L', 'P', '2', '\0'};

}  // namespace

NetParams symmetric_init(int m, int d, rng::Stream& rng) {
  if (m < 2 || m % 2 != 0)
    throw ConfigError("width m must be even and >= 2, got " +
                      std::to_string(m));
  if (d < 1) throw ConfigError("input dimension must be >= 1");
  NetParams p;
  p.m = m;
  p.d = d;
  p.W.resize(m, d);
  p.b.resize(m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const int half = m / 2;
  for (int i = 0; i < half; ++i) {
    for (int j = 0; j < d; ++j) p.W(i, j) = scale * rng.normal();
    p.W.row(half + i) = p.W.row(i);
    p.b[i] = rng.uniform_int(2) ? 1.0 : -1.0;
    p.b[half + i] = -p.b[i];
  }
  p.W0 = p.W;
  return p;
}

double net_forward_at(const NetParams& p, const Eigen::MatrixXd& W,
                      const Eigen::VectorXd& x) {
  check_input_dim(p.d, x);
  warn_if_not_unit(x);
  const Eigen::VectorXd u = W * x;
  return p.b.dot(u.cwiseMax(0.0)) / std::sqrt(static_cast<double>(p.m));
}

double net_forward(const NetParams& p, const Eigen::VectorXd& x) {
  return net_forward_at(p, p.W, x);
}

Eigen::VectorXd net_grad_at(const NetParams& p, const Eigen::MatrixXd& W,
                            const Eigen::VectorXd& x) {
  check_input_dim(p.d, x);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(p.m));
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.m) * p.d);
  const Eigen::VectorXd u = W * x;
  for (int i = 0; i < p.m; ++i)
    if (u[i] > 0.0) g.segment(static_cast<Eigen::Index>(i) * p.d, p.d) =
        inv_sqrt_m * p.b[i] * x;
  return g;
}

Eigen::VectorXd net_grad(const NetParams& p, const Eigen::VectorXd& x) {
  return net_grad_at(p, p.W, x);
}

double init_grad_inner(const NetParams& p, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y) {
  check_input_dim(p.d, x);
  check_input_dim(p.d, y);
  const Eigen::VectorXd u = p.W0 * x;
  const Eigen::VectorXd v = p.W0 * y;
  long active = 0;
  for (int i = 0; i < p.m; ++i)
    if (u[i] > 0.0 && v[i] > 0.0) ++active;
  return static_cast<double>(active) / p.m * x.dot(y);
}

NetGdResult net_gradient_descent(const NetParams& p, const GdConfig& cfg,
                                 const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& zeta) {
  if (cfg.lambda <= 0.0) throw ConfigError("lambda must be > 0");
  if (cfg.eta <= 0.0) throw ConfigError("eta must be > 0");
  if (cfg.steps < 0) throw ConfigError("gradient descent steps must be >= 0");
  if (X.rows() == 0) throw ConfigError("empty training data");
  if (X.cols() != p.d || y.size() != X.rows())
    throw DomainError("training data shape mismatch");
  if (zeta.rows() != p.m || zeta.cols() != p.d)
    throw DomainError("zeta must have the full parameter shape");

  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(p.m));
  Eigen::MatrixXd W = p.W;
  Eigen::MatrixXd anchor = p.W0 - zeta;  // ridge pulls W toward W0 - zeta

  auto loss_of = [&](const Eigen::MatrixXd& Wc, const Eigen::VectorXd& resid) {
    return 0.5 * resid.squaredNorm() +
           0.5 * cfg.lambda * (Wc - anchor).squaredNorm();
  };

  Eigen::MatrixXd U, A;
  Eigen::VectorXd resid;
  for (int j = 0; j < cfg.steps; ++j) {
    U.noalias() = X * W.transpose();                       // n x m
    resid = (U.cwiseMax(0.0) * p.b) * inv_sqrt_m - y;      // n
    A = ((U.array() > 0.0).cast<double>() *
         ((resid * p.b.transpose()).array() * inv_sqrt_m))
            .matrix();
    Eigen::MatrixXd grad = A.transpose() * X;              // m x d
    grad.noalias() += cfg.lambda * (W - anchor);
    W.noalias() -= cfg.eta * grad;
    if (!W.allFinite())
      throw NumericError("gradient descent diverged at iteration " +
                         std::to_string(j + 1));
  }
  U.noalias() = X * W.transpose();
  resid = (U.cwiseMax(0.0) * p.b) * inv_sqrt_m - y;
  const double loss = loss_of(W, resid);
  if (!std::isfinite(loss))
    throw NumericError("non-finite loss after " + std::to_string(cfg.steps) +
                       " iterations");
  return {std::move(W), loss};
}

LinGdResult linear_gradient_descent(const GdConfig& cfg,
                                    const Eigen::MatrixXd& Phi,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& zeta) {
  if (cfg.lambda <= 0.0) throw ConfigError("lambda must be > 0");
  if (cfg.eta <= 0.0) throw ConfigError("eta must be > 0");
  if (cfg.steps < 0) throw ConfigError("gradient descent steps must be >= 0");
  if (Phi.rows() == 0) throw ConfigError("empty training data");
  if (y.size() != Phi.rows() || zeta.size() != Phi.cols())
    throw DomainError("training data shape mismatch");

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(Phi.cols());
  for (int j = 0; j < cfg.steps; ++j) {
    Eigen::VectorXd grad =
        Phi.transpose() * (Phi * theta - y) + cfg.lambda * (theta + zeta);
    theta -= cfg.eta * grad;
    if (!theta.allFinite())
      throw NumericError("gradient descent diverged at iteration " +
                         std::to_string(j + 1));
  }
  const double loss = 0.5 * (Phi * theta - y).squaredNorm() +
                      0.5 * cfg.lambda * (theta + zeta).squaredNorm();
  return {std::move(theta), loss};
}

std::string net_checkpoint_serialize(const NetParams& p) {
  std::string out;
  append_raw(out, kNetMagic, sizeof kNetMagic);
  binio::append_endian_tag(out);
  const uint32_t m = p.m, d = p.d;
  append_raw(out, &m, sizeof m);
  append_raw(out, &d, sizeof d);
  append_matrix(out, p.W);
  append_matrix(out, p.b);
  append_matrix(out, p.W0);
  return out;
}

NetParams net_checkpoint_deserialize(const std::string& bytes,
                                     const std::string& origin) {
  size_t off = 0;
  char magic[8];
  if (bytes.size() < sizeof magic ||
      std::memcmp(bytes.data(), kNetMagic, sizeof magic) != 0)
    throw FormatError(origin + ": not a network checkpoint");
  off = sizeof magic;
  if (binio::read_pod<uint32_t>(bytes, off, origin) != binio::kEndianTag)
    throw FormatError(origin + ": endianness mismatch");
  NetParams p;
  p.m = static_cast<int>(binio::read_pod<uint32_t>(bytes, off, origin));
  p.d = static_cast<int>(binio::read_pod<uint32_t>(bytes, off, origin));
  if (p.m < 2 || p.d < 1 || p.m > (1 << 24) || p.d > (1 << 24))
    throw FormatError(origin + ": implausible checkpoint dimensions");
  p.W = read_matrix(bytes, off, p.m, p.d, origin);
  p.b = read_matrix(bytes, off, p.m, 1, origin);
  p.W0 = read_matrix(bytes, off, p.m, p.d, origin);
  return p;
}

// ------------------------------------------------------------------ //

Mlp2 mlp2_init(int width, int d, rng::Stream& rng) {
  if (width < 1 || d < 1) throw ConfigError("mlp2 needs width >= 1, d >= 1");
  Mlp2 net;
  net.d = d;
  net.width = width;
  const double s1 = std::sqrt(2.0 / d);
  const double s2 = std::sqrt(2.0 / width);
  net.W1.resize(width, d);
  net.W2.resize(width, width);
  net.w3.resize(width);
  for (int i = 0; i < width; ++i) {
    for (int j = 0; j < d; ++j) net.W1(i, j) = s1 * rng.normal();
    for (int j = 0; j < width; ++j) net.W2(i, j) = s2 * rng.normal();
    net.w3[i] = s2 * rng.normal();
  }
  net.b1 = Eigen::VectorXd::Zero(width);
  net.b2 = Eigen::VectorXd::Zero(width);
  net.b3 = 0.0;
  return net;
}

double mlp2_forward(const Mlp2& net, const Eigen::VectorXd& x) {
  check_input_dim(net.d, x);
  const Eigen::VectorXd h1 = (net.W1 * x + net.b1).cwiseMax(0.0);
  const Eigen::VectorXd h2 = (net.W2 * h1 + net.b2).cwiseMax(0.0);
  return net.w3.dot(h2) + net.b3;
}

namespace {

Eigen::VectorXd mlp2_pack(const Mlp2& net) {
  Eigen::VectorXd v(net.n_params());
  Eigen::Index off = 0;
  auto put_mat = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) v[off++] = m(i, j);
  };
  auto put_vec = [&](const Eigen::VectorXd& u) {
    v.segment(off, u.size()) = u;
    off += u.size();
  };
  put_mat(net.W1);
  put_vec(net.b1);
  put_mat(net.W2);
  put_vec(net.b2);
  put_vec(net.w3);
  v[off++] = net.b3;
  return v;
}

void mlp2_unpack(Mlp2& net, const Eigen::VectorXd& v) {
  Eigen::Index off = 0;
  auto get_mat = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v[off++];
  };
  auto get_vec = [&](Eigen::VectorXd& u) {
    u = v.segment(off, u.size());
    off += u.size();
  };
  get_mat(net.W1);
  get_vec(net.b1);
  get_mat(net.W2);
  get_vec(net.b2);
  get_vec(net.w3);
  net.b3 = v[off++];
}

}  // namespace

Eigen::VectorXd mlp2_grad(const Mlp2& net, const Eigen::VectorXd& x) {
  check_input_dim(net.d, x);
  const Eigen::VectorXd z1 = net.W1 * x + net.b1;
  const Eigen::VectorXd h1 = z1.cwiseMax(0.0);
  const Eigen::VectorXd z2 = net.W2 * h1 + net.b2;
  const Eigen::VectorXd h2 = z2.cwiseMax(0.0);

  // d f / d h2 = w3; gate through the ReLUs
  Eigen::VectorXd g2 = net.w3;
  for (int i = 0; i < net.width; ++i)
    if (z2[i] <= 0.0) g2[i] = 0.0;
  Eigen::VectorXd g1 = net.W2.transpose() * g2;
  for (int i = 0; i < net.width; ++i)
    if (z1[i] <= 0.0) g1[i] = 0.0;

  Mlp2 grads = net;  // reuse shapes
  grads.W1 = g1 * x.transpose();
  grads.b1 = g1;
  grads.W2 = g2 * h1.transpose();
  grads.b2 = g2;
  grads.w3 = h2;
  grads.b3 = 1.0;
  return mlp2_pack(grads);
}

double mlp2_train_adam(Mlp2& net, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, double lambda,
                       const Eigen::VectorXd& zeta, const AdamConfig& cfg,
                       rng::Stream& rng) {
  if (X.rows() == 0) throw ConfigError("empty training data");
  if (X.cols() != net.d || y.size() != X.rows())
    throw DomainError("training data shape mismatch");
  const int n = static_cast<int>(X.rows());
  const int n_par = net.n_params();
  if (zeta.size() != 0 && zeta.size() != n_par)
    throw DomainError("zeta must have the full parameter dimension");

  const Eigen::VectorXd theta0 = mlp2_pack(net);
  Eigen::VectorXd theta = theta0;
  Eigen::VectorXd mom = Eigen::VectorXd::Zero(n_par);
  Eigen::VectorXd vel = Eigen::VectorXd::Zero(n_par);
  Eigen::VectorXd anchor = theta0;
  if (zeta.size() != 0) anchor -= zeta;

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  long t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    for (int start = 0; start < n; start += cfg.batch) {
      const int stop = std::min(start + cfg.batch, n);
      mlp2_unpack(net, theta);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_par);
      for (int b = start; b < stop; ++b) {
        const int k = order[b];
        const double resid = mlp2_forward(net, X.row(k).transpose()) - y[k];
        grad += resid * mlp2_grad(net, X.row(k).transpose());
      }
      grad += lambda * (static_cast<double>(stop - start) / n) *
              (theta - anchor);
      ++t;
      mom = cfg.beta1 * mom + (1.0 - cfg.beta1) * grad;
      vel = cfg.beta2 * vel + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
      const Eigen::VectorXd denom =
          (vel / bc2).cwiseSqrt() + Eigen::VectorXd::Constant(n_par, cfg.eps);
      theta -= (cfg.lr / bc1) * mom.cwiseQuotient(denom);
      if (!theta.allFinite())
        throw NumericError("adam diverged at update " + std::to_string(t));
    }
  }
  mlp2_unpack(net, theta);
  double loss = 0.0;
  for (int k = 0; k < n; ++k) {
    const double resid = mlp2_forward(net, X.row(k).transpose()) - y[k];
    loss += 0.5 * resid * resid;
  }
  loss += 0.5 * lambda * (theta - anchor).squaredNorm();
  return loss;
}

std::string mlp2_checkpoint_serialize(const Mlp2& net) {
  std::string out;
  append_raw(out, kMlpMagic, sizeof kMlpMagic);
  binio::append_endian_tag(out);
  const uint32_t w = net.width, d = net.d;
  append_raw(out, &w, sizeof w);
  append_raw(out, &d, sizeof d);
  append_matrix(out, mlp2_pack(net));
  return out;
}

Mlp2 mlp2_checkpoint_deserialize(const std::string& bytes,
                                 const std::string& origin) {
  size_t off = 0;
  char magic[8];
  if (bytes.size() < sizeof magic ||
      std::memcmp(bytes.data(), kMlpMagic, sizeof magic) != 0)
    throw FormatError(origin + ": not an mlp2 checkpoint");
  off = sizeof magic;
  if (binio::read_pod<uint32_t>(bytes, off, origin) != binio::kEndianTag)
    throw FormatError(origin + ": endianness mismatch");
  Mlp2 net;
  net.width = static_cast<int>(binio::read_pod<uint32_t>(bytes, off, origin));
  net.d = static_cast<int>(binio::read_pod<uint32_t>(bytes, off, origin));
  if (net.width < 1 || net.d < 1 || net.width > (1 << 20) || net.d > (1 << 20))
    throw FormatError(origin + ": implausible checkpoint dimensions");
  net.W1.resize(net.width, net.d);
  net.b1.resize(net.width);
  net.W2.resize(net.width, net.width);
  net.b2.resize(net.width);
  net.w3.resize(net.width);
  const Eigen::MatrixXd v =
      read_matrix(bytes, off, net.n_params(), 1, origin);
  mlp2_unpack(net, v.col(0));
  return net;
}

}  // namespace viper::models
