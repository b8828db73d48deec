#include "uq.hpp"

#include <cmath>

#include "errors.hpp"

namespace viper::uq {

CovarianceAccumulator::CovarianceAccumulator(int dim, double lambda, Mode mode,
                                             int refresh_every)
    : dim_(dim), lambda_(lambda), mode_(mode), refresh_every_(refresh_every) {
  if (dim < 1) throw ConfigError("covariance dimension must be >= 1");
  if (lambda <= 0.0) throw ConfigError("lambda must be > 0");
  if (refresh_every < 1) throw ConfigError("refresh interval must be >= 1");
  if (mode_ == Mode::kFull) {
    full_ = lambda * Eigen::MatrixXd::Identity(dim, dim);
  } else {
    diag_ = Eigen::VectorXd::Constant(dim, lambda);
  }
}

CovarianceAccumulator CovarianceAccumulator::from_dense(
    const Eigen::MatrixXd& lambda_matrix, double lambda, int count) {
  if (lambda_matrix.rows() != lambda_matrix.cols())
    throw DomainError("covariance matrix must be square");
  CovarianceAccumulator acc(static_cast<int>(lambda_matrix.rows()), lambda,
                            Mode::kFull);
  acc.full_ = lambda_matrix;
  acc.count_ = count;
  return acc;
}

CovarianceAccumulator CovarianceAccumulator::from_diag(
    const Eigen::VectorXd& diag, double lambda, int count) {
  CovarianceAccumulator acc(static_cast<int>(diag.size()), lambda,
                            Mode::kDiagonal);
  acc.diag_ = diag;
  acc.count_ = count;
  return acc;
}

void CovarianceAccumulator::update(const Eigen::VectorXd& g) {
  if (g.size() != dim_)
    throw DomainError("vector dimension " + std::to_string(g.size()) +
                      " != accumulator dimension " + std::to_string(dim_));
  ++count_;
  if (mode_ == Mode::kDiagonal) {
    diag_ += g.cwiseProduct(g);
    return;
  }
  full_.selfadjointView<Eigen::Lower>().rankUpdate(g);
  if (factor_valid_) {
    if (updates_since_refresh_ >= refresh_every_) {
      factor_valid_ = false;
      pending_.clear();
    } else {
      pending_.push_back(g);
      ++updates_since_refresh_;
    }
  }
}

void CovarianceAccumulator::ensure_factor() const {
  if (mode_ != Mode::kFull) return;
  if (factor_valid_) {
    for (const Eigen::VectorXd& g : pending_) cholesky_rank1_update(chol_u_, g);
    pending_.clear();
    return;
  }
  Eigen::MatrixXd lambda_full = full_.selfadjointView<Eigen::Lower>();
  Eigen::LLT<Eigen::MatrixXd> llt(lambda_full);
  if (llt.info() != Eigen::Success)
    throw NumericError("covariance factorization failed");
  chol_u_ = llt.matrixU();
  factor_valid_ = true;
  updates_since_refresh_ = 0;
  pending_.clear();
}

double CovarianceAccumulator::quad_form(const Eigen::VectorXd& v) const {
  if (v.size() != dim_)
    throw DomainError("vector dimension " + std::to_string(v.size()) +
                      " != accumulator dimension " + std::to_string(dim_));
  if (mode_ == Mode::kDiagonal)
    return std::sqrt(v.cwiseProduct(v).cwiseQuotient(diag_).sum());
  ensure_factor();
  // v^T Lambda^-1 v = ||U^-T v||^2
  return chol_u_.triangularView<Eigen::Upper>()
      .transpose()
      .solve(v)
      .norm();
}

Eigen::VectorXd CovarianceAccumulator::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != dim_)
    throw DomainError("vector dimension " + std::to_string(rhs.size()) +
                      " != accumulator dimension " + std::to_string(dim_));
  if (mode_ == Mode::kDiagonal) return rhs.cwiseQuotient(diag_);
  ensure_factor();
  Eigen::VectorXd y =
      chol_u_.triangularView<Eigen::Upper>().transpose().solve(rhs);
  return chol_u_.triangularView<Eigen::Upper>().solve(y);
}

Eigen::VectorXd CovarianceAccumulator::sample(double sigma,
                                              rng::Stream& rng) const {
  if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
  if (sigma == 0.0) return Eigen::VectorXd::Zero(dim_);
  Eigen::VectorXd z(dim_);
  for (int i = 0; i < dim_; ++i) z[i] = rng.normal();
  if (mode_ == Mode::kDiagonal)
    return sigma * z.cwiseQuotient(diag_.cwiseSqrt());
  ensure_factor();
  // cov(U^-1 z) = U^-1 U^-T = Lambda^-1
  return sigma * chol_u_.triangularView<Eigen::Upper>().solve(z);
}

double CovarianceAccumulator::logdet() const {
  if (mode_ == Mode::kDiagonal) return diag_.array().log().sum();
  ensure_factor();
  return 2.0 * chol_u_.diagonal().array().log().sum();
}

Eigen::MatrixXd CovarianceAccumulator::matrix() const {
  if (mode_ == Mode::kDiagonal) return diag_.asDiagonal();
  return full_.selfadjointView<Eigen::Lower>();
}

void cholesky_rank1_update(Eigen::MatrixXd& upper, Eigen::VectorXd v) {
  const Eigen::Index n = upper.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = upper(i, i);
    const double b = v[i];
    const double r = std::hypot(a, b);
    if (r == 0.0) throw NumericError("rank-one update broke down");
    const double c = a / r;
    const double s = b / r;
    upper(i, i) = r;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double uij = upper(i, j);
      upper(i, j) = c * uij + s * v[j];
      v[j] = c * v[j] - s * uij;
    }
  }
}

double ntk_closed_form(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw DomainError("kernel input size mismatch");
  double ip = x.dot(y);
  if (ip > 1.0) ip = 1.0;
  if (ip < -1.0) ip = -1.0;
  constexpr double kPi = 3.14159265358979323846;
  return ip * (kPi - std::acos(ip)) / (2.0 * kPi);
}

Eigen::MatrixXd ntk_gram(const std::vector<Eigen::VectorXd>& xs) {
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      gram(i, j) = gram(j, i) = ntk_closed_form(xs[i], xs[j]);
  return gram;
}

double effective_dimension(const Eigen::MatrixXd& gram, double lambda,
                           int kprime) {
  if (gram.rows() != gram.cols()) throw DomainError("gram must be square");
  if (lambda <= 0.0) throw ConfigError("lambda must be > 0");
  if (kprime < 1) throw ConfigError("kprime must be >= 1");
  const Eigen::Index n = gram.rows();
  Eigen::MatrixXd shifted =
      Eigen::MatrixXd::Identity(n, n) + gram / lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw NumericError("gram matrix is not positive semidefinite");
  const double logdet =
      2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return logdet / std::log(1.0 + static_cast<double>(kprime) / lambda);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

int ensemble_size(double delta, int H, int S, int A) {
  if (H < 1 || S < 1 || A < 1) throw ConfigError("H, S, A must be >= 1");
  const double hsa = static_cast<double>(H) * S * A;
  if (!(delta > 0.0) || !(delta < hsa))
    throw ConfigError("delta must lie in (0, H*S*A)");
  const double denom = std::log(1.0 / (1.0 - normal_cdf(-1.0)));
  const double raw = std::log(hsa / delta) / denom;
  const int m = static_cast<int>(std::ceil(raw));
  return m < 1 ? 1 : m;
}

}  // namespace viper::uq
