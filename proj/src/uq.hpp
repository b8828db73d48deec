#ifndef VIPER_UQ_HPP
#define VIPER_UQ_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <vector>

#include "rng.hpp"

namespace viper::uq {

// Ridge covariance Lambda = lambda I + sum g g^T with solve, quadratic
// form, sampling and logdet services. Full mode keeps an upper Cholesky
// factor current through rank-one updates and re-factorizes from scratch
// every `refresh_every` updates; diagonal mode stores only diag(Lambda).
//
// Single writer; reads may run concurrently between updates.
class CovarianceAccumulator {
 public:
  enum class Mode { kFull, kDiagonal };

  CovarianceAccumulator(int dim, double lambda, Mode mode = Mode::kFull,
                        int refresh_every = 64);

  // Rebuild from a previously exported Lambda (full matrix or its
  // diagonal, both already including the lambda I shift).
  static CovarianceAccumulator from_dense(const Eigen::MatrixXd& lambda_matrix,
                                          double lambda, int count);
  static CovarianceAccumulator from_diag(const Eigen::VectorXd& diag,
                                         double lambda, int count);

  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  Mode mode() const { return mode_; }
  int count() const { return count_; }

  void update(const Eigen::VectorXd& g);

  // ||v||_{Lambda^-1} = sqrt(v^T Lambda^-1 v), via the factor.
  double quad_form(const Eigen::VectorXd& v) const;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  // Draw from N(0, sigma^2 Lambda^-1).
  Eigen::VectorXd sample(double sigma, rng::Stream& rng) const;

  double logdet() const;

  // Dense Lambda (diagonal mode returns the embedded diagonal matrix).
  Eigen::MatrixXd matrix() const;

 private:
  void ensure_factor() const;

  int dim_;
  double lambda_;
  Mode mode_;
  int refresh_every_;
  int count_ = 0;
  Eigen::MatrixXd full_;            // full mode
  Eigen::VectorXd diag_;            // diagonal mode
  mutable Eigen::MatrixXd chol_u_;  // upper factor, Lambda = U^T U
  mutable bool factor_valid_ = false;
  mutable int updates_since_refresh_ = 0;
  mutable std::vector<Eigen::VectorXd> pending_;
};

// In-place rank-one update of an upper Cholesky factor:
// U^T U + v v^T = U'^T U'.
void cholesky_rank1_update(Eigen::MatrixXd& upper, Eigen::VectorXd v);

// Closed-form ReLU tangent kernel for unit x, y:
// (x.y) (pi - arccos(clamp(x.y))) / (2 pi).
double ntk_closed_form(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

Eigen::MatrixXd ntk_gram(const std::vector<Eigen::VectorXd>& xs);

// logdet(I + gram/lambda) / log(1 + kprime/lambda).
double effective_dimension(const Eigen::MatrixXd& gram, double lambda,
                           int kprime);

// Smallest M >= log(H S A / delta) / log(1 / (1 - Phi(-1))), at least 1.
int ensemble_size(double delta, int H, int S, int A);

// Standard normal CDF via erfc.
double normal_cdf(double x);

}  // namespace viper::uq

#endif
