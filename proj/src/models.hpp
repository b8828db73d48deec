#ifndef VIPER_MODELS_HPP
#define VIPER_MODELS_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "rng.hpp"

namespace viper::models {

// Two-layer ReLU network f(x; W) = (1/sqrt(m)) sum_i b_i relu(w_i.x)
// with frozen output signs b and sign-mirrored pairing: for i < m/2,
// w_{m/2+i} starts equal to w_i and b_{m/2+i} = -b_i, which makes
// f(x; W0) = 0 and <g(x; W0), W0> = 0 identically.
struct NetParams {
  int m = 0;            // hidden width, even
  int d = 0;            // input dimension
  Eigen::MatrixXd W;    // m x d
  Eigen::VectorXd b;    // m signs in {-1, +1}
  Eigen::MatrixXd W0;   // snapshot of the initialization
};

// Weights w_i ~ N(0, I_d / d), signs uniform with mirrored negation.
NetParams symmetric_init(int m, int d, rng::Stream& rng);

double net_forward(const NetParams& p, const Eigen::VectorXd& x);
double net_forward_at(const NetParams& p, const Eigen::MatrixXd& W,
                      const Eigen::VectorXd& x);

// Parameter gradient flattened to length m*d (unit i occupies
// [i*d, (i+1)*d)). The ReLU subgradient at exactly 0 is taken as 0.
Eigen::VectorXd net_grad(const NetParams& p, const Eigen::VectorXd& x);
Eigen::VectorXd net_grad_at(const NetParams& p, const Eigen::MatrixXd& W,
                            const Eigen::VectorXd& x);

// <g(x; W0), g(y; W0)> computed without materializing the gradients.
double init_grad_inner(const NetParams& p, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y);

struct GdConfig {
  double lambda = 1.0;  // ridge weight > 0
  double eta = 0.1;     // step size > 0
  int steps = 0;        // J >= 0
};

struct NetGdResult {
  Eigen::MatrixXd W;
  double final_loss = 0.0;
};

// Exactly `steps` full-batch gradient steps on
//   L(W) = 1/2 sum_k (f(x_k; W) - y_k)^2 + lambda/2 ||W + zeta - W0||^2.
// X holds one record per row. zeta has the full parameter shape (m x d).
// Throws NumericError naming the iteration if the loss turns non-finite.
NetGdResult net_gradient_descent(const NetParams& p, const GdConfig& cfg,
                                 const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& zeta);

struct LinGdResult {
  Eigen::VectorXd theta;
  double final_loss = 0.0;
};

// Same loss for the inner-product model <phi, theta> with anchor
// theta0 = 0:  L = 1/2 sum (phi_k.theta - y_k)^2 + lambda/2 ||theta+zeta||^2.
LinGdResult linear_gradient_descent(const GdConfig& cfg,
                                    const Eigen::MatrixXd& Phi,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& zeta);

inline double linear_forward(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& feat) {
  return theta.dot(feat);
}

// Binary checkpoint: magic, m, d, little-endian tag, then row-major
// 64-bit reals (W followed by b and W0).
std::string net_checkpoint_serialize(const NetParams& p);
NetParams net_checkpoint_deserialize(const std::string& bytes,
                                     const std::string& origin);

// ------------------------------------------------------------------
// Experiment-mode model: two hidden ReLU layers trained with Adam on
// minibatches. Used by the neural learners when net_depth = 2.
// ------------------------------------------------------------------
struct Mlp2 {
  int d = 0;
  int width = 0;
  Eigen::MatrixXd W1;  // width x d
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;  // width x width
  Eigen::VectorXd b2;
  Eigen::VectorXd w3;  // width
  double b3 = 0.0;

  int n_params() const {
    return width * d + width + width * width + width + width + 1;
  }
};

Mlp2 mlp2_init(int width, int d, rng::Stream& rng);
double mlp2_forward(const Mlp2& net, const Eigen::VectorXd& x);
// Full parameter gradient in the order W1, b1, W2, b2, w3, b3.
Eigen::VectorXd mlp2_grad(const Mlp2& net, const Eigen::VectorXd& x);

struct AdamConfig {
  double lr = 0.001;
  int epochs = 20;
  int batch = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Minibatch Adam on the squared loss with ridge pull toward the
// initialization (plus optional anchor shift zeta, may be empty).
// Returns the final full-batch loss.
double mlp2_train_adam(Mlp2& net, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, double lambda,
                       const Eigen::VectorXd& zeta, const AdamConfig& cfg,
                       rng::Stream& rng);

std::string mlp2_checkpoint_serialize(const Mlp2& net);
Mlp2 mlp2_checkpoint_deserialize(const std::string& bytes,
                                 const std::string& origin);

}  // namespace viper::models

#endif
