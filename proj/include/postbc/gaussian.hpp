#pragma once

#include <Eigen/Dense>
#include <vector>

#include "postbc/rng.hpp"

namespace postbc {

/// Known-covariance Gaussian observation model with a zero-mean Gaussian
/// prior on the unknown mean.
struct GaussianModel {
  Eigen::MatrixXd obs_cov;    // Sigma, d x d SPD
  Eigen::MatrixXd prior_cov;  // Lambda0, d x d SPD

  int dim() const { return static_cast<int>(obs_cov.rows()); }

  /// Throws unless both matrices are symmetric within 1e-10 and positive
  /// definite.
  void validate() const;
};

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // Lambda_post
};

/// Conjugate closed form: Lambda_post^{-1} = Lambda0^{-1} + T Sigma^{-1},
/// mean = Lambda_post Sigma^{-1} sum_t x_t. Empty data returns the prior.
GaussianPosterior closed_form_posterior(const GaussianModel& model,
                                        const std::vector<Eigen::VectorXd>& data);

/// Explicit-noise core of the optimization sampler: solves the regularized
/// least-squares normal equations for given data perturbations w_t and prior
/// draw mu_tilde. Passing zeros recovers the posterior mean (the
/// deterministic test path).
Eigen::VectorXd solve_posterior_optimization(const GaussianModel& model,
                                             const std::vector<Eigen::VectorXd>& data,
                                             const std::vector<Eigen::VectorXd>& data_noise,
                                             const Eigen::VectorXd& prior_draw);

/// Randomized-perturbation posterior sample: perturb each datum by
/// N(0, Sigma), draw mu_tilde from the prior, and solve. The output is
/// exactly distributed as the closed-form posterior.
Eigen::VectorXd sample_posterior_via_optimization(const GaussianModel& model,
                                                  const std::vector<Eigen::VectorXd>& data,
                                                  Rng& rng);

/// Explicit-noise core of the posterior-demonstrator sample: returns
/// posterior_mean + bc_noise + post_noise, where the caller supplies the two
/// noise vectors (zero post_noise recovers the MAP/BC sample distribution).
Eigen::VectorXd postbc_gaussian_sample_with_noise(const GaussianModel& model,
                                                  const std::vector<Eigen::VectorXd>& data,
                                                  const Eigen::VectorXd& bc_noise,
                                                  const Eigen::VectorXd& post_noise);

/// Posterior-demonstrator sample: an action from the MAP/BC policy
/// N(posterior_mean, Sigma) plus posterior noise N(0, Lambda_post); the
/// result is N(posterior_mean, Lambda_post + Sigma). Data must be nonempty.
Eigen::VectorXd postbc_gaussian_sample(const GaussianModel& model,
                                       const std::vector<Eigen::VectorXd>& data, Rng& rng);

/// Sample from N(0, cov) for SPD cov via Cholesky of the symmetrized matrix.
Eigen::VectorXd sample_gaussian(const Eigen::MatrixXd& cov, Rng& rng);

/// Sample from N(0, cov) for PSD cov: eigendecomposition with negative
/// eigenvalues clamped to zero before the square root.
Eigen::VectorXd sample_gaussian_psd(const Eigen::MatrixXd& cov, Rng& rng);

/// Relative residual of the normal equations at the returned point
/// (diagnostic used by tests).
double normal_equations_residual(const GaussianModel& model,
                                 const std::vector<Eigen::VectorXd>& data,
                                 const std::vector<Eigen::VectorXd>& data_noise,
                                 const Eigen::VectorXd& prior_draw,
                                 const Eigen::VectorXd& solution);

}  // namespace postbc
