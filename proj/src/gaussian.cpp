#include "postbc/gaussian.hpp"

#include <stdexcept>

namespace postbc {

namespace {

void check_spd(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(what) + ": matrix must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument(std::string(what) + ": matrix not symmetric within 1e-10");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument(std::string(what) + ": matrix not positive definite");
}

void check_data_dims(const GaussianModel& model, const std::vector<Eigen::VectorXd>& data) {
  for (const auto& x : data)
    if (x.size() != model.dim())
      throw std::invalid_argument("gaussian: datum dimension does not match model");
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

void GaussianModel::validate() const {
  check_spd(obs_cov, "obs_cov");
  check_spd(prior_cov, "prior_cov");
  if (obs_cov.rows() != prior_cov.rows())
    throw std::invalid_argument("GaussianModel: obs_cov and prior_cov dimension mismatch");
}

GaussianPosterior closed_form_posterior(const GaussianModel& model,
                                        const std::vector<Eigen::VectorXd>& data) {
  model.validate();
  check_data_dims(model, data);
  const int d = model.dim();
  const double T = static_cast<double>(data.size());
  Eigen::LLT<Eigen::MatrixXd> obs_llt(model.obs_cov);
  Eigen::LLT<Eigen::MatrixXd> prior_llt(model.prior_cov);
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd precision =
      prior_llt.solve(identity) + T * obs_llt.solve(identity);
  Eigen::MatrixXd cov = symmetrize(precision.llt().solve(identity));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  for (const auto& x : data) sum += x;
  GaussianPosterior post;
  post.mean = cov * obs_llt.solve(sum);
  post.cov = cov;
  return post;
}

Eigen::VectorXd solve_posterior_optimization(const GaussianModel& model,
                                             const std::vector<Eigen::VectorXd>& data,
                                             const std::vector<Eigen::VectorXd>& data_noise,
                                             const Eigen::VectorXd& prior_draw) {
  model.validate();
  check_data_dims(model, data);
  if (data_noise.size() != data.size())
    throw std::invalid_argument("solve_posterior_optimization: noise count mismatch");
  const int d = model.dim();
  const double T = static_cast<double>(data.size());
  Eigen::LLT<Eigen::MatrixXd> obs_llt(model.obs_cov);
  Eigen::LLT<Eigen::MatrixXd> prior_llt(model.prior_cov);
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd normal_matrix = prior_llt.solve(identity) + T * obs_llt.solve(identity);
  Eigen::VectorXd perturbed_sum = Eigen::VectorXd::Zero(d);
  for (std::size_t t = 0; t < data.size(); ++t) perturbed_sum += data[t] + data_noise[t];
  Eigen::VectorXd rhs = obs_llt.solve(perturbed_sum) + prior_llt.solve(prior_draw);
  Eigen::LLT<Eigen::MatrixXd> normal_llt(symmetrize(normal_matrix));
  if (normal_llt.info() != Eigen::Success)
    throw std::runtime_error("solve_posterior_optimization: singular normal equations");
  return normal_llt.solve(rhs);
}

Eigen::VectorXd sample_posterior_via_optimization(const GaussianModel& model,
                                                  const std::vector<Eigen::VectorXd>& data,
                                                  Rng& rng) {
  std::vector<Eigen::VectorXd> noise;
  noise.reserve(data.size());
  for (std::size_t t = 0; t < data.size(); ++t)
    noise.push_back(sample_gaussian(model.obs_cov, rng));
  Eigen::VectorXd prior_draw = sample_gaussian(model.prior_cov, rng);
  return solve_posterior_optimization(model, data, noise, prior_draw);
}

Eigen::VectorXd postbc_gaussian_sample_with_noise(const GaussianModel& model,
                                                  const std::vector<Eigen::VectorXd>& data,
                                                  const Eigen::VectorXd& bc_noise,
                                                  const Eigen::VectorXd& post_noise) {
  if (data.empty())
    throw std::invalid_argument("postbc_gaussian_sample: data must be nonempty");
  GaussianPosterior post = closed_form_posterior(model, data);
  return post.mean + bc_noise + post_noise;
}

Eigen::VectorXd postbc_gaussian_sample(const GaussianModel& model,
                                       const std::vector<Eigen::VectorXd>& data, Rng& rng) {
  if (data.empty())
    throw std::invalid_argument("postbc_gaussian_sample: data must be nonempty");
  GaussianPosterior post = closed_form_posterior(model, data);
  Eigen::VectorXd bc_noise = sample_gaussian(model.obs_cov, rng);
  Eigen::VectorXd post_noise = sample_gaussian(post.cov, rng);
  return post.mean + bc_noise + post_noise;
}

Eigen::VectorXd sample_gaussian(const Eigen::MatrixXd& cov, Rng& rng) {
  const int d = static_cast<int>(cov.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(cov));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sample_gaussian: covariance not positive definite");
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z[i] = rng.normal();
  return llt.matrixL() * z;
}

Eigen::VectorXd sample_gaussian_psd(const Eigen::MatrixXd& cov, Rng& rng) {
  const int d = static_cast<int>(cov.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(cov));
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z[i] = rng.normal();
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * z;
}

double normal_equations_residual(const GaussianModel& model,
                                 const std::vector<Eigen::VectorXd>& data,
                                 const std::vector<Eigen::VectorXd>& data_noise,
                                 const Eigen::VectorXd& prior_draw,
                                 const Eigen::VectorXd& solution) {
  const int d = model.dim();
  const double T = static_cast<double>(data.size());
  Eigen::LLT<Eigen::MatrixXd> obs_llt(model.obs_cov);
  Eigen::LLT<Eigen::MatrixXd> prior_llt(model.prior_cov);
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd normal_matrix = prior_llt.solve(identity) + T * obs_llt.solve(identity);
  Eigen::VectorXd perturbed_sum = Eigen::VectorXd::Zero(d);
  for (std::size_t t = 0; t < data.size(); ++t) perturbed_sum += data[t] + data_noise[t];
  Eigen::VectorXd rhs = obs_llt.solve(perturbed_sum) + prior_llt.solve(prior_draw);
  double denom = rhs.norm();
  if (denom == 0.0) denom = 1.0;
  return (normal_matrix * solution - rhs).norm() / denom;
}

}  // namespace postbc
