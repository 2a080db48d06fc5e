#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace bilbo {

struct GPHyperparams {
    double lengthscale = 0.2;     ///< in unit-cube input units
    double outputscale = 1.0;     ///< prior variance k(x, x)
    double noise_variance = 1e-4;  ///< observation noise, model output units
    double prior_mean = 0.0;

    /// Throws std::invalid_argument unless every scale is strictly positive.
    void validate() const;
};

/// Thrown when (K + sigma^2 I) cannot be factorised even after jitter.
class FactorizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double matern52_from_distance(double r, const GPHyperparams& hp);
double matern52(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                const GPHyperparams& hp);

/// Kernel matrix between the columns of a (d x n) and b (d x q).
Eigen::MatrixXd matern52_matrix(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b,
                                const GPHyperparams& hp);

/// Observations of one blackbox function. Inputs are unit-cube joint
/// coordinates stored column-wise; targets are in model (normalised) units
/// and raw_targets keep the original scale.
class GPDataset {
public:
    explicit GPDataset(std::size_t dim = 0) : dim_(dim) {}

    void add(const Eigen::Ref<const Eigen::VectorXd>& input, double target, double raw_target);
    void add(const Eigen::Ref<const Eigen::VectorXd>& input, double target) { add(input, target, target); }

    std::size_t size() const { return targets_.size(); }
    std::size_t dim() const { return dim_; }
    bool empty() const { return targets_.empty(); }

    Eigen::MatrixXd inputs() const;
    Eigen::VectorXd targets() const;
    const std::vector<double>& raw_targets() const { return raw_targets_; }
    Eigen::VectorXd input(std::size_t i) const;
    double target(std::size_t i) const { return targets_.at(i); }

private:
    std::size_t dim_;
    std::vector<double> inputs_;  // column-major d x n
    std::vector<double> targets_;
    std::vector<double> raw_targets_;
};

struct GPPosterior {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

/// Closed-form GP posterior at the columns of `query` (d x q).
GPPosterior posterior(const GPDataset& data, const GPHyperparams& hp, const Eigen::Ref<const Eigen::MatrixXd>& query);

double log_marginal_likelihood(const GPDataset& data, const GPHyperparams& hp);

struct MleOptions {
    double log_lengthscale_min = -4.605170185988091;  // log 0.01
    double log_lengthscale_max = 2.302585092994046;   // log 10
    double log_outputscale_min = -4.605170185988091;  // log 0.01
    double log_outputscale_max = 4.605170185988092;   // log 100
    double log_noise_min = -13.815510557964274;       // log 1e-6
    double log_noise_max = 0.0;
    double initial_step = 0.5;
    double min_step = 0.01;
    std::size_t max_evaluations_per_start = 150;
};

/// Type-II maximum likelihood by multi-start compass search in log space.
/// Starts at `init` and at init shifted by -1 and +1 in every searched
/// log-parameter; prior_mean stays fixed. Returns `init` for datasets with
/// fewer than two points or when no start can be evaluated.
GPHyperparams fit_mle(const GPDataset& data, const GPHyperparams& init, bool noise_variance_fixed = true,
                      const MleOptions& options = {});

}  // namespace bilbo
