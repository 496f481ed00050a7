#pragma once

#include <Eigen/Dense>
#include <vector>

#include "racebo/rng.hpp"

namespace racebo {

struct GpHyper {
    double signal_var = 1.0;
    Eigen::VectorXd lengthscales;  // one per input dimension
    double noise_var = 1e-4;
};

struct GpHyperBounds {
    double signal_var_min = 1e-6;
    double signal_var_max = 1e6;
    Eigen::VectorXd lengthscale_min;
    Eigen::VectorXd lengthscale_max;
    double noise_var_min = 1e-6;
    double noise_var_max = 1e2;
};

// Exact Gaussian-process regression with a squared-exponential ARD kernel and
// a constant prior mean (the training-target mean). Per-dimension lengthscales
// make a product of SE kernels over input blocks (e.g. parameters x context)
// the same thing as one SE kernel over the concatenation.
class GpRegressor {
public:
    explicit GpRegressor(int dim);

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(y_.size()); }

    void set_hyper(const GpHyper& h);
    const GpHyper& hyper() const { return hyper_; }

    void set_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
    void add_point(const Eigen::VectorXd& x, double y);

    double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

    // posterior mean and variance; the prior (mean 0, signal_var) with no data
    void posterior(const Eigen::VectorXd& x, double& mean, double& var) const;

    double log_marginal_likelihood() const;

    // multi-start coordinate search over log-hyperparameters within bounds;
    // deterministic given the seed. Keeps the current values on failure.
    void fit_hyperparameters(const GpHyperBounds& bounds, uint64_t seed);

    const Eigen::MatrixXd& inputs() const { return x_; }
    const Eigen::VectorXd& targets() const { return y_; }

private:
    void refactor() const;

    int dim_;
    Eigen::MatrixXd x_;  // n x dim
    Eigen::VectorXd y_;
    GpHyper hyper_;

    mutable bool factored_ = false;
    mutable Eigen::LLT<Eigen::MatrixXd> llt_;
    mutable Eigen::VectorXd alpha_;
    mutable double y_mean_ = 0.0;
    mutable double jitter_ = 0.0;
};

}  // namespace racebo
