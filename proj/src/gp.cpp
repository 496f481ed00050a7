#include "racebo/gp.hpp"

#include <cmath>
#include <stdexcept>

namespace racebo {

GpRegressor::GpRegressor(int dim) : dim_(dim) {
    x_.resize(0, dim);
    y_.resize(0);
    hyper_.lengthscales = Eigen::VectorXd::Constant(dim, 0.3);
}

void GpRegressor::set_hyper(const GpHyper& h) {
    if (h.lengthscales.size() != dim_) throw std::runtime_error("gp hyper dimension mismatch");
    hyper_ = h;
    factored_ = false;
}

void GpRegressor::set_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.cols() != dim_ || X.rows() != y.size())
        throw std::runtime_error("gp data dimension mismatch");
    x_ = X;
    y_ = y;
    factored_ = false;
}

void GpRegressor::add_point(const Eigen::VectorXd& x, double y) {
    if (x.size() != dim_) throw std::runtime_error("gp point dimension mismatch");
    x_.conservativeResize(x_.rows() + 1, Eigen::NoChange);
    x_.row(x_.rows() - 1) = x.transpose();
    y_.conservativeResize(y_.size() + 1);
    y_[y_.size() - 1] = y;
    factored_ = false;
}

double GpRegressor::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    double q = 0.0;
    for (int d = 0; d < dim_; ++d) {
        const double r = (a[d] - b[d]) / hyper_.lengthscales[d];
        q += r * r;
    }
    return hyper_.signal_var * std::exp(-0.5 * q);
}

void GpRegressor::refactor() const {
    const int n = size();
    y_mean_ = n > 0 ? y_.mean() : 0.0;
    if (n == 0) {
        factored_ = true;
        return;
    }
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = kernel(x_.row(i), x_.row(j));
            K(i, j) = v;
            K(j, i) = v;
        }
    K.diagonal().array() += hyper_.noise_var;

    jitter_ = 0.0;
    double jitter = 1e-12 * hyper_.signal_var;
    while (true) {
        llt_.compute(K + jitter_ * Eigen::MatrixXd::Identity(n, n));
        if (llt_.info() == Eigen::Success) break;
        jitter_ = jitter;
        jitter *= 10.0;
        if (jitter_ > 1e-4 * std::max(1.0, hyper_.signal_var))
            throw std::runtime_error("gp kernel matrix not positive definite at max jitter");
    }
    alpha_ = llt_.solve(y_ - Eigen::VectorXd::Constant(n, y_mean_));
    factored_ = true;
}

void GpRegressor::posterior(const Eigen::VectorXd& x, double& mean, double& var) const {
    if (!factored_) refactor();
    const int n = size();
    if (n == 0) {
        mean = 0.0;
        var = hyper_.signal_var;
        return;
    }
    Eigen::VectorXd k(n);
    for (int i = 0; i < n; ++i) k[i] = kernel(x_.row(i), x);
    mean = y_mean_ + k.dot(alpha_);
    const Eigen::VectorXd v = llt_.solve(k);
    var = std::max(0.0, hyper_.signal_var - k.dot(v));
}

double GpRegressor::log_marginal_likelihood() const {
    if (!factored_) refactor();
    const int n = size();
    if (n == 0) return 0.0;
    const Eigen::VectorXd yc = y_ - Eigen::VectorXd::Constant(n, y_mean_);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(llt_.matrixL()(i, i));
    return -0.5 * yc.dot(alpha_) - logdet - 0.5 * n * std::log(2.0 * M_PI);
}

void GpRegressor::fit_hyperparameters(const GpHyperBounds& bounds, uint64_t seed) {
    if (size() < 5) return;

    const int np = dim_ + 2;  // log signal, log lengthscales, log noise
    auto pack = [&](const GpHyper& h) {
        Eigen::VectorXd p(np);
        p[0] = std::log(h.signal_var);
        for (int d = 0; d < dim_; ++d) p[1 + d] = std::log(h.lengthscales[d]);
        p[np - 1] = std::log(h.noise_var);
        return p;
    };
    auto unpack = [&](const Eigen::VectorXd& p) {
        GpHyper h;
        h.signal_var = std::exp(p[0]);
        h.lengthscales = p.segment(1, dim_).array().exp();
        h.noise_var = std::exp(p[np - 1]);
        return h;
    };
    Eigen::VectorXd lo(np), hi(np);
    lo[0] = std::log(bounds.signal_var_min);
    hi[0] = std::log(bounds.signal_var_max);
    for (int d = 0; d < dim_; ++d) {
        lo[1 + d] = std::log(bounds.lengthscale_min[d]);
        hi[1 + d] = std::log(bounds.lengthscale_max[d]);
    }
    lo[np - 1] = std::log(bounds.noise_var_min);
    hi[np - 1] = std::log(bounds.noise_var_max);

    const GpHyper saved = hyper_;
    auto objective = [&](const Eigen::VectorXd& p) {
        GpHyper h = unpack(p);
        const_cast<GpRegressor*>(this)->hyper_ = h;
        factored_ = false;
        try {
            return log_marginal_likelihood();
        } catch (const std::exception&) {
            return -1e300;
        }
    };

    // starts: current values plus deterministic pseudo-random corners
    std::vector<Eigen::VectorXd> starts;
    starts.push_back(pack(saved).cwiseMax(lo).cwiseMin(hi));
    Rng rng(Rng::derive(seed, 0x6770ULL));
    for (int s = 0; s < 3; ++s) {
        Eigen::VectorXd p(np);
        for (int i = 0; i < np; ++i) p[i] = rng.uniform(lo[i], hi[i]);
        starts.push_back(p);
    }

    Eigen::VectorXd best_p = starts[0];
    double best_v = objective(best_p);
    for (const auto& start : starts) {
        Eigen::VectorXd p = start;
        double v = objective(p);
        double step = 0.8;
        while (step > 1e-3) {
            bool improved = false;
            for (int i = 0; i < np; ++i) {
                for (double dir : {+1.0, -1.0}) {
                    Eigen::VectorXd q = p;
                    q[i] = std::clamp(q[i] + dir * step, lo[i], hi[i]);
                    if (q[i] == p[i]) continue;
                    const double vv = objective(q);
                    if (vv > v + 1e-12) {
                        v = vv;
                        p = q;
                        improved = true;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        if (v > best_v) {
            best_v = v;
            best_p = p;
        }
    }

    // monotone acceptance: never end below the incoming hyperparameters
    hyper_ = saved;
    factored_ = false;
    const double incumbent = log_marginal_likelihood();
    if (best_v >= incumbent) {
        hyper_ = unpack(best_p);
    }
    factored_ = false;
}

}  // namespace racebo
