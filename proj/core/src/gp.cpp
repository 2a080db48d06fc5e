#include "bilbo/gp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

namespace bilbo {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873127623544;
constexpr std::array<double, 4> kJitter = {0.0, 1e-8, 1e-6, 1e-4};
constexpr Eigen::Index kQueryChunk = 4096;

Eigen::MatrixXd squared_distances(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b)
{
    const Eigen::VectorXd an = a.colwise().squaredNorm().transpose();
    const Eigen::RowVectorXd bn = b.colwise().squaredNorm();
    Eigen::MatrixXd d2 = -2.0 * (a.transpose() * b);
    d2.colwise() += an;
    d2.rowwise() += bn;
    return d2.cwiseMax(0.0);
}

// Applies the Matern 5/2 profile in place to a matrix of distances.
void matern_in_place(Eigen::MatrixXd& dist, const GPHyperparams& hp)
{
    auto s = (kSqrt5 / hp.lengthscale) * dist.array();
    dist = (hp.outputscale * (1.0 + s + s.square() / 3.0) * (-s).exp()).matrix();
}

Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& k, double noise_variance)
{
    Eigen::LLT<Eigen::MatrixXd> llt;
    for (double jitter : kJitter) {
        Eigen::MatrixXd a = k;
        a.diagonal().array() += noise_variance + jitter;
        llt.compute(a);
        if (llt.info() == Eigen::Success)
            return llt;
    }
    throw FactorizationError("kernel matrix is not positive definite after jitter");
}

double lml_from_distances(const Eigen::MatrixXd& dist, const Eigen::VectorXd& centred, const GPHyperparams& hp)
{
    Eigen::MatrixXd k = dist;
    matern_in_place(k, hp);
    const auto llt = factorize(k, hp.noise_variance);
    const Eigen::VectorXd alpha = llt.solve(centred);
    const double n = static_cast<double>(centred.size());
    const double log_det_half = llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * centred.dot(alpha) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace

void GPHyperparams::validate() const
{
    if (!(lengthscale > 0.0) || !(outputscale > 0.0) || !(noise_variance > 0.0) || !std::isfinite(prior_mean))
        throw std::invalid_argument("GP scale hyperparameters must be strictly positive");
}

double matern52_from_distance(double r, const GPHyperparams& hp)
{
    const double s = kSqrt5 * r / hp.lengthscale;
    return hp.outputscale * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double matern52(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                const GPHyperparams& hp)
{
    if (a.size() != b.size())
        throw std::invalid_argument("kernel inputs differ in dimension");
    return matern52_from_distance((a - b).norm(), hp);
}

Eigen::MatrixXd matern52_matrix(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b,
                                const GPHyperparams& hp)
{
    if (a.rows() != b.rows())
        throw std::invalid_argument("kernel inputs differ in dimension");
    Eigen::MatrixXd k = squared_distances(a, b).cwiseSqrt();
    matern_in_place(k, hp);
    return k;
}

void GPDataset::add(const Eigen::Ref<const Eigen::VectorXd>& input, double target, double raw_target)
{
    if (dim_ == 0)
        dim_ = static_cast<std::size_t>(input.size());
    if (static_cast<std::size_t>(input.size()) != dim_)
        throw std::invalid_argument("dataset input dimension mismatch");
    inputs_.insert(inputs_.end(), input.data(), input.data() + input.size());
    targets_.push_back(target);
    raw_targets_.push_back(raw_target);
}

Eigen::MatrixXd GPDataset::inputs() const
{
    return Eigen::Map<const Eigen::MatrixXd>(inputs_.data(), static_cast<Eigen::Index>(dim_),
                                             static_cast<Eigen::Index>(size()));
}

Eigen::VectorXd GPDataset::targets() const
{
    return Eigen::Map<const Eigen::VectorXd>(targets_.data(), static_cast<Eigen::Index>(size()));
}

Eigen::VectorXd GPDataset::input(std::size_t i) const
{
    if (i >= size())
        throw std::out_of_range("dataset index");
    return Eigen::Map<const Eigen::VectorXd>(inputs_.data() + i * dim_, static_cast<Eigen::Index>(dim_));
}

GPPosterior posterior(const GPDataset& data, const GPHyperparams& hp, const Eigen::Ref<const Eigen::MatrixXd>& query)
{
    hp.validate();
    const Eigen::Index q = query.cols();
    GPPosterior out;
    if (data.empty()) {
        out.mean = Eigen::VectorXd::Constant(q, hp.prior_mean);
        out.std = Eigen::VectorXd::Constant(q, std::sqrt(hp.outputscale));
        return out;
    }
    if (static_cast<std::size_t>(query.rows()) != data.dim())
        throw std::invalid_argument("query dimension differs from dataset");

    const Eigen::MatrixXd x = data.inputs();
    const auto llt = factorize(matern52_matrix(x, x, hp), hp.noise_variance);
    const Eigen::VectorXd alpha = llt.solve((data.targets().array() - hp.prior_mean).matrix());
    const Eigen::MatrixXd l = llt.matrixL();

    out.mean.resize(q);
    out.std.resize(q);
    for (Eigen::Index start = 0; start < q; start += kQueryChunk) {
        const Eigen::Index len = std::min(kQueryChunk, q - start);
        Eigen::MatrixXd ks = matern52_matrix(x, query.middleCols(start, len), hp);
        out.mean.segment(start, len) = (ks.transpose() * alpha).array() + hp.prior_mean;
        l.triangularView<Eigen::Lower>().solveInPlace(ks);
        const Eigen::ArrayXd var = hp.outputscale - ks.colwise().squaredNorm().transpose().array();
        out.std.segment(start, len) = var.max(0.0).sqrt().matrix();
    }
    return out;
}

double log_marginal_likelihood(const GPDataset& data, const GPHyperparams& hp)
{
    hp.validate();
    if (data.empty())
        throw std::invalid_argument("log marginal likelihood needs at least one observation");
    const Eigen::MatrixXd x = data.inputs();
    const Eigen::MatrixXd dist = squared_distances(x, x).cwiseSqrt();
    return lml_from_distances(dist, (data.targets().array() - hp.prior_mean).matrix(), hp);
}

GPHyperparams fit_mle(const GPDataset& data, const GPHyperparams& init, bool noise_variance_fixed,
                      const MleOptions& options)
{
    init.validate();
    if (data.size() < 2)
        return init;

    const Eigen::MatrixXd x = data.inputs();
    const Eigen::MatrixXd dist = squared_distances(x, x).cwiseSqrt();
    const Eigen::VectorXd centred = (data.targets().array() - init.prior_mean).matrix();

    const std::size_t nparams = noise_variance_fixed ? 2 : 3;
    const std::array<double, 3> lo = {options.log_lengthscale_min, options.log_outputscale_min, options.log_noise_min};
    const std::array<double, 3> hi = {options.log_lengthscale_max, options.log_outputscale_max, options.log_noise_max};

    auto to_hp = [&](const std::array<double, 3>& p) {
        GPHyperparams hp = init;
        hp.lengthscale = std::exp(p[0]);
        hp.outputscale = std::exp(p[1]);
        if (!noise_variance_fixed)
            hp.noise_variance = std::exp(p[2]);
        return hp;
    };
    auto objective = [&](const std::array<double, 3>& p) {
        try {
            const double v = lml_from_distances(dist, centred, to_hp(p));
            return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
        } catch (const FactorizationError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    const std::array<double, 3> origin = {std::log(init.lengthscale), std::log(init.outputscale),
                                          std::log(init.noise_variance)};
    double best_value = objective(origin);
    std::array<double, 3> best = origin;

    for (double shift : {0.0, -1.0, 1.0}) {
        std::array<double, 3> p = origin;
        for (std::size_t i = 0; i < nparams; ++i)
            p[i] = std::clamp(p[i] + shift, lo[i], hi[i]);
        double value = objective(p);
        std::size_t evals = 1;
        double step = options.initial_step;
        while (step >= options.min_step && evals < options.max_evaluations_per_start) {
            bool moved = false;
            for (std::size_t i = 0; i < nparams && !moved; ++i) {
                for (double dir : {1.0, -1.0}) {
                    std::array<double, 3> cand = p;
                    cand[i] = std::clamp(p[i] + dir * step, lo[i], hi[i]);
                    if (cand[i] == p[i])
                        continue;
                    const double v = objective(cand);
                    ++evals;
                    if (v > value) {
                        p = cand;
                        value = v;
                        moved = true;
                        break;
                    }
                }
            }
            if (!moved)
                step *= 0.5;
        }
        if (value > best_value) {
            best_value = value;
            best = p;
        }
    }
    if (!std::isfinite(best_value))
        return init;
    return to_hp(best);
}

}  // namespace bilbo
