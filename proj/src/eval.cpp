#include "amnce/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace amnce {

std::vector<double> anomaly_scores(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x,
                                   const AnomalyConfig& cfg, Rng& rng) {
    if (cfg.num_chains == 0) throw std::runtime_error("anomaly: need at least one chain");
    std::vector<double> scores(x.rows(), 0.0);
    for (std::size_t chain = 0; chain < cfg.num_chains; ++chain) {
        const Tensor z = sample_posterior(gen, prior, x, cfg.posterior_ld, rng);
        const Tensor lj = log_joint(gen, prior, x, z);
        for (std::size_t b = 0; b < x.rows(); ++b) scores[b] += lj.data[b];
    }
    for (double& s : scores) s /= static_cast<double>(cfg.num_chains);
    return scores;
}

double auprc(const std::vector<ScoredExample>& scored) {
    std::size_t positives = 0;
    for (const auto& e : scored) {
        if (!std::isfinite(e.score)) throw std::runtime_error("auprc: non-finite score");
        if (e.label == ExampleLabel::Anomalous) ++positives;
    }
    if (positives == 0 || positives == scored.size()) {
        throw std::runtime_error("auprc: need both classes present");
    }

    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), 0);
    // Descending anomaly score = ascending log joint; stable for ties.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scored[a].score < scored[b].score; });

    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (scored[order[rank]].label == ExampleLabel::Anomalous) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    return ap / static_cast<double>(positives);
}

double reconstruction_mse(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x_test,
                          const LangevinConfig& cfg, Rng& rng, Tensor* recon_out) {
    const Tensor z = sample_posterior(gen, prior, x_test, cfg, rng);
    const Tensor gx = gen.decode(z);
    double sq = 0.0;
    for (std::size_t i = 0; i < gx.data.size(); ++i) {
        const double r = x_test.data[i] - gx.data[i];
        sq += r * r;
    }
    if (recon_out) *recon_out = gx;
    return sq / static_cast<double>(gx.data.size());
}

namespace {

// Lower-triangular Cholesky factor; throws on a non-PD matrix.
Tensor cholesky(const Tensor& a) {
    const std::size_t d = a.rows();
    if (a.cols() != d) throw std::runtime_error("cholesky: matrix must be square");
    Tensor l({d, d});
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return l;
}

double gaussian_log_pdf(const Tensor& mean, const Tensor& cov, const Tensor& z) {
    const std::size_t d = mean.shape[0];
    const Tensor l = cholesky(cov);
    // Solve L y = z - mean by forward substitution; the quadratic form is |y|^2.
    std::vector<double> y(d);
    for (std::size_t i = 0; i < d; ++i) {
        double s = z.data[i] - mean.data[i];
        for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
        y[i] = s / l.at(i, i);
    }
    double quad = 0.0, log_det = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        quad += y[i] * y[i];
        log_det += 2.0 * std::log(l.at(i, i));
    }
    return -0.5 * (quad + log_det + static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
}

}  // namespace

double gaussian_log_ratio(const RatioOracle& oracle, const Tensor& z_row) {
    const std::size_t d = oracle.mean_p.shape.at(0);
    if (z_row.size() != d) throw std::runtime_error("gaussian_log_ratio: point dimension mismatch");
    return gaussian_log_pdf(oracle.mean_p, oracle.cov_p, z_row) -
           gaussian_log_pdf(oracle.mean_q, oracle.cov_q, z_row);
}

double energy_distance(const Tensor& samples_a, const Tensor& samples_b) {
    if (samples_a.rows() == 0 || samples_b.rows() == 0) {
        throw std::runtime_error("energy_distance: both sample sets must be nonempty");
    }
    if (samples_a.cols() != samples_b.cols()) {
        throw std::runtime_error("energy_distance: dimension mismatch");
    }
    const std::size_t d = samples_a.cols();
    const auto pair_dist = [d](const Tensor& u, std::size_t i, const Tensor& v, std::size_t j) {
        double sq = 0.0;
        const double* ur = u.data.data() + i * d;
        const double* vr = v.data.data() + j * d;
        for (std::size_t k = 0; k < d; ++k) {
            const double r = ur[k] - vr[k];
            sq += r * r;
        }
        return std::sqrt(sq);
    };
    const auto mean_cross = [&](const Tensor& u, const Tensor& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.rows(); ++i) {
            for (std::size_t j = 0; j < v.rows(); ++j) s += pair_dist(u, i, v, j);
        }
        return s / (static_cast<double>(u.rows()) * static_cast<double>(v.rows()));
    };
    return 2.0 * mean_cross(samples_a, samples_b) - mean_cross(samples_a, samples_a) -
           mean_cross(samples_b, samples_b);
}

}  // namespace amnce
