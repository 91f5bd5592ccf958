#ifndef AMNCE_EVAL_HPP
#define AMNCE_EVAL_HPP

#include <vector>

#include "amnce/sampling.hpp"

namespace amnce {

enum class ExampleLabel { Normal, Anomalous };

struct ScoredExample {
    double score = 0.0;  // log joint density; higher = more normal
    ExampleLabel label = ExampleLabel::Normal;
};

struct AnomalyConfig {
    LangevinConfig posterior_ld{30, 0.1};
    std::size_t num_chains = 1;  // chains averaged per example
};

// Log joint density at short-run posterior samples, one value per row of x.
std::vector<double> anomaly_scores(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x,
                                   const AnomalyConfig& cfg, Rng& rng);

// Average precision with anomalous as the positive class, ranked by
// descending anomaly score (= negated log joint), ties in stable input order.
double auprc(const std::vector<ScoredExample>& scored);

// Mean over examples and dimensions of the squared posterior reconstruction
// residual. When recon_out is given it receives the decoded reconstructions.
double reconstruction_mse(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x_test,
                          const LangevinConfig& cfg, Rng& rng, Tensor* recon_out = nullptr);

// Closed-form log N(z; mean_p, cov_p) - log N(z; mean_q, cov_q).
struct RatioOracle {
    Tensor mean_p, mean_q;  // [d]
    Tensor cov_p, cov_q;    // [d, d], positive definite
};
double gaussian_log_ratio(const RatioOracle& oracle, const Tensor& z_row);

// 2 E|a-b| - E|a-a'| - E|b-b'| over all sample pairs (V-statistic).
double energy_distance(const Tensor& samples_a, const Tensor& samples_b);

}  // namespace amnce

#endif
