#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mpf/features.hpp"
#include "mpf/forecast.hpp"
#include "mpf/rng.hpp"

namespace mpf::attn {

struct AttentionConfig {
    int lookback = 32;
    int horizon = 10;
    int d_model = 32;
    int n_heads = 4;
    double alpha = 0.05;  // interval level; z_{alpha/2} bounds
    int epochs = 300;
    double learning_rate = 1e-3;
    double weight_decay = 1e-3;  // overlapping windows overfit quickly without it
    std::uint64_t seed = 0;
    bool positional_encoding = true;

    int d_k() const { return d_model / n_heads; }
    int d_ff() const { return 2 * d_model; }
    void validate() const;
};

// scaled dot-product attention, softmax(Q K' / sqrt(d_k)) V, row-wise
Eigen::MatrixXd attention(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K,
                          const Eigen::MatrixXd& V);

// gradients of a scalar loss through the attention block given dL/dOut
struct AttentionGrads {
    Eigen::MatrixXd dQ, dK, dV;
};
AttentionGrads attention_backward(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K,
                                  const Eigen::MatrixXd& V, const Eigen::MatrixXd& dOut);

struct AttentionWeights {
    Eigen::MatrixXd W_embed;  // input -> d_model
    Eigen::VectorXd b_embed;
    std::vector<Eigen::MatrixXd> W_q, W_k, W_v;  // per head, d_model x d_k
    Eigen::MatrixXd W_o;                         // d_model x d_model
    Eigen::VectorXd b_o;
    Eigen::MatrixXd W_ff1;  // d_model x d_ff
    Eigen::VectorXd b_ff1;
    Eigen::MatrixXd W_ff2;  // d_ff x d_model
    Eigen::VectorXd b_ff2;
    Eigen::MatrixXd W_mu;   // d_model x horizon
    Eigen::VectorXd b_mu;
    Eigen::MatrixXd W_ls;   // d_model x horizon (log-scale head)
    Eigen::VectorXd b_ls;
    int input_size = 0;

    static AttentionWeights zeros(const AttentionConfig& cfg, int input_size);
    static AttentionWeights init(const AttentionConfig& cfg, int input_size, Rng& rng);
    std::vector<double*> flat();
};

// per-horizon (mean, log-scale) heads from one standardized input window
struct HeadOutputs {
    Eigen::VectorXd mu;
    Eigen::VectorXd log_sigma;
};
HeadOutputs encode_and_project(const AttentionWeights& w, const Eigen::MatrixXd& window,
                               const AttentionConfig& cfg);

// Gaussian negative log-likelihood of the labels under the heads plus its
// gradient; used by training and by the finite-difference checks
double nll_backward(const AttentionWeights& w, const Eigen::MatrixXd& window,
                    const Eigen::VectorXd& labels, const AttentionConfig& cfg,
                    AttentionWeights& grad_accum);

struct AttentionScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;  // channel 0 is the target
};

struct AttentionModel {
    AttentionWeights weights;
    AttentionScaler scaler;
    AttentionConfig config;
    std::vector<double> loss_curve;
    std::vector<std::string> columns;  // frozen training schema
};

// trains on all contiguous (lookback, horizon) windows of the matrix rows by
// full-batch Adam on the Gaussian NLL
AttentionModel train_gaussian_nll(const FeatureMatrix& matrix, const AttentionConfig& cfg);

struct ProbabilisticForecast {
    std::vector<double> point;
    std::vector<double> sigma;
    std::vector<double> lower;
    std::vector<double> upper;
};

// multi-horizon prediction from the lookback window ending at `origin`;
// intervals are point +- z_{alpha/2} * sigma
ProbabilisticForecast predict_with_intervals(const AttentionModel& model,
                                             const FeatureMatrix& matrix, const Quarter& origin);

// one-step rolling walk-forward (no refit): each test quarter is the h=1
// forecast from the window ending just before it, intervals included
ForecastResult walk_forward_predict(const AttentionModel& model, const Panel& panel,
                                    const SeriesKey& target_key, const FeatureSpec& spec,
                                    const Quarter& test_start, const Quarter& test_end);

}  // namespace mpf::attn
