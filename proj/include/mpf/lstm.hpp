#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpf/features.hpp"
#include "mpf/forecast.hpp"
#include "mpf/rng.hpp"

namespace mpf::lstm {

struct LstmConfig {
    int hidden_size = 512;  // full-scale; test profiles override to 32
    double dropout = 0.02;
    int lookback = 8;
    int epochs = 100;
    int finetune_epochs = 50;
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

// Gate weights operate on the concatenation [h_{t-1}, x_t].
struct LstmWeights {
    Eigen::MatrixXd W_f, W_i, W_o, W_c;  // hidden x (hidden + input)
    Eigen::VectorXd b_f, b_i, b_o, b_c;
    Eigen::MatrixXd dense_W;  // hidden x hidden, ReLU
    Eigen::VectorXd dense_b;
    Eigen::RowVectorXd W_out;  // 1 x hidden
    double b_out = 0.0;
    int input_size = 0;
    int hidden_size = 0;

    static LstmWeights zeros(int hidden, int input);
    // uniform +-1/sqrt(fan_in) with forget-gate bias +1
    static LstmWeights init(int hidden, int input, Rng& rng);

    // mutable views over every coefficient, in a fixed order; shared by the
    // Adam update, the finite-difference check and serialization
    std::vector<double*> flat();
    size_t n_params() const;

    void scale_add(const LstmWeights& g, double factor);  // this += factor * g
};

struct CellState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
};

// One application of the gating equations; exposed for the unit tests.
CellState cell_step(const LstmWeights& w, const Eigen::VectorXd& h_prev,
                    const Eigen::VectorXd& c_prev, const Eigen::VectorXd& x_t);

// Unrolls the cell over `seq` (lookback rows of inputs) from zero state and
// applies the ReLU dense layer and the linear head. No dropout.
double forward(const LstmWeights& w, const std::vector<Eigen::VectorXd>& seq);

// Squared-error loss 0.5*(yhat-y)^2 for one sequence plus its gradient with
// respect to every weight; dropout_mask is empty at inference scale or holds
// the inverted-dropout factors applied to h_T.
double backward(const LstmWeights& w, const std::vector<Eigen::VectorXd>& seq, double target,
                const Eigen::VectorXd& dropout_mask, LstmWeights& grad_accum);

struct Standardizer {
    Eigen::VectorXd mean;  // per input channel; channel 0 is the target
    Eigen::VectorXd sd;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    // window-anchored form used by training and prediction (appends the
    // anchor's global z as an extra channel)
    Eigen::VectorXd apply_anchored(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& anchor) const;
    double target_to_z(double y) const { return (y - mean(0)) / sd(0); }
    double z_to_target(double z) const { return mean(0) + sd(0) * z; }
};

struct TrainingState {
    LstmWeights weights;
    LstmWeights m;  // Adam first moments
    LstmWeights v;  // Adam second moments
    long step = 0;
    Rng rng{0};
    Standardizer scaler;
    LstmConfig config;
    std::vector<double> loss_curve;  // mean training loss per epoch
    // column schema the model was trained on; walk-forward rebuilds matrices
    // against this frozen set so screening cannot shift the inputs
    std::vector<std::string> columns;
};

// Input rows are [target, feature...] per quarter; sequences are all
// contiguous lookback-length windows whose next quarter is also present,
// labeled with that next-quarter target. Standardization uses these rows.
TrainingState train(const FeatureMatrix& matrix, const LstmConfig& cfg);

// cross-validation variant: only sequences whose label row index is in
// label_rows are trained on (the scaler still uses every row)
TrainingState train_on_labels(const FeatureMatrix& matrix, const LstmConfig& cfg,
                              const std::vector<size_t>& label_rows);

// continue training an existing state on (possibly grown) data, keeping the
// original scaler
void train_more(TrainingState& state, const FeatureMatrix& matrix, int epochs);

// prediction for the quarter following the matrix's last lookback window
double predict_next(const TrainingState& state, const FeatureMatrix& matrix,
                    const Quarter& origin);

// Walk-forward over [test_start, test_end]: predict each quarter from the
// trailing lookback window, then reveal the actual and fine-tune on all data
// up to that point. Predictions are recorded before the fine-tune step.
ForecastResult walk_forward_predict(TrainingState& state, const Panel& panel,
                                    const SeriesKey& target_key, const FeatureSpec& spec,
                                    const Quarter& test_start, const Quarter& test_end);

// versioned binary weight serialization with the config hash embedded
void save_weights(const TrainingState& state, const std::string& path);
TrainingState load_weights(const std::string& path);

}  // namespace mpf::lstm
