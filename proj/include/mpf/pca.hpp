#pragma once

#include <Eigen/Dense>

namespace mpf::pca {

struct PcaModel {
    Eigen::VectorXd means;
    Eigen::MatrixXd loadings;            // columns are orthonormal directions
    Eigen::VectorXd explained_variance;  // non-increasing
    int requested = 0;
    bool rank_deficient = false;  // fewer informative directions than requested

    int retained() const { return static_cast<int>(loadings.cols()); }
};

// Principal components of the rows (observations x variables) by
// eigendecomposition of the sample covariance. Keeps at most n_components
// directions, fewer when the covariance is rank deficient (flagged). Loading
// signs are fixed so the largest-magnitude entry of each direction is
// positive, which makes fits reproducible.
PcaModel pca_fit(const Eigen::MatrixXd& rows, int n_components);

// centered projection; scores of the fit rows have zero column means
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& rows);

}  // namespace mpf::pca
