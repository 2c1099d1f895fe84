#include "mpf/pca.hpp"

#include <algorithm>

#include "mpf/errors.hpp"

namespace mpf::pca {

PcaModel pca_fit(const Eigen::MatrixXd& rows, int n_components) {
    if (rows.rows() < 2) throw TooShort("pca needs at least 2 rows");
    if (n_components < 1) throw InvalidConfig("pca needs n_components >= 1");

    PcaModel model;
    model.requested = n_components;
    model.means = rows.colwise().mean();
    Eigen::MatrixXd centered = rows.rowwise() - model.means.transpose();
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(rows.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NearSingular("pca eigendecomposition failed");

    // ascending from Eigen; walk backwards for descending variance
    Eigen::VectorXd evals = eig.eigenvalues();
    Eigen::MatrixXd evecs = eig.eigenvectors();
    const int p = static_cast<int>(evals.size());

    double tol = 1e-12 * std::max(1.0, evals.cwiseAbs().maxCoeff());
    int informative = 0;
    for (int i = 0; i < p; ++i)
        if (evals(i) > tol) ++informative;
    int keep = std::min(n_components, informative);
    if (keep == 0) keep = 1;  // degenerate data still yields one direction
    model.rank_deficient = keep < n_components;

    model.loadings.resize(p, keep);
    model.explained_variance.resize(keep);
    for (int k = 0; k < keep; ++k) {
        int src = p - 1 - k;
        Eigen::VectorXd dir = evecs.col(src);
        // deterministic sign: largest-magnitude coefficient positive
        Eigen::Index imax;
        dir.cwiseAbs().maxCoeff(&imax);
        if (dir(imax) < 0) dir = -dir;
        model.loadings.col(k) = dir;
        model.explained_variance(k) = std::max(0.0, evals(src));
    }
    return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& rows) {
    if (rows.cols() != model.means.size()) throw ShapeMismatch("pca input width mismatch");
    return (rows.rowwise() - model.means.transpose()) * model.loadings;
}

}  // namespace mpf::pca
