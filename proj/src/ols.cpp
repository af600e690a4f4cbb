#include "dyadrobust/ols.hpp"

#include <cmath>

#include "dyadrobust/error.hpp"

namespace dyadrobust {
namespace {

double norm1(const Eigen::MatrixXd& A) {
  return A.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace

FitResult fit_ols(Eigen::MatrixXd X, const Eigen::VectorXd& y,
                  std::vector<std::string> column_names) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "outcome length does not match design rows");
  }
  if (p == 0) {
    throw Error(ErrorKind::InvalidArgument, "design has no columns");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "design or outcome contains non-finite values");
  }
  if (n < p) {
    throw Error(ErrorKind::RankDeficient,
                "fewer observations than coefficients (" + std::to_string(n) +
                    " < " + std::to_string(p) + ")")
        .with_value(0.0);
  }
  if (column_names.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) column_names.push_back("x" + std::to_string(j));
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::MatrixXd R =
      qr.matrixQR().topRows(p).template triangularView<Eigen::Upper>();

  double rcond = 0.0;
  Eigen::MatrixXd R_inv;
  if ((R.diagonal().array() != 0.0).all()) {
    R_inv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const double denom = norm1(R) * norm1(R_inv);
    rcond = std::isfinite(denom) && denom > 0.0 ? 1.0 / denom : 0.0;
  }
  if (!(rcond >= kMinReciprocalCondition)) {
    throw Error(ErrorKind::RankDeficient,
                "design matrix is rank deficient (reciprocal condition " +
                    std::to_string(rcond) + ")")
        .with_value(rcond);
  }

  FitResult fit;
  fit.coefficients = qr.solve(y);
  fit.residuals = y - X * fit.coefficients;

  const Eigen::MatrixXd inner = R_inv * R_inv.transpose();
  const auto& perm = qr.colsPermutation();
  Eigen::MatrixXd bread = perm * inner * perm.transpose();
  fit.bread = 0.5 * (bread + bread.transpose());

  fit.design = std::make_shared<const Eigen::MatrixXd>(std::move(X));
  fit.column_names = std::move(column_names);
  fit.n = static_cast<std::size_t>(n);
  fit.p = static_cast<std::size_t>(p);
  fit.reciprocal_condition = rcond;
  return fit;
}

FitResult fit_ols(const Design& design, const Eigen::VectorXd& y) {
  return fit_ols(design.X, y, design.column_names);
}

ScoreSet scores(const FitResult& fit) {
  return ScoreSet{fit.design->array().colwise() * fit.residuals.array()};
}

}  // namespace dyadrobust
