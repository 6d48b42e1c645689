// Observed multivariate time series: an n x p matrix with rows as time
// points, centered column-wise before any spectral work.
#pragma once

#include "cohgraph/common.hpp"

namespace cohgraph {

struct MultivariateSeries {
  Mat values;                  // n x p, rows = time
  double sampling_rate = 0.0;  // Hz; 0 means unknown, used only for band conversion
  std::vector<int> degenerate_columns;  // zero-variance columns found at centering

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index p() const { return values.cols(); }
  bool has_degenerate_columns() const { return !degenerate_columns.empty(); }
};

// Subtracts the sample mean from every column.  Zero-variance columns are
// recorded rather than rejected here; operations that need a positive
// variance (autocorrelations, coherence) refuse flagged series.
inline MultivariateSeries center_series(const Mat& raw, double sampling_rate = 0.0) {
  if (raw.rows() < 2) throw InvalidInput("center_series: need at least 2 rows");
  if (raw.cols() < 1) throw InvalidInput("center_series: need at least 1 column");
  MultivariateSeries out;
  out.sampling_rate = sampling_rate;
  out.values = raw;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    double lo = raw.col(j).minCoeff();
    double hi = raw.col(j).maxCoeff();
    if (hi - lo == 0.0) out.degenerate_columns.push_back(static_cast<int>(j));
    out.values.col(j).array() -= raw.col(j).mean();
  }
  return out;
}

}  // namespace cohgraph
