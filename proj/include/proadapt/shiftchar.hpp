#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "proadapt/partition.hpp"

namespace proadapt {

// Positive-class fraction per batch; empty batches yield nullopt.
std::vector<std::optional<double>> prevalence_series(const TemporalDataset& ds,
                                                     const std::vector<TemporalBatch>& batches);

// Uniform edges over the pooled range. All batches must share one edge set so
// their masses are comparable.
std::vector<double> histogram_edges(const std::vector<double>& pooled_values, int bins);

// Laplace-smoothed masses: (count + alpha) / (n + alpha * bins). An empty
// value list degrades to the uniform distribution. Values outside the edges
// land in the end bins.
std::vector<double> histogram_masses(const std::vector<double>& values, const std::vector<double>& edges,
                                     double alpha = 1e-6);

struct BatchPdf {
  int batch_index = 0;
  std::vector<double> masses;  // sums to 1
  bool uniform_fill = false;   // an empty stratum was replaced by uniform mass
};

// Class-conditional histograms on the shared edges, concatenated negative
// class first and renormalized, so one vector carries both conditionals.
BatchPdf conditional_concat_pdf(const std::vector<double>& values, const std::vector<int>& labels,
                                const std::vector<double>& edges);

// Jensen-Shannon distance: sqrt of the base-2 divergence, bounded by [0, 1].
double js_distance(const std::vector<double>& p, const std::vector<double>& q);

Eigen::MatrixXd distance_matrix(const std::vector<BatchPdf>& pdfs);

struct IgtProjection {
  Eigen::MatrixXd coordinates;  // one row per batch
  Eigen::VectorXd eigenvalues;  // descending, clamped at 0
};

// Classical multidimensional scaling of a distance matrix. Axes are fixed by a
// sign convention (first nonzero coordinate of each axis is positive), so the
// embedding is deterministic.
IgtProjection igt_project(const Eigen::MatrixXd& distances, int dims);

}  // namespace proadapt
