#include "proadapt/shiftchar.hpp"

#include <algorithm>
#include <cmath>

namespace proadapt {

std::vector<std::optional<double>> prevalence_series(const TemporalDataset& ds,
                                                     const std::vector<TemporalBatch>& batches) {
  std::vector<std::optional<double>> out;
  out.reserve(batches.size());
  for (const TemporalBatch& b : batches) {
    if (b.empty()) {
      out.push_back(std::nullopt);
      continue;
    }
    std::size_t pos = 0;
    for (const std::uint32_t id : b.record_ids) {
      const int label = ds.records.at(id).label;
      if (label != 0 && label != 1) throw ValidationError("batch " + b.label + " contains an unlabeled record");
      pos += static_cast<std::size_t>(label);
    }
    out.push_back(static_cast<double>(pos) / static_cast<double>(b.record_ids.size()));
  }
  return out;
}

std::vector<double> histogram_edges(const std::vector<double>& pooled_values, int bins) {
  if (bins < 1) throw ValidationError("bins must be >= 1");
  if (pooled_values.empty()) throw ValidationError("cannot derive histogram edges from no values");
  double lo = pooled_values.front(), hi = pooled_values.front();
  for (const double v : pooled_values) {
    if (!std::isfinite(v)) throw ValidationError("histogram values must be finite");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) throw ValidationError("all values identical; histogram edges undefined");
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  edges.back() = hi;
  return edges;
}

std::vector<double> histogram_masses(const std::vector<double>& values, const std::vector<double>& edges,
                                     double alpha) {
  if (edges.size() < 2) throw ValidationError("need at least two histogram edges");
  if (!(alpha > 0.0)) throw ValidationError("smoothing alpha must be > 0");
  const int bins = static_cast<int>(edges.size()) - 1;
  const double lo = edges.front(), hi = edges.back();
  if (!(hi > lo)) throw ValidationError("histogram edges must span a positive range");
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (const double v : values) {
    auto idx = static_cast<long long>(std::floor((v - lo) / (hi - lo) * bins));
    idx = std::clamp(idx, 0ll, static_cast<long long>(bins) - 1);
    counts[static_cast<std::size_t>(idx)] += 1.0;
  }
  const double denom = static_cast<double>(values.size()) + alpha * bins;
  for (double& c : counts) c = (c + alpha) / denom;
  return counts;
}

BatchPdf conditional_concat_pdf(const std::vector<double>& values, const std::vector<int>& labels,
                                const std::vector<double>& edges) {
  if (values.size() != labels.size()) throw ValidationError("values and labels lengths differ");
  std::vector<double> neg, pos;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (labels[i] == 0) {
      neg.push_back(values[i]);
    } else if (labels[i] == 1) {
      pos.push_back(values[i]);
    } else {
      throw ValidationError("labels must be 0 or 1");
    }
  }
  BatchPdf pdf;
  pdf.uniform_fill = neg.empty() || pos.empty();
  const std::vector<double> m_neg = histogram_masses(neg, edges);
  const std::vector<double> m_pos = histogram_masses(pos, edges);
  pdf.masses.reserve(m_neg.size() + m_pos.size());
  for (const double m : m_neg) pdf.masses.push_back(0.5 * m);
  for (const double m : m_pos) pdf.masses.push_back(0.5 * m);
  return pdf;
}

double js_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ValidationError("distributions must share a support");
  if (p.empty()) throw ValidationError("distributions must not be empty");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw ValidationError("mass vectors must be nonnegative");
    sp += p[i];
    sq += q[i];
  }
  if (std::fabs(sp - 1.0) > 1e-6 || std::fabs(sq - 1.0) > 1e-6) {
    throw ValidationError("mass vectors must sum to 1");
  }
  const double ln2 = std::log(2.0);
  double div = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) div += 0.5 * p[i] * std::log(p[i] / m) / ln2;
    if (q[i] > 0.0) div += 0.5 * q[i] * std::log(q[i] / m) / ln2;
  }
  div = std::clamp(div, 0.0, 1.0);
  return std::sqrt(div);
}

Eigen::MatrixXd distance_matrix(const std::vector<BatchPdf>& pdfs) {
  if (pdfs.empty()) throw ValidationError("no distributions to compare");
  const std::size_t q = pdfs.size();
  for (const BatchPdf& pdf : pdfs) {
    if (pdf.masses.size() != pdfs.front().masses.size()) {
      throw ValidationError("distributions must share a support");
    }
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i + 1; j < q; ++j) {
      const double d = js_distance(pdfs[i].masses, pdfs[j].masses);
      D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
      D(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
    }
  }
  return D;
}

IgtProjection igt_project(const Eigen::MatrixXd& distances, int dims) {
  if (dims < 1) throw ValidationError("projection dims must be >= 1");
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) throw ValidationError("distance matrix must be square");
  if (n < dims + 1) throw ValidationError("projection needs at least dims+1 batches");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::fabs(distances(i, i)) > 1e-12) throw ValidationError("distance matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (distances(i, j) < -1e-12) throw ValidationError("distances must be nonnegative");
      if (std::fabs(distances(i, j) - distances(j, i)) > 1e-9) {
        throw ValidationError("distance matrix must be symmetric");
      }
    }
  }

  const Eigen::MatrixXd D2 = distances.array().square().matrix();
  const Eigen::MatrixXd J =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd B = -0.5 * J * D2 * J;
  B = ((B + B.transpose()) / 2.0).eval();

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

  IgtProjection out;
  out.coordinates = Eigen::MatrixXd::Zero(n, dims);
  out.eigenvalues = Eigen::VectorXd::Zero(dims);
  for (int k = 0; k < dims; ++k) {
    const Eigen::Index src = n - 1 - k;  // solver sorts ascending
    const double lambda = std::max(es.eigenvalues()[src], 0.0);
    out.eigenvalues[k] = lambda;
    if (lambda == 0.0) continue;
    Eigen::VectorXd axis = es.eigenvectors().col(src) * std::sqrt(lambda);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::fabs(axis[i]) > 1e-9) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
    out.coordinates.col(k) = axis;
  }
  return out;
}

}  // namespace proadapt
