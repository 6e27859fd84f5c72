#include "s2d/retrieval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "s2d/error.h"
#include "s2d/parallel.h"

namespace s2d {
namespace {

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXd vector;
};

// Largest-magnitude entry positive; first index wins magnitude ties.
void FixSign(Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) v = -v;
}

// Orthonormal vectors obtained by walking the coordinate axes in order and
// keeping what survives Gram-Schmidt against `existing` (and each other).
// When `span` is given the axes are first projected onto it, which yields a
// canonical basis of that subspace.
std::vector<Eigen::VectorXd> AxisOrderedBasis(
    int dim, int count, const std::vector<Eigen::VectorXd>& existing,
    const std::vector<Eigen::VectorXd>* span) {
  std::vector<Eigen::VectorXd> out;
  for (int axis = 0; axis < dim && static_cast<int>(out.size()) < count; ++axis) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(dim, axis);
    if (span != nullptr) {
      Eigen::VectorXd projected = Eigen::VectorXd::Zero(dim);
      for (const auto& s : *span) projected += s.dot(v) * s;
      v = projected;
    }
    // Two passes of modified Gram-Schmidt for numerical orthogonality.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& e : existing) v -= e.dot(v) * e;
      for (const auto& e : out) v -= e.dot(v) * e;
    }
    if (v.norm() > 1e-6) out.push_back(v.normalized());
  }
  return out;
}

}  // namespace

GlobalDescriptor MakeGlobalDescriptor(std::span<const float> values) {
  double sum = 0.0;
  for (const float v : values) sum += static_cast<double>(v) * v;
  const double norm = std::sqrt(sum);
  S2D_CHECK(norm >= 1e-12, ErrorCode::kDegenerateDescriptor,
            "global descriptor has zero norm");
  GlobalDescriptor out;
  out.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.values[i] = static_cast<float>(values[i] / norm);
  }
  return out;
}

PcaModel FitPca(std::span<const std::vector<float>> samples, int out_dim,
                const PcaOptions& options) {
  const int n = static_cast<int>(samples.size());
  S2D_CHECK(n >= 2, ErrorCode::kInsufficientSamples,
            "PCA needs at least 2 samples, got " + std::to_string(n));
  const int dim = static_cast<int>(samples.front().size());
  S2D_CHECK(dim >= 1, ErrorCode::kInvalidArgument, "empty sample vectors");
  for (const auto& s : samples) {
    S2D_CHECK(static_cast<int>(s.size()) == dim, ErrorCode::kDimensionMismatch,
              "PCA samples have inconsistent dimensions");
  }
  S2D_CHECK(out_dim >= 1 && out_dim <= std::min(n - 1, dim),
            ErrorCode::kDimensionTooLarge,
            "out_dim " + std::to_string(out_dim) + " exceeds min(count-1, D) = " +
                std::to_string(std::min(n - 1, dim)));

  Eigen::MatrixXd x(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) x(i, j) = samples[i][j];
  }
  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  x.rowwise() -= model.mean.transpose();
  model.total_variance = x.squaredNorm() / (n - 1);
  model.whiten = options.whiten;
  model.whiten_epsilon = options.whiten_epsilon;

  std::vector<EigenPair> pairs;
  if (dim <= n) {
    const Eigen::MatrixXd cov = (x.transpose() * x) / (n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (int i = 0; i < dim; ++i) {
      pairs.push_back({solver.eigenvalues()[i], solver.eigenvectors().col(i)});
    }
  } else {
    // Gram trick: eigenvectors of X Xᵀ map to those of XᵀX through Xᵀ.
    const Eigen::MatrixXd gram = (x * x.transpose()) / (n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    const double largest = std::max(solver.eigenvalues().maxCoeff(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double lambda = solver.eigenvalues()[i];
      if (lambda <= 1e-12 * largest || lambda <= 0.0) continue;
      Eigen::VectorXd u = x.transpose() * solver.eigenvectors().col(i);
      u /= u.norm();
      pairs.push_back({lambda, u});
    }
  }

  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const EigenPair& a, const EigenPair& b) {
                     return a.value > b.value;
                   });
  const double largest = pairs.empty() ? 0.0 : std::abs(pairs.front().value);
  const double tie_tol = 1e-10 * largest;

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> values;
  for (std::size_t start = 0; start < pairs.size() &&
                              static_cast<int>(rows.size()) < out_dim;) {
    std::size_t stop = start + 1;
    while (stop < pairs.size() &&
           std::abs(pairs[stop].value - pairs[start].value) <= tie_tol) {
      ++stop;
    }
    std::vector<Eigen::VectorXd> group;
    for (std::size_t i = start; i < stop; ++i) group.push_back(pairs[i].vector);
    if (group.size() > 1) {
      group = AxisOrderedBasis(dim, static_cast<int>(group.size()), rows, &group);
    }
    for (std::size_t i = 0; i < group.size(); ++i) {
      rows.push_back(group[i]);
      values.push_back(std::max(pairs[start + std::min(i, stop - start - 1)].value, 0.0));
    }
    start = stop;
  }
  // Directions with zero variance that the Gram path could not recover.
  if (static_cast<int>(rows.size()) < out_dim) {
    const auto extra = AxisOrderedBasis(
        dim, out_dim - static_cast<int>(rows.size()), rows, nullptr);
    for (const auto& v : extra) {
      rows.push_back(v);
      values.push_back(0.0);
    }
  }

  model.basis.resize(out_dim, dim);
  model.eigenvalues.resize(out_dim);
  for (int i = 0; i < out_dim; ++i) {
    Eigen::VectorXd v = rows[i];
    FixSign(v);
    model.basis.row(i) = v.transpose();
    model.eigenvalues[i] = values[i];
  }
  return model;
}

bool TryApplyPca(const PcaModel& model, std::span<const float> desc,
                 std::span<float> out) {
  S2D_CHECK(static_cast<int>(desc.size()) == model.input_dim(),
            ErrorCode::kDimensionMismatch,
            "descriptor dim " + std::to_string(desc.size()) +
                " != PCA input dim " + std::to_string(model.input_dim()));
  S2D_CHECK(static_cast<int>(out.size()) == model.output_dim(),
            ErrorCode::kDimensionMismatch, "PCA output buffer size mismatch");
  Eigen::VectorXd centered(desc.size());
  for (std::size_t i = 0; i < desc.size(); ++i) {
    centered[i] = static_cast<double>(desc[i]) - model.mean[i];
  }
  Eigen::VectorXd y = model.basis * centered;
  if (model.whiten) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      y[i] /= std::sqrt(model.eigenvalues[i] + model.whiten_epsilon);
    }
  }
  const double norm = y.norm();
  if (!(norm >= 1e-12)) {
    std::fill(out.begin(), out.end(), 0.0f);
    return false;
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out[i] = static_cast<float>(y[i] / norm);
  }
  return true;
}

GlobalDescriptor ApplyPca(const PcaModel& model, std::span<const float> desc) {
  GlobalDescriptor out;
  out.values.resize(model.output_dim());
  S2D_CHECK(TryApplyPca(model, desc, out.values),
            ErrorCode::kDegenerateDescriptor,
            "descriptor projects to zero under the PCA model");
  return out;
}

void DescriptorDatabase::Add(std::string id, GlobalDescriptor descriptor) {
  S2D_CHECK(entries_.empty() || descriptor.dim() == dim(),
            ErrorCode::kDimensionMismatch,
            "descriptor for '" + id + "' has dim " +
                std::to_string(descriptor.dim()) + ", database has " +
                std::to_string(dim()));
  for (const auto& e : entries_) {
    S2D_CHECK(e.id != id, ErrorCode::kInvalidArgument,
              "duplicate reference id '" + id + "'");
  }
  entries_.push_back({std::move(id), std::move(descriptor)});
}

std::vector<RankedEntry> Rank(const GlobalDescriptor& query,
                              const DescriptorDatabase& db, std::size_t k) {
  S2D_CHECK(!db.empty(), ErrorCode::kEmptyDatabase, "database is empty");
  S2D_CHECK(k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  S2D_CHECK(query.dim() == db.dim(), ErrorCode::kDimensionMismatch,
            "query dim " + std::to_string(query.dim()) + " != database dim " +
                std::to_string(db.dim()));

  const auto& entries = db.entries();
  std::vector<RankedEntry> scored(entries.size());
  ParallelFor(0, entries.size(), 256, [&](std::size_t i) {
    const auto& values = entries[i].descriptor.values;
    double dot = 0.0;
    for (std::size_t c = 0; c < values.size(); ++c) {
      dot += static_cast<double>(query.values[c]) * values[c];
    }
    scored[i] = {entries[i].id, i, dot};
  });

  const std::size_t count = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + count, scored.end(),
                    [](const RankedEntry& a, const RankedEntry& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.id < b.id;
                    });
  scored.resize(count);
  return scored;
}

}  // namespace s2d
