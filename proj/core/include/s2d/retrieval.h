#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace s2d {

// Unit-norm global image descriptor.
struct GlobalDescriptor {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
};

// Builds a GlobalDescriptor from arbitrary values, L2-normalizing them.
// Throws DegenerateDescriptor for (near) zero input.
GlobalDescriptor MakeGlobalDescriptor(std::span<const float> values);

struct PcaOptions {
  // Divide component i by sqrt(eigenvalue_i + epsilon) before renormalizing.
  bool whiten = false;
  double whiten_epsilon = 1e-8;
};

struct PcaModel {
  Eigen::VectorXd mean;         // D
  Eigen::MatrixXd basis;        // out_dim x D, orthonormal rows
  Eigen::VectorXd eigenvalues;  // out_dim, descending
  bool whiten = false;
  double whiten_epsilon = 1e-8;
  // Trace of the sample covariance the model was fitted on.
  double total_variance = 0.0;

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(basis.rows()); }
};

// Principal components of `samples` (each a D-vector). Rows of the basis are
// sorted by eigenvalue (descending) and signed so the largest-magnitude entry
// is positive. A repeated eigenvalue gets the basis found by projecting the
// coordinate axes onto its eigenspace in index order.
PcaModel FitPca(std::span<const std::vector<float>> samples, int out_dim,
                const PcaOptions& options = {});

// Projects, optionally whitens, and renormalizes. Throws DimensionMismatch or
// DegenerateDescriptor (projection norm < 1e-12).
GlobalDescriptor ApplyPca(const PcaModel& model, std::span<const float> desc);

// Projection without the degenerate check: returns false and leaves `out`
// zeroed when the projection vanishes.
bool TryApplyPca(const PcaModel& model, std::span<const float> desc,
                 std::span<float> out);

class DescriptorDatabase {
 public:
  struct Entry {
    std::string id;
    GlobalDescriptor descriptor;
  };

  // Throws InvalidArgument on a duplicate id, DimensionMismatch when the
  // dimension differs from existing entries.
  void Add(std::string id, GlobalDescriptor descriptor);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t dim() const {
    return entries_.empty() ? 0 : entries_.front().descriptor.dim();
  }

 private:
  std::vector<Entry> entries_;
};

struct RankedEntry {
  std::string id;
  std::size_t index = 0;  // position in the database
  double score = 0.0;     // dot product with the query
};

// Top-min(k, |db|) entries by descending dot product; ties by ascending id.
std::vector<RankedEntry> Rank(const GlobalDescriptor& query,
                              const DescriptorDatabase& db, std::size_t k);

}  // namespace s2d
