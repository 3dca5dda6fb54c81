#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mortgp {

enum class Linkage { kSingle, kComplete };

[[nodiscard]] std::string to_string(Linkage linkage);
[[nodiscard]] Linkage linkage_from_string(const std::string& name);

// One agglomerative merge. Cluster ids: leaves are 0..n-1; the merge at
// step s creates cluster n+s.
struct Merge {
  int first = 0;   // first < second
  int second = 0;
  double height = 0.0;
};

struct Dendrogram {
  int leaf_count = 0;
  Linkage linkage = Linkage::kSingle;
  std::vector<Merge> merges;  // n-1 entries, nondecreasing heights
};

// Agglomerative clustering of a symmetric nonnegative distance matrix with
// zero diagonal. Ties break deterministically on the lexicographically
// smallest (first, second) cluster-id pair.
[[nodiscard]] Dendrogram hierarchical_cluster(const Eigen::MatrixXd& distances,
                                              Linkage linkage);

// Newick serialization with ultrametric branch lengths (parent height minus
// child height; leaves sit at height 0). Labels index the leaves.
[[nodiscard]] std::string to_newick(const Dendrogram& tree,
                                    const std::vector<std::string>& labels);

// Rows step,first,second,height,first_label,second_label; internal nodes
// are labeled node<id>.
void write_merges_csv(std::ostream& out, const Dendrogram& tree,
                      const std::vector<std::string>& labels);

}  // namespace mortgp
