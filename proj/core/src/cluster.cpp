#include "mortgp/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "text_util.hpp"

namespace mortgp {

std::string to_string(Linkage linkage) {
  return linkage == Linkage::kSingle ? "single" : "complete";
}

Linkage linkage_from_string(const std::string& name) {
  if (name == "single") return Linkage::kSingle;
  if (name == "complete") return Linkage::kComplete;
  throw std::invalid_argument("unknown linkage: " + name);
}

Dendrogram hierarchical_cluster(const Eigen::MatrixXd& distances,
                                Linkage linkage) {
  const int leaves = static_cast<int>(distances.rows());
  if (distances.cols() != leaves || leaves < 2) {
    throw std::invalid_argument(
        "distance matrix must be square with at least 2 rows");
  }
  const double scale = distances.cwiseAbs().maxCoeff();
  for (int i = 0; i < leaves; ++i) {
    if (distances(i, i) != 0.0) {
      throw std::invalid_argument("distance matrix diagonal must be zero");
    }
    for (int j = 0; j < leaves; ++j) {
      const double d = distances(i, j);
      if (!std::isfinite(d) || d < 0.0) {
        throw std::invalid_argument(
            "distances must be finite and nonnegative");
      }
      if (std::abs(d - distances(j, i)) > 1e-12 * (1.0 + scale)) {
        throw std::invalid_argument("distance matrix must be symmetric");
      }
    }
  }

  // Working matrix over all 2n-1 cluster ids; merge s creates id n+s.
  const int total = 2 * leaves - 1;
  Eigen::MatrixXd work = Eigen::MatrixXd::Zero(total, total);
  work.topLeftCorner(leaves, leaves) = distances;
  std::vector<int> active(static_cast<std::size_t>(leaves));
  for (int i = 0; i < leaves; ++i) active[static_cast<std::size_t>(i)] = i;

  Dendrogram tree;
  tree.leaf_count = leaves;
  tree.linkage = linkage;
  for (int step = 0; step < leaves - 1; ++step) {
    // Scanning id-ascending with strict < makes the lexicographically
    // smallest pair win every tie.
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    std::size_t best_j = 1;
    for (std::size_t i = 0; i + 1 < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double d = work(active[i], active[j]);
        if (d < best) {
          best = d;
          best_i = i;
          best_j = j;
        }
      }
    }
    const int first = active[best_i];
    const int second = active[best_j];
    const int merged = leaves + step;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == best_i || k == best_j) continue;
      const int other = active[k];
      const double a = work(first, other);
      const double b = work(second, other);
      const double d = linkage == Linkage::kSingle ? std::min(a, b)
                                                   : std::max(a, b);
      work(merged, other) = work(other, merged) = d;
    }
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_j));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_i));
    active.push_back(merged);  // ids only grow, so the list stays sorted
    tree.merges.push_back(Merge{first, second, best});
  }
  return tree;
}

namespace {

void check_labels(const Dendrogram& tree,
                  const std::vector<std::string>& labels) {
  if (static_cast<int>(labels.size()) != tree.leaf_count) {
    throw std::invalid_argument("one label per leaf required");
  }
  for (const std::string& label : labels) {
    if (label.empty() ||
        label.find_first_of("(),:; \t\n") != std::string::npos) {
      throw std::invalid_argument("label unusable in Newick output: '" +
                                  label + "'");
    }
  }
}

double cluster_height(const Dendrogram& tree, int id) {
  if (id < tree.leaf_count) return 0.0;
  return tree.merges[static_cast<std::size_t>(id - tree.leaf_count)].height;
}

void append_newick(const Dendrogram& tree,
                   const std::vector<std::string>& labels, int id,
                   std::string& out) {
  if (id < tree.leaf_count) {
    out += labels[static_cast<std::size_t>(id)];
    return;
  }
  const Merge& merge =
      tree.merges[static_cast<std::size_t>(id - tree.leaf_count)];
  const auto branch = [&](int child) {
    append_newick(tree, labels, child, out);
    out += ':';
    out += detail::format_double(
        std::max(0.0, merge.height - cluster_height(tree, child)));
  };
  out += '(';
  branch(merge.first);
  out += ',';
  branch(merge.second);
  out += ')';
}

}  // namespace

std::string to_newick(const Dendrogram& tree,
                      const std::vector<std::string>& labels) {
  check_labels(tree, labels);
  if (tree.merges.size() + 1 != static_cast<std::size_t>(tree.leaf_count)) {
    throw std::invalid_argument("dendrogram must hold n-1 merges");
  }
  std::string out;
  append_newick(tree, labels, 2 * tree.leaf_count - 2, out);
  out += ';';
  return out;
}

void write_merges_csv(std::ostream& out, const Dendrogram& tree,
                      const std::vector<std::string>& labels) {
  check_labels(tree, labels);
  const auto name = [&](int id) {
    if (id < tree.leaf_count) return labels[static_cast<std::size_t>(id)];
    return "node" + std::to_string(id);
  };
  out << "step,first,second,height,first_label,second_label\n";
  for (std::size_t s = 0; s < tree.merges.size(); ++s) {
    const Merge& merge = tree.merges[s];
    out << s << ',' << merge.first << ',' << merge.second << ','
        << detail::format_double(merge.height) << ',' << name(merge.first)
        << ',' << name(merge.second) << '\n';
  }
}

}  // namespace mortgp
