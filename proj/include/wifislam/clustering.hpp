#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "wifislam/signature.hpp"
#include "wifislam/types.hpp"

namespace wifislam {

/// A Wi-Fi cluster stands for one spatial region. Its representative is the
/// signature that opened it and is never updated afterwards.
struct Cluster {
  ClusterId id = 0;
  Signature representative;
  std::vector<KeyframeId> members;  // insertion order
};

struct SimilarCluster {
  ClusterId id = 0;
  double score = 0.0;

  bool operator==(const SimilarCluster&) const = default;
};

/// Sorted by score descending, ties by ascending id.
using SimilarClusters = std::vector<SimilarCluster>;

struct AssignmentOutcome {
  ClusterId cluster = 0;
  bool created = false;
};

class ClusterStore {
 public:
  const std::vector<Cluster>& clusters() const noexcept { return clusters_; }
  std::size_t size() const noexcept { return clusters_.size(); }
  bool empty() const noexcept { return clusters_.empty(); }
  const Cluster& at(ClusterId id) const;

  std::optional<ClusterId> cluster_of(KeyframeId keyframe) const;
  bool contains(KeyframeId keyframe) const { return index_.contains(keyframe); }

  /// Opens a cluster with `representative` and `first_member`. Ids are dense
  /// and follow creation order.
  ClusterId create(KeyframeId first_member, Signature representative);
  void add_member(ClusterId id, KeyframeId keyframe);

 private:
  std::vector<Cluster> clusters_;
  std::unordered_map<KeyframeId, ClusterId> index_;
};

/// Clusters whose representative scores >= threshold against `sig`.
SimilarClusters similar_clusters(const ClusterStore& store, const Signature& sig,
                                 double threshold);

/// Cluster management: join the best-scoring similar cluster that already
/// holds one of `neighbors` (keyframes linked to this one by a visual edge),
/// otherwise open a new cluster represented by `sig`.
AssignmentOutcome assign(ClusterStore& store, KeyframeId keyframe,
                         const Signature& sig,
                         std::span<const KeyframeId> neighbors,
                         const SimilarClusters& similar);

/// Members of the listed clusters, in cluster-score order then insertion order.
std::vector<KeyframeId> members_of(const ClusterStore& store,
                                   const SimilarClusters& similar);

// Debug dumps: `cluster_id,keyframe_id` and one JSON object per representative.
void write_cluster_csv(std::ostream& out, const ClusterStore& store);
void write_representatives_jsonl(std::ostream& out, const ClusterStore& store);

}  // namespace wifislam
