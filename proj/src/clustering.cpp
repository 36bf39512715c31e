#include "wifislam/clustering.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "csv.hpp"
#include "wifislam/error.hpp"

namespace wifislam {

const Cluster& ClusterStore::at(ClusterId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= clusters_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown cluster id " + std::to_string(id));
  }
  return clusters_[static_cast<std::size_t>(id)];
}

std::optional<ClusterId> ClusterStore::cluster_of(KeyframeId keyframe) const {
  const auto it = index_.find(keyframe);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ClusterId ClusterStore::create(KeyframeId first_member,
                               Signature representative) {
  if (index_.contains(first_member)) {
    throw Error(ErrorCode::kDuplicateAssignment,
                "keyframe " + std::to_string(first_member) +
                    " already belongs to a cluster");
  }
  const auto id = static_cast<ClusterId>(clusters_.size());
  clusters_.push_back(Cluster{id, std::move(representative), {first_member}});
  index_.emplace(first_member, id);
  return id;
}

void ClusterStore::add_member(ClusterId id, KeyframeId keyframe) {
  if (index_.contains(keyframe)) {
    throw Error(ErrorCode::kDuplicateAssignment,
                "keyframe " + std::to_string(keyframe) +
                    " already belongs to a cluster");
  }
  at(id);
  clusters_[static_cast<std::size_t>(id)].members.push_back(keyframe);
  index_.emplace(keyframe, id);
}

SimilarClusters similar_clusters(const ClusterStore& store, const Signature& sig,
                                 double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "similarity threshold must lie in (0, 1]");
  }
  SimilarClusters out;
  for (const auto& c : store.clusters()) {
    const double s = cosine_similarity(sig, c.representative);
    if (s >= threshold) out.push_back({c.id, s});
  }
  std::sort(out.begin(), out.end(),
            [](const SimilarCluster& a, const SimilarCluster& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.id < b.id;
            });
  return out;
}

AssignmentOutcome assign(ClusterStore& store, KeyframeId keyframe,
                         const Signature& sig,
                         std::span<const KeyframeId> neighbors,
                         const SimilarClusters& similar) {
  if (store.contains(keyframe)) {
    throw Error(ErrorCode::kDuplicateAssignment,
                "keyframe " + std::to_string(keyframe) +
                    " already belongs to a cluster");
  }
  std::unordered_set<ClusterId> linked;
  for (const KeyframeId n : neighbors) {
    if (const auto c = store.cluster_of(n)) linked.insert(*c);
  }
  // `similar` is already ordered best-first with the id tie-break.
  for (const auto& s : similar) {
    if (linked.contains(s.id)) {
      store.add_member(s.id, keyframe);
      return {s.id, false};
    }
  }
  return {store.create(keyframe, sig), true};
}

std::vector<KeyframeId> members_of(const ClusterStore& store,
                                   const SimilarClusters& similar) {
  std::vector<KeyframeId> out;
  std::unordered_set<KeyframeId> seen;
  for (const auto& s : similar) {
    for (const KeyframeId k : store.at(s.id).members) {
      if (seen.insert(k).second) out.push_back(k);
    }
  }
  return out;
}

void write_cluster_csv(std::ostream& out, const ClusterStore& store) {
  out << "cluster_id,keyframe_id\n";
  for (const auto& c : store.clusters()) {
    for (const KeyframeId k : c.members) out << c.id << ',' << k << '\n';
  }
}

void write_representatives_jsonl(std::ostream& out, const ClusterStore& store) {
  for (const auto& c : store.clusters()) {
    nlohmann::ordered_json j;
    j["cluster_id"] = c.id;
    j["collected_at"] = c.representative.collected_at();
    j["pause_index"] = c.representative.pause_index();
    nlohmann::ordered_json entries = nlohmann::ordered_json::object();
    for (const auto& [ap, s] : c.representative.entries()) {
      entries[to_string(ap)] = s;
    }
    j["entries"] = std::move(entries);
    j["size"] = c.members.size();
    out << j.dump() << '\n';
  }
}

}  // namespace wifislam
