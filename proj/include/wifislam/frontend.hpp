#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "wifislam/posegraph.hpp"
#include "wifislam/types.hpp"

namespace wifislam {

/// Bag-of-words stand-in for an image. `words` is a sorted multiset.
/// `sources` and `place_template` are simulator metadata: sources[i] is the
/// scene region that produced words[i] (-1 for generic clutter). Policies
/// never read them; only the match oracle and evaluation do.
struct Appearance {
  std::vector<WordId> words;
  std::vector<std::int32_t> sources;
  std::int32_t place_template = -1;
};

/// World pose of each scene region's template frame. Two regions that share a
/// template look alike at equal template-local coordinates; the transform
/// between their frames is what a wrong match "sees".
struct SceneFrames {
  std::vector<Pose2> region_frames;
};

struct MatchParams {
  int min_matches = 20;
  double inlier_distance = 2.0;  // metres, gate on the estimated transform
  double keep_probability = 0.8;  // per shared word, per pair
  double sigma_xy = 0.05;
  double sigma_theta = 0.01;
  std::uint64_t seed = 0;
};

struct MatchResult {
  int num_matches = 0;
  std::optional<Pose2> relative;  // pose of `b` in the frame of `a`
  bool accepted = false;
};

/// One side of a match. gt_pose is the hidden simulator truth.
struct FrameRef {
  KeyframeId id = 0;
  const Appearance* appearance = nullptr;
  Pose2 gt_pose;
};

/// Multiset intersection size of the two word lists.
int shared_word_count(const Appearance& a, const Appearance& b);

/// Synthetic matcher. Shared words are thinned by a per-pair dropout seeded
/// from (ids, seed); the pair is accepted when enough survive and the
/// transform implied by the surviving words is within the inlier distance.
/// Words from two aliased regions imply the transform between those regions,
/// which is how perceptual aliasing yields wrong but accepted transforms.
MatchResult match_frames(const FrameRef& a, const FrameRef& b,
                         const SceneFrames& scene, const MatchParams& params);

/// Information matrix used for accepted visual edges.
Eigen::Matrix3d match_information(const MatchParams& params);

/// word -> keyframes that observed it (ascending ids).
class InvertedIndex {
 public:
  void insert(KeyframeId keyframe, const Appearance& appearance);

  /// Keyframes sharing at least one distinct word with `appearance`, ordered
  /// by shared-word count descending then id ascending.
  std::vector<KeyframeId> query(const Appearance& appearance) const;

  bool contains(KeyframeId keyframe) const { return keyframes_.contains(keyframe); }
  std::size_t size() const noexcept { return keyframes_.size(); }
  const std::unordered_map<WordId, std::vector<KeyframeId>>& postings() const {
    return postings_;
  }

 private:
  std::unordered_map<WordId, std::vector<KeyframeId>> postings_;
  std::set<KeyframeId> keyframes_;
};

inline void index_insert(InvertedIndex& index, KeyframeId keyframe,
                         const Appearance& appearance) {
  index.insert(keyframe, appearance);
}
inline std::vector<KeyframeId> index_query(const InvertedIndex& index,
                                           const Appearance& appearance) {
  return index.query(appearance);
}

/// Symmetric, non-transitive "shares map points" relation.
class Covisibility {
 public:
  const std::set<KeyframeId>& neighbors(KeyframeId keyframe) const;
  void link(KeyframeId a, KeyframeId b);

 private:
  std::map<KeyframeId, std::set<KeyframeId>> links_;
};

void covis_update(Covisibility& covis, KeyframeId keyframe,
                  std::span<const KeyframeId> accepted_matches);

/// Deterministic 64-bit mixing used to derive per-pair / per-step seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace wifislam
