#include "wifislam/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wifislam/error.hpp"

namespace wifislam {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a combined key.
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int shared_word_count(const Appearance& a, const Appearance& b) {
  int count = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.words.size() && j < b.words.size()) {
    if (a.words[i] < b.words[j]) {
      ++i;
    } else if (b.words[j] < a.words[i]) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

namespace {

struct SharedWord {
  std::int32_t source_a;
  std::int32_t source_b;
};

std::int32_t source_at(const Appearance& app, std::size_t i) {
  return i < app.sources.size() ? app.sources[i] : -1;
}

std::vector<SharedWord> shared_words(const Appearance& a, const Appearance& b) {
  std::vector<SharedWord> out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.words.size() && j < b.words.size()) {
    if (a.words[i] < b.words[j]) {
      ++i;
    } else if (b.words[j] < a.words[i]) {
      ++j;
    } else {
      out.push_back({source_at(a, i), source_at(b, j)});
      ++i;
      ++j;
    }
  }
  return out;
}

}  // namespace

Eigen::Matrix3d match_information(const MatchParams& params) {
  const double sxy = std::max(params.sigma_xy, 1e-4);
  const double sth = std::max(params.sigma_theta, 1e-5);
  return Eigen::Vector3d(1.0 / (sxy * sxy), 1.0 / (sxy * sxy),
                         1.0 / (sth * sth))
      .asDiagonal();
}

namespace {

// Cheap to seed, unlike mt19937_64; one is made per matched pair.
struct SplitMix64 {
  using result_type = std::uint64_t;
  std::uint64_t state;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

}  // namespace

MatchResult match_frames(const FrameRef& a, const FrameRef& b,
                         const SceneFrames& scene, const MatchParams& params) {
  if (a.appearance == nullptr || b.appearance == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "match_frames needs appearances");
  }
  MatchResult result;
  const auto shared = shared_words(*a.appearance, *b.appearance);
  if (shared.empty()) return result;

  // Dropout depends on the unordered pair so that match(a,b) and match(b,a)
  // keep the same words.
  const KeyframeId lo = std::min(a.id, b.id);
  const KeyframeId hi = std::max(a.id, b.id);
  SplitMix64 dropout_rng{
      mix_seed(mix_seed(params.seed, static_cast<std::uint64_t>(lo)),
               static_cast<std::uint64_t>(hi))};
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::map<std::pair<std::int32_t, std::int32_t>, int> votes;
  for (const auto& w : shared) {
    if (unit(dropout_rng) >= params.keep_probability) continue;
    ++result.num_matches;
    if (w.source_a >= 0 && w.source_b >= 0) ++votes[{w.source_a, w.source_b}];
  }
  if (result.num_matches < params.min_matches || votes.empty()) return result;

  // The dominant region pairing decides which geometry the matched features
  // are consistent with.
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  const auto [ra, rb] = best->first;
  Pose2 apparent_b = b.gt_pose;
  if (ra != rb) {
    const auto n = static_cast<std::int32_t>(scene.region_frames.size());
    if (ra >= n || rb >= n) {
      throw Error(ErrorCode::kInvalidArgument, "word source outside the scene");
    }
    const Pose2 region_map =
        compose(scene.region_frames[static_cast<std::size_t>(ra)],
                inverse(scene.region_frames[static_cast<std::size_t>(rb)]));
    apparent_b = compose(region_map, b.gt_pose);
  }
  const Pose2 estimate = between(a.gt_pose, apparent_b);
  if (std::hypot(estimate.x, estimate.y) > params.inlier_distance) {
    return result;  // transformation estimation fails
  }

  SplitMix64 noise_rng{
      mix_seed(mix_seed(params.seed ^ 0x5DEECE66DULL,
                        static_cast<std::uint64_t>(a.id)),
               static_cast<std::uint64_t>(b.id))};
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double nx = params.sigma_xy * gauss(noise_rng);
  const double ny = params.sigma_xy * gauss(noise_rng);
  const double nt = params.sigma_theta * gauss(noise_rng);
  result.relative = make_pose(estimate.x + nx, estimate.y + ny,
                              estimate.theta + nt);
  result.accepted = true;
  return result;
}

void InvertedIndex::insert(KeyframeId keyframe, const Appearance& appearance) {
  if (appearance.words.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "keyframe " + std::to_string(keyframe) + " has no visual words");
  }
  if (!keyframes_.insert(keyframe).second) return;
  for (std::size_t i = 0; i < appearance.words.size(); ++i) {
    if (i > 0 && appearance.words[i] == appearance.words[i - 1]) continue;
    auto& list = postings_[appearance.words[i]];
    // Ids normally arrive in increasing order; keep the list sorted anyway.
    list.insert(std::upper_bound(list.begin(), list.end(), keyframe), keyframe);
  }
}

std::vector<KeyframeId> InvertedIndex::query(const Appearance& appearance) const {
  std::unordered_map<KeyframeId, int> counts;
  for (std::size_t i = 0; i < appearance.words.size(); ++i) {
    if (i > 0 && appearance.words[i] == appearance.words[i - 1]) continue;
    const auto it = postings_.find(appearance.words[i]);
    if (it == postings_.end()) continue;
    for (const KeyframeId k : it->second) ++counts[k];
  }
  std::vector<std::pair<KeyframeId, int>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  std::vector<KeyframeId> out;
  out.reserve(ranked.size());
  for (const auto& [k, c] : ranked) out.push_back(k);
  return out;
}

const std::set<KeyframeId>& Covisibility::neighbors(KeyframeId keyframe) const {
  static const std::set<KeyframeId> kEmpty;
  const auto it = links_.find(keyframe);
  return it == links_.end() ? kEmpty : it->second;
}

void Covisibility::link(KeyframeId a, KeyframeId b) {
  if (a == b) return;
  links_[a].insert(b);
  links_[b].insert(a);
}

void covis_update(Covisibility& covis, KeyframeId keyframe,
                  std::span<const KeyframeId> accepted_matches) {
  for (const KeyframeId m : accepted_matches) covis.link(keyframe, m);
}

}  // namespace wifislam
