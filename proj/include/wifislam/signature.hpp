#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wifislam {

/// 48-bit BSSID as broadcast by one radio of an access point.
struct Bssid {
  std::uint64_t bits = 0;

  auto operator<=>(const Bssid&) const = default;
};

/// Access-point identity: a BSSID with the low nibble of its last octet
/// cleared, so the 2.4/5 GHz and per-SSID radios of one AP collapse to a
/// single key.
class ApId {
 public:
  ApId() = default;

  /// Throws kInvalidArgument when the low nibble is set.
  static ApId from_masked(std::uint64_t bits);

  std::uint64_t bits() const noexcept { return bits_; }

  auto operator<=>(const ApId&) const = default;

 private:
  explicit ApId(std::uint64_t bits) : bits_(bits) {}
  friend ApId mask_bssid(Bssid bssid);

  std::uint64_t bits_ = 0;
};

/// Parses `AA:BB:CC:DD:EE:FF`. Throws kParse naming the offending token.
Bssid parse_bssid(std::string_view text);
std::string format_mac(std::uint64_t bits);
inline std::string to_string(Bssid b) { return format_mac(b.bits); }
inline std::string to_string(ApId a) { return format_mac(a.bits()); }

ApId mask_bssid(Bssid bssid);

struct ScanReading {
  double timestamp_s = 0.0;
  Bssid bssid;
  double rssi_dbm = 0.0;
};

/// dB above the -100 dBm floor, clamped at zero. Absent APs are the natural
/// zero of this scale.
double strength_of(double rssi_dbm);

/// Per-AP strengths gathered during one dwell. Entries are kept sorted by
/// ApId with unique keys; every strength is non-negative.
class Signature {
 public:
  using Entry = std::pair<ApId, double>;

  Signature() = default;
  Signature(std::vector<Entry> entries, double collected_at, int pause_index);

  std::span<const Entry> entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  double collected_at() const noexcept { return collected_at_; }
  int pause_index() const noexcept { return pause_index_; }
  double norm() const noexcept { return norm_; }

  /// Strength for `ap`, zero when not heard.
  double strength(ApId ap) const;

  /// Same entries with every strength multiplied by `k` (k >= 0).
  Signature scaled(double k) const;

  bool operator==(const Signature& other) const = default;

 private:
  std::vector<Entry> entries_;
  double collected_at_ = 0.0;
  int pause_index_ = 0;
  double norm_ = 0.0;
};

/// Groups readings by masked BSSID, averages dBm per AP, then applies
/// strength_of. Throws kEmptyScanWindow on an empty window.
Signature signature_from_window(std::span<const ScanReading> readings,
                                int pause_index);

/// v.w / (|v||w|) over the union of APs. Throws kEmptySignature.
double cosine_similarity(const Signature& a, const Signature& b);

/// For each frame time, index of the latest signature collected at or before
/// it; frames ahead of the first signature borrow signature 0.
std::vector<std::size_t> associate_frames(std::span<const double> frame_times,
                                          std::span<const Signature> signatures);

// Scan-log CSV: `timestamp_s,bssid,rssi_dbm[,dwell_index]`.
struct ScanLog {
  std::vector<ScanReading> readings;
  // Same length as readings when the optional column is present, else empty.
  std::vector<int> dwell_index;
};

ScanLog read_scan_log(std::istream& in);
void write_scan_log(std::ostream& out, std::span<const ScanReading> readings,
                    std::span<const int> dwell_index);

/// Splits time-sorted readings into dwells wherever consecutive readings are
/// more than `max_gap_s` apart. Used when a log carries no dwell column.
std::vector<int> split_dwells(std::span<const ScanReading> readings,
                              double max_gap_s);

/// One signature per distinct dwell index, in ascending dwell order.
std::vector<Signature> signatures_from_log(std::span<const ScanReading> readings,
                                           std::span<const int> dwell_index);

}  // namespace wifislam
