#include "wifislam/signature.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "csv.hpp"
#include "wifislam/error.hpp"

namespace wifislam {

namespace {

constexpr std::uint64_t kMacMask = (std::uint64_t{1} << 48) - 1;
constexpr double kStrengthFloorDbm = -100.0;

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

ApId ApId::from_masked(std::uint64_t bits) {
  if ((bits & 0xF) != 0 || (bits & ~kMacMask) != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "AP id must have a zero low nibble: " + format_mac(bits));
  }
  return ApId(bits);
}

Bssid parse_bssid(std::string_view text) {
  const std::string_view token = csv::trim(text);
  const auto octets = csv::split(token, ':');
  auto fail = [&]() {
    return Error(ErrorCode::kParse,
                 "malformed MAC address '" + std::string(token) + "'");
  };
  if (octets.size() != 6) throw fail();
  std::uint64_t bits = 0;
  for (const auto octet : octets) {
    if (octet.size() != 2) throw fail();
    const int hi = hex_value(octet[0]);
    const int lo = hex_value(octet[1]);
    if (hi < 0 || lo < 0) throw fail();
    bits = (bits << 8) | static_cast<std::uint64_t>(hi * 16 + lo);
  }
  return Bssid{bits};
}

std::string format_mac(std::uint64_t bits) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(17);
  for (int i = 5; i >= 0; --i) {
    const auto octet = static_cast<unsigned>((bits >> (8 * i)) & 0xFF);
    out.push_back(kHex[octet >> 4]);
    out.push_back(kHex[octet & 0xF]);
    if (i > 0) out.push_back(':');
  }
  return out;
}

ApId mask_bssid(Bssid bssid) {
  return ApId((bssid.bits & kMacMask) & ~std::uint64_t{0xF});
}

double strength_of(double rssi_dbm) {
  return std::max(0.0, rssi_dbm - kStrengthFloorDbm);
}

Signature::Signature(std::vector<Entry> entries, double collected_at,
                     int pause_index)
    : entries_(std::move(entries)),
      collected_at_(collected_at),
      pause_index_(pause_index) {
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  double sq = 0.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i > 0 && entries_[i].first == entries_[i - 1].first) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate AP in signature: " + to_string(entries_[i].first));
    }
    if (!(entries_[i].second >= 0.0) || !std::isfinite(entries_[i].second)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "signature strengths must be finite and non-negative");
    }
    sq += entries_[i].second * entries_[i].second;
  }
  norm_ = std::sqrt(sq);
}

double Signature::strength(ApId ap) const {
  const auto it = std::lower_bound(
      entries_.begin(), entries_.end(), ap,
      [](const Entry& e, ApId key) { return e.first < key; });
  return (it != entries_.end() && it->first == ap) ? it->second : 0.0;
}

Signature Signature::scaled(double k) const {
  std::vector<Entry> out(entries_.begin(), entries_.end());
  for (auto& e : out) e.second *= k;
  return Signature(std::move(out), collected_at_, pause_index_);
}

Signature signature_from_window(std::span<const ScanReading> readings,
                                int pause_index) {
  if (readings.empty()) {
    throw Error(ErrorCode::kEmptyScanWindow,
                "dwell " + std::to_string(pause_index) + " has no readings");
  }
  std::map<ApId, std::pair<double, int>> sums;
  double t_sum = 0.0;
  for (const auto& r : readings) {
    auto& [sum, count] = sums[mask_bssid(r.bssid)];
    sum += r.rssi_dbm;
    ++count;
    t_sum += r.timestamp_s;
  }
  std::vector<Signature::Entry> entries;
  entries.reserve(sums.size());
  for (const auto& [ap, acc] : sums) {
    entries.emplace_back(ap, strength_of(acc.first / acc.second));
  }
  return Signature(std::move(entries),
                   t_sum / static_cast<double>(readings.size()), pause_index);
}

double cosine_similarity(const Signature& a, const Signature& b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::kEmptySignature,
                "cosine similarity needs two non-empty signatures");
  }
  if (a.norm() == 0.0 || b.norm() == 0.0) return 0.0;
  // Merge over the sorted keys; APs missing on one side contribute zero.
  const auto ea = a.entries();
  const auto eb = b.entries();
  double dot = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].first < eb[j].first) {
      ++i;
    } else if (eb[j].first < ea[i].first) {
      ++j;
    } else {
      dot += ea[i].second * eb[j].second;
      ++i;
      ++j;
    }
  }
  const double s = dot / (a.norm() * b.norm());
  return std::clamp(s, 0.0, 1.0);
}

std::vector<std::size_t> associate_frames(
    std::span<const double> frame_times,
    std::span<const Signature> signatures) {
  if (signatures.empty()) {
    throw Error(ErrorCode::kNoSignatures, "no Wi-Fi signatures to associate");
  }
  std::vector<std::size_t> out;
  out.reserve(frame_times.size());
  std::size_t cursor = 0;
  for (const double t : frame_times) {
    while (cursor + 1 < signatures.size() &&
           signatures[cursor + 1].collected_at() <= t) {
      ++cursor;
    }
    out.push_back(cursor);
  }
  return out;
}

ScanLog read_scan_log(std::istream& in) {
  ScanLog log;
  std::string line;
  int line_no = 0;
  bool has_dwell = false;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto cols = csv::split(trimmed);
    const std::string where = "line " + std::to_string(line_no);
    if (!seen_header) {
      seen_header = true;
      if (cols.size() < 3 || csv::trim(cols[0]) != "timestamp_s" ||
          csv::trim(cols[1]) != "bssid" || csv::trim(cols[2]) != "rssi_dbm") {
        throw Error(ErrorCode::kParse,
                    where + ": expected header timestamp_s,bssid,rssi_dbm");
      }
      has_dwell = cols.size() >= 4 && csv::trim(cols[3]) == "dwell_index";
      continue;
    }
    const std::size_t expected = has_dwell ? 4 : 3;
    if (cols.size() != expected) {
      throw Error(ErrorCode::kParse, where + ": expected " +
                                         std::to_string(expected) + " columns");
    }
    ScanReading r;
    r.timestamp_s = csv::parse_double(cols[0], where);
    try {
      r.bssid = parse_bssid(cols[1]);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + ": " + e.what());
    }
    r.rssi_dbm = csv::parse_double(cols[2], where);
    if (r.rssi_dbm > 0.0) {
      throw Error(ErrorCode::kParse, where + ": rssi must be <= 0 dBm");
    }
    log.readings.push_back(r);
    if (has_dwell) {
      log.dwell_index.push_back(
          static_cast<int>(csv::parse_int(cols[3], where)));
    }
  }
  return log;
}

void write_scan_log(std::ostream& out, std::span<const ScanReading> readings,
                    std::span<const int> dwell_index) {
  const bool with_dwell = !dwell_index.empty();
  out << "timestamp_s,bssid,rssi_dbm" << (with_dwell ? ",dwell_index" : "")
      << '\n';
  for (std::size_t i = 0; i < readings.size(); ++i) {
    out << csv::format_double(readings[i].timestamp_s) << ','
        << to_string(readings[i].bssid) << ','
        << csv::format_double(readings[i].rssi_dbm);
    if (with_dwell) out << ',' << dwell_index[i];
    out << '\n';
  }
}

std::vector<int> split_dwells(std::span<const ScanReading> readings,
                              double max_gap_s) {
  std::vector<int> out;
  out.reserve(readings.size());
  int dwell = 0;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    if (i > 0 &&
        readings[i].timestamp_s - readings[i - 1].timestamp_s > max_gap_s) {
      ++dwell;
    }
    out.push_back(dwell);
  }
  return out;
}

std::vector<Signature> signatures_from_log(
    std::span<const ScanReading> readings, std::span<const int> dwell_index) {
  if (readings.size() != dwell_index.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "dwell index column does not match the readings");
  }
  std::map<int, std::vector<ScanReading>> by_dwell;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    by_dwell[dwell_index[i]].push_back(readings[i]);
  }
  std::vector<Signature> out;
  out.reserve(by_dwell.size());
  for (const auto& [dwell, rs] : by_dwell) {
    out.push_back(signature_from_window(rs, dwell));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Signature& a, const Signature& b) {
                     return a.collected_at() < b.collected_at();
                   });
  return out;
}

}  // namespace wifislam
