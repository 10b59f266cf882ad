#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ashdp::transport {

enum class PartyKind { kUser, kShuffler, kCollector };

struct PartyId {
  PartyKind kind = PartyKind::kShuffler;
  int64_t index = 0;  // user index, 1-based; 0 for servers

  static PartyId user(int64_t i) { return {PartyKind::kUser, i}; }
  static PartyId shuffler() { return {PartyKind::kShuffler, 0}; }
  static PartyId collector() { return {PartyKind::kCollector, 0}; }
};

const char* party_kind_name(PartyKind kind);

// Per-hop accounting. A "hop" aggregates all messages of one (from, to)
// party-kind pair; bits come from ciphertext_size_bits on the actual
// messages, so the totals are measured, not estimated.
struct HopStats {
  int64_t count = 0;
  double bits = 0.0;
};

// C_US covers users -> shuffler; C_SD covers both directions between the
// shuffler and the collector (the selected-set message included).
struct Measure {
  double c_us = 0.0;
  double c_sd = 0.0;
  double c_tot = 0.0;
  int64_t shuffler_rounds = 0;
  int64_t collector_rounds = 0;
};

enum class LogMode { kFull, kCounters };

class Transcript {
 public:
  explicit Transcript(int64_t n_users, LogMode mode = LogMode::kFull);

  // Records `count` identical messages of `bits_each` bits on one hop.
  void send(PartyId from, PartyId to, double bits_each, int64_t count = 1);
  void close();

  Measure measure() const;
  // True iff every user sent exactly one message and received none.
  bool one_round() const;
  int64_t user_sent(int64_t user_index) const;
  int64_t user_received(int64_t user_index) const;
  LogMode mode() const { return mode_; }

  const std::map<std::pair<PartyKind, PartyKind>, HopStats>& hops() const { return hops_; }
  std::string to_json() const;

 private:
  void bump_rounds(PartyKind kind);

  LogMode mode_;
  bool closed_ = false;
  std::map<std::pair<PartyKind, PartyKind>, HopStats> hops_;
  std::vector<uint32_t> user_sent_;
  std::vector<uint32_t> user_received_;
  int64_t users_sent_total_ = 0;
  int64_t users_received_total_ = 0;
  // receive -> send transitions per server party
  int64_t shuffler_rounds_ = 0;
  int64_t collector_rounds_ = 0;
  bool shuffler_received_since_send_ = false;
  bool collector_received_since_send_ = false;
};

bool assert_one_round(const Transcript& t);

}  // namespace ashdp::transport
