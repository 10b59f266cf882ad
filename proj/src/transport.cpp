#include "ashdp/transport.hpp"

#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ashdp::transport {

const char* party_kind_name(PartyKind kind) {
  switch (kind) {
    case PartyKind::kUser: return "user";
    case PartyKind::kShuffler: return "shuffler";
    case PartyKind::kCollector: return "collector";
  }
  return "?";
}

Transcript::Transcript(int64_t n_users, LogMode mode) : mode_(mode) {
  if (n_users < 0) throw std::invalid_argument("transcript: n_users must be >= 0");
  user_sent_.assign(static_cast<size_t>(n_users), 0);
  user_received_.assign(static_cast<size_t>(n_users), 0);
}

void Transcript::send(PartyId from, PartyId to, double bits_each, int64_t count) {
  if (closed_) throw std::logic_error("transcript: message after protocol close");
  if (count < 0 || bits_each < 0) throw std::invalid_argument("transcript: bad message");
  if (count == 0) return;
  auto& hop = hops_[{from.kind, to.kind}];
  hop.count += count;
  hop.bits += bits_each * static_cast<double>(count);

  if (from.kind == PartyKind::kUser) {
    if (from.index < 1 || from.index > static_cast<int64_t>(user_sent_.size()))
      throw std::invalid_argument("transcript: bad user index");
    user_sent_[static_cast<size_t>(from.index - 1)] += static_cast<uint32_t>(count);
    users_sent_total_ += count;
  }
  if (to.kind == PartyKind::kUser) {
    if (to.index < 1 || to.index > static_cast<int64_t>(user_received_.size()))
      throw std::invalid_argument("transcript: bad user index");
    user_received_[static_cast<size_t>(to.index - 1)] += static_cast<uint32_t>(count);
    users_received_total_ += count;
  }

  // A server's round = one receive phase followed by a send.
  if (to.kind == PartyKind::kShuffler) shuffler_received_since_send_ = true;
  if (to.kind == PartyKind::kCollector) collector_received_since_send_ = true;
  if (from.kind == PartyKind::kShuffler && shuffler_received_since_send_) {
    ++shuffler_rounds_;
    shuffler_received_since_send_ = false;
  }
  if (from.kind == PartyKind::kCollector && collector_received_since_send_) {
    ++collector_rounds_;
    collector_received_since_send_ = false;
  }
}

void Transcript::close() { closed_ = true; }

Measure Transcript::measure() const {
  Measure m;
  for (const auto& [key, stats] : hops_) {
    auto [from, to] = key;
    if (from == PartyKind::kUser && to == PartyKind::kShuffler) m.c_us += stats.bits;
    if ((from == PartyKind::kShuffler && to == PartyKind::kCollector) ||
        (from == PartyKind::kCollector && to == PartyKind::kShuffler))
      m.c_sd += stats.bits;
  }
  m.c_tot = m.c_us + m.c_sd;
  m.shuffler_rounds = shuffler_rounds_;
  m.collector_rounds = collector_rounds_;
  return m;
}

bool Transcript::one_round() const {
  if (users_received_total_ != 0) return false;
  if (users_sent_total_ != static_cast<int64_t>(user_sent_.size())) return false;
  for (uint32_t s : user_sent_)
    if (s != 1) return false;
  return true;
}

int64_t Transcript::user_sent(int64_t user_index) const {
  return user_sent_.at(static_cast<size_t>(user_index - 1));
}

int64_t Transcript::user_received(int64_t user_index) const {
  return user_received_.at(static_cast<size_t>(user_index - 1));
}

std::string Transcript::to_json() const {
  nlohmann::json j;
  j["hops"] = nlohmann::json::array();
  for (const auto& [key, stats] : hops_) {
    j["hops"].push_back({{"from", party_kind_name(key.first)},
                         {"to", party_kind_name(key.second)},
                         {"bits", stats.bits},
                         {"count", stats.count}});
  }
  Measure m = measure();
  j["rounds"] = {{"shuffler", m.shuffler_rounds}, {"collector", m.collector_rounds}};
  j["c_us"] = m.c_us;
  j["c_sd"] = m.c_sd;
  j["c_tot"] = m.c_tot;
  j["one_round"] = one_round();
  return j.dump();
}

bool assert_one_round(const Transcript& t) { return t.one_round(); }

}  // namespace ashdp::transport
