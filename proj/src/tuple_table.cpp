#include "deltaenum/tuple_table.hpp"

#include <algorithm>
#include <cstring>

namespace deltaenum {

namespace {

constexpr std::uint32_t kEmpty = 0xFFFFFFFFu;

// a slot keeps the low hash half next to the id: cheap mismatch filter, and the home slot for deletion
std::uint32_t id_of(std::uint64_t slot) { return static_cast<std::uint32_t>(slot); }
std::uint64_t make_slot(std::uint64_t h, std::uint32_t id) { return (h << 32) | id; }
bool tag_matches(std::uint64_t slot, std::uint64_t h) { return (slot >> 32) == (h & 0xFFFFFFFFULL); }
std::size_t home_of(std::uint64_t slot, std::size_t mask) { return static_cast<std::size_t>(slot >> 32) & mask; }

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

TupleTable::TupleTable(std::size_t width) : width_(width), slots_(16, kEmpty) {}

std::uint64_t TupleTable::hash(const Datum* key) const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL + width_;
  for (std::size_t i = 0; i < width_; ++i) h = mix(h ^ (key[i] + 0x632be59bd9b4e019ULL * (i + 1)));
  return mix(h);
}

bool TupleTable::equal(std::uint32_t id, const Datum* key) const {
  const Datum* t = arena_.data() + static_cast<std::size_t>(id) * width_;
  for (std::size_t i = 0; i < width_; ++i)
    if (t[i] != key[i]) return false;
  return true;
}

std::size_t TupleTable::probe_find(const Datum* key, std::uint64_t h) const {
  std::size_t mask = slots_.size() - 1;
  for (std::size_t i = h & mask;; i = (i + 1) & mask) {
    std::uint64_t s = slots_[i];
    std::uint32_t id = id_of(s);
    if (id == kEmpty) return npos;
    if (tag_matches(s, h) && equal(id, key)) return i;
  }
}

std::uint32_t TupleTable::find(const Datum* key) const {
  std::size_t slot = probe_find(key, hash(key));
  return slot == npos ? npos : id_of(slots_[slot]);
}

void TupleTable::grow() {
  rehash(slots_.size() * 2);
}

void TupleTable::rehash(std::size_t cap) {
  slots_.assign(cap, kEmpty);
  std::size_t mask = cap - 1;
  for (std::uint32_t id : live_) {
    std::uint64_t h = hash(arena_.data() + static_cast<std::size_t>(id) * width_);
    std::size_t i = h & mask;
    while (id_of(slots_[i]) != kEmpty) i = (i + 1) & mask;
    slots_[i] = make_slot(h, id);
    slot_of_[id] = static_cast<std::uint32_t>(i);
  }
  used_slots_ = live_.size();
}

std::pair<std::uint32_t, bool> TupleTable::insert(const Datum* key) {
  std::uint64_t h = hash(key);
  std::size_t mask = slots_.size() - 1;
  std::size_t i = h & mask;
  for (;; i = (i + 1) & mask) {
    std::uint32_t s = id_of(slots_[i]);
    if (s == kEmpty) break;
    if (tag_matches(slots_[i], h) && equal(s, key)) return {s, false};
  }
  std::uint32_t id;
  if (!free_ids_.empty()) {
    id = free_ids_.back();
    free_ids_.pop_back();
    std::copy(key, key + width_, arena_.begin() + static_cast<std::ptrdiff_t>(id * width_));
  } else {
    id = static_cast<std::uint32_t>(live_pos_.size());
    arena_.insert(arena_.end(), key, key + width_);
    live_pos_.push_back(npos);
    slot_of_.push_back(0);
  }
  ++used_slots_;
  slots_[i] = make_slot(h, id);
  slot_of_[id] = static_cast<std::uint32_t>(i);
  live_pos_[id] = static_cast<std::uint32_t>(live_.size());
  live_.push_back(id);
  if (used_slots_ * 10 >= slots_.size() * 7) grow();
  return {id, true};
}

void TupleTable::erase(std::uint32_t id) {
  // backward-shift deletion keeps probe chains tombstone-free
  std::size_t mask = slots_.size() - 1;
  std::size_t i = slot_of_[id];
  for (std::size_t j = (i + 1) & mask;; j = (j + 1) & mask) {
    std::uint64_t s = slots_[j];
    if (id_of(s) == kEmpty) break;
    std::size_t home = home_of(s, mask);
    bool stays = i <= j ? (i < home && home <= j) : (i < home || home <= j);
    if (stays) continue;
    slots_[i] = s;
    slot_of_[id_of(s)] = static_cast<std::uint32_t>(i);
    i = j;
  }
  slots_[i] = kEmpty;
  --used_slots_;
  std::uint32_t pos = live_pos_[id];
  std::uint32_t last = live_.back();
  live_[pos] = last;
  live_pos_[last] = pos;
  live_.pop_back();
  live_pos_[id] = npos;
  free_ids_.push_back(id);
}

void TupleTable::clear() {
  arena_.clear();
  slots_.assign(16, kEmpty);
  slot_of_.clear();
  live_.clear();
  live_pos_.clear();
  free_ids_.clear();
  used_slots_ = 0;
}

void TupleTable::reserve(std::size_t n) {
  arena_.reserve(n * width_);
  std::size_t cap = slots_.size();
  while (cap * 7 < n * 10 + 10) cap *= 2;
  if (cap != slots_.size()) rehash(cap);
}

}  // namespace deltaenum
