#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace deltaenum {

/** Data value; the domain is the positive integers. */
using Datum = std::uint64_t;

/**
 * Set of fixed-width tuples with stable integer ids.
 *
 * Tuples live in a flat arena; an open-addressing index maps tuple contents
 * to ids. Erased ids are recycled. `live()` lists the current ids densely so
 * iteration cost is proportional to the number of stored tuples.
 */
class TupleTable {
 public:
  static constexpr std::uint32_t npos = 0xFFFFFFFFu;

  explicit TupleTable(std::size_t width = 0);

  std::size_t width() const { return width_; }
  std::size_t size() const { return live_.size(); }
  bool empty() const { return live_.empty(); }
  /** One past the largest id ever handed out; size parallel arrays with this. */
  std::size_t id_bound() const { return live_pos_.size(); }

  std::uint32_t find(const Datum* key) const;
  std::uint32_t find(std::span<const Datum> key) const { return find(key.data()); }
  /** Returns (id, inserted). */
  std::pair<std::uint32_t, bool> insert(const Datum* key);
  std::pair<std::uint32_t, bool> insert(std::span<const Datum> key) { return insert(key.data()); }
  void erase(std::uint32_t id);
  void clear();
  void reserve(std::size_t n);

  std::span<const Datum> tuple(std::uint32_t id) const {
    return {arena_.data() + static_cast<std::size_t>(id) * width_, width_};
  }
  const std::vector<std::uint32_t>& live() const { return live_; }
  bool contains_id(std::uint32_t id) const {
    return id < live_pos_.size() && live_pos_[id] != npos;
  }

 private:
  std::uint64_t hash(const Datum* key) const;
  bool equal(std::uint32_t id, const Datum* key) const;
  void grow();
  void rehash(std::size_t cap);
  std::size_t probe_find(const Datum* key, std::uint64_t h) const;

  std::size_t width_;
  std::vector<Datum> arena_;
  std::vector<std::uint64_t> slots_;     // (low hash half << 32) | id, kEmpty in the low half when free
  std::vector<std::uint32_t> slot_of_;   // id -> slot
  std::vector<std::uint32_t> live_;      // dense list of live ids
  std::vector<std::uint32_t> live_pos_;  // id -> index in live_, npos when free
  std::vector<std::uint32_t> free_ids_;
  std::size_t used_slots_ = 0;
};

}  // namespace deltaenum
