// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Dual FIFO memory bank: N unprompted frames and M prompted frames.

#ifndef M4D_MEMORY_BANK_HPP
#define M4D_MEMORY_BANK_HPP

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "m4d/core/types.hpp"
#include "m4d/memory/attention.hpp"

namespace m4d::memory {

/// Stored features of one modality. Positions stay in the entry's own
/// capture-time ego frame; compensation happens per query.
struct ModalMemory {
  FeatureMap features;
  Vector summary;  // object summary token, length d
};

struct MemoryEntry {
  int frame = 0;
  bool prompted = false;
  std::optional<ModalMemory> image;
  std::optional<ModalMemory> lidar;

  [[nodiscard]] const std::optional<ModalMemory>& modality(Modality m) const {
    return m == Modality::kImage ? image : lidar;
  }
};

/// Stand-in for mask-decoder object tokens: mean of the mask-interior tokens
/// (zero vector for an empty mask).
inline Vector summarize_object(const Matrix& tokens, std::span<const bool> inside) {
  if (static_cast<std::size_t>(tokens.rows()) != inside.size()) {
    throw InvalidInput("summarize_object: mask length does not match token count");
  }
  Vector sum = Vector::Zero(tokens.cols());
  std::size_t n = 0;
  for (std::size_t i = 0; i < inside.size(); ++i) {
    if (inside[i]) {
      sum += tokens.row(static_cast<Eigen::Index>(i)).transpose();
      ++n;
    }
  }
  return n == 0 ? sum : Vector(sum / static_cast<double>(n));
}

class MemoryBank {
 public:
  static constexpr std::size_t kDefaultUnprompted = 6;
  static constexpr std::size_t kDefaultPrompted = 2;

  explicit MemoryBank(std::size_t unprompted_capacity = kDefaultUnprompted,
                      std::size_t prompted_capacity = kDefaultPrompted)
      : unprompted_capacity_(unprompted_capacity), prompted_capacity_(prompted_capacity) {}

  /// Appends to the queue matching entry.prompted, evicting that queue's
  /// oldest entry on overflow. Returns the evicted entry, if any.
  std::optional<MemoryEntry> push(MemoryEntry entry) {
    auto& queue = entry.prompted ? prompted_ : unprompted_;
    const std::size_t cap = entry.prompted ? prompted_capacity_ : unprompted_capacity_;
    queue.push_back(std::move(entry));
    if (queue.size() > cap) {
      MemoryEntry evicted = std::move(queue.front());
      queue.pop_front();
      return evicted;
    }
    return std::nullopt;
  }

  [[nodiscard]] const std::deque<MemoryEntry>& unprompted() const { return unprompted_; }
  [[nodiscard]] const std::deque<MemoryEntry>& prompted() const { return prompted_; }
  [[nodiscard]] std::size_t unprompted_capacity() const { return unprompted_capacity_; }
  [[nodiscard]] std::size_t prompted_capacity() const { return prompted_capacity_; }
  [[nodiscard]] std::size_t size() const { return unprompted_.size() + prompted_.size(); }
  [[nodiscard]] bool empty() const { return size() == 0; }

  /// Unprompted entries oldest-first, then prompted entries oldest-first.
  /// Ego motions passed to temporal attention follow this order.
  [[nodiscard]] std::vector<std::reference_wrapper<const MemoryEntry>> entries() const {
    std::vector<std::reference_wrapper<const MemoryEntry>> out;
    out.reserve(size());
    for (const auto& e : unprompted_) out.emplace_back(e);
    for (const auto& e : prompted_) out.emplace_back(e);
    return out;
  }

 private:
  std::size_t unprompted_capacity_;
  std::size_t prompted_capacity_;
  std::deque<MemoryEntry> unprompted_;
  std::deque<MemoryEntry> prompted_;
};

inline MemoryBank bank_push(MemoryBank bank, MemoryEntry entry) {
  bank.push(std::move(entry));
  return bank;
}

}  // namespace m4d::memory

#endif  // M4D_MEMORY_BANK_HPP
