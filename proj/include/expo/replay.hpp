#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "expo/errors.hpp"
#include "expo/sac.hpp"
#include "expo/scene.hpp"

namespace expo {

// Fixed-capacity FIFO. Index 0 is the oldest live entry.
template <class T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
  }

  void push(T item) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(item));
    } else {
      data_[head_] = std::move(item);
    }
    head_ = (head_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return head_; }
  bool full() const { return data_.size() == capacity_; }

  const T& operator[](std::size_t i) const { return data_[physical(i)]; }
  const T& slot(std::size_t physical_index) const { return data_[physical_index]; }

  // Uniform with replacement over physical slots.
  std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n) const {
    if (data_.size() < n || n == 0) throw ProtocolError("replay sample of " + std::to_string(n) + " from " +
                                                        std::to_string(data_.size()) + " entries");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> out(n);
    for (auto& v : out) v = pick(rng);
    return out;
  }

  void reserve(std::size_t n) { data_.reserve(std::min(n, capacity_)); }

  // Raw state access for checkpoints.
  const std::vector<T>& storage() const { return data_; }
  void restore(std::vector<T> data, std::size_t head) {
    if (data.size() > capacity_ || head >= capacity_) throw LoadError("replay state does not fit capacity");
    data_ = std::move(data);
    head_ = head;
  }

 private:
  std::size_t physical(std::size_t i) const {
    if (i >= data_.size()) throw std::out_of_range("replay index");
    return data_.size() < capacity_ ? i : (head_ + i) % capacity_;
  }

  std::size_t capacity_;
  std::vector<T> data_;
  std::size_t head_ = 0;
};

// obs planes 0..3 followed by the newest plane of next_obs; the other three
// next_obs planes equal obs planes 1..3.
struct CompactTransition {
  static constexpr std::size_t kPlanes = kObsFrames + 1;
  std::vector<std::uint8_t> planes;
  float action = 0.0f;
  float reward = 0.0f;
  bool done = false;
};

inline CompactTransition compact(const Observation& obs, double action, double reward, const Observation& next,
                                 bool done) {
  if (!std::equal(obs.raw().begin() + Observation::kPlaneSize, obs.raw().end(), next.raw().begin()))
    throw ProtocolError("next observation does not continue the current frame stack");
  CompactTransition t;
  t.planes.resize(CompactTransition::kPlanes * Observation::kPlaneSize);
  std::copy(obs.raw().begin(), obs.raw().end(), t.planes.begin());
  const auto last = next.plane(kObsFrames - 1);
  std::copy(last.begin(), last.end(), t.planes.begin() + Observation::kSize);
  t.action = static_cast<float>(action);
  t.reward = static_cast<float>(reward);
  t.done = done;
  return t;
}

// Writes an observation as a network input row (values / 255).
template <class T, class Row>
void write_obs_row(const std::uint8_t* planes, Row&& row) {
  for (std::size_t i = 0; i < Observation::kSize; ++i) row(i) = static_cast<T>(planes[i]) / T(255);
}

template <class T>
nn::MatR<T> observation_row(const Observation& obs) {
  nn::MatR<T> x(1, Observation::kSize);
  write_obs_row<T>(obs.raw().data(), x.row(0));
  return x;
}

using ReplayBuffer = RingBuffer<CompactTransition>;

template <class T>
Batch<T> gather_batch(const ReplayBuffer& buf, const std::vector<std::size_t>& idx) {
  const int n = static_cast<int>(idx.size());
  Batch<T> b;
  b.obs.resize(n, Observation::kSize);
  b.next_obs.resize(n, Observation::kSize);
  b.action.resize(n);
  b.reward.resize(n);
  b.done.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& t = buf.slot(idx[i]);
    write_obs_row<T>(t.planes.data(), b.obs.row(i));
    write_obs_row<T>(t.planes.data() + Observation::kPlaneSize, b.next_obs.row(i));
    b.action(i) = t.action;
    b.reward(i) = t.reward;
    b.done(i) = t.done ? T(1) : T(0);
  }
  return b;
}

}  // namespace expo
