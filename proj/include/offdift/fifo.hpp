#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>

#include "offdift/error.hpp"

namespace offdift {

inline constexpr std::size_t kFifoDepth = 16;

// Bounded word FIFO; overflow and underflow are errors, never drops.
class BoundedFifo {
 public:
  explicit BoundedFifo(std::string name, std::size_t depth = kFifoDepth) : name_(std::move(name)), depth_(depth) {}

  void push(std::uint32_t v) {
    if (q_.size() == depth_) throw Error(ErrorCode::FifoOverflow, name_ + " FIFO full at depth " + std::to_string(depth_));
    q_.push_back(v);
    if (q_.size() > high_water_) high_water_ = q_.size();
  }

  std::uint32_t pop() {
    if (q_.empty()) throw Error(ErrorCode::FifoEmpty, name_ + " FIFO empty");
    const auto v = q_.front();
    q_.pop_front();
    ++pops_;
    return v;
  }

  std::uint32_t front() const {
    if (q_.empty()) throw Error(ErrorCode::FifoEmpty, name_ + " FIFO empty");
    return q_.front();
  }

  bool empty() const { return q_.empty(); }
  std::size_t size() const { return q_.size(); }
  std::size_t high_water() const { return high_water_; }
  std::size_t pops() const { return pops_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::size_t depth_;
  std::deque<std::uint32_t> q_;
  std::size_t high_water_ = 0;
  std::size_t pops_ = 0;
};

// FIFOs attached to one TMC unit.
struct TmcFifos {
  BoundedFifo instrumentation{"instrumentation"};
  BoundedFifo ps2pl{"ps2pl"};
  BoundedFifo pl2ps{"pl2ps"};
};

}  // namespace offdift
