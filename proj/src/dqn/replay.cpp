#include <algorithm>
#include <string>

#include "flaprl/dqn.hpp"
#include "flaprl/error.hpp"

namespace flaprl::dqn {

namespace {

constexpr std::size_t kBitWords = (preprocess::kStackSize + 63) / 64;

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity, ReplayStorage storage)
    : capacity_(capacity),
      storage_(storage),
      stride_(storage == ReplayStorage::bits ? kBitWords : static_cast<std::size_t>(preprocess::kStackSize)) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

std::size_t ReplayBuffer::slot(std::size_t i) const {
    if (i >= size_) throw DimensionError("replay index " + std::to_string(i) + " out of range");
    return (head_ + i) % capacity_;
}

void ReplayBuffer::store(std::size_t s, int which, const FrameStack& stack) {
    const std::size_t base = (2 * s + static_cast<std::size_t>(which)) * stride_;
    if (storage_ == ReplayStorage::floats) {
        stack.write_hwc(std::span<float>(floats_).subspan(base, stride_));
        return;
    }
    thread_local std::vector<float> hwc(preprocess::kStackSize);
    stack.write_hwc(hwc);
    std::uint64_t* words = bits_.data() + base;
    std::fill(words, words + stride_, 0);
    for (std::size_t i = 0; i < hwc.size(); ++i) {
        if (hwc[i] == 1.0f) words[i >> 6] |= std::uint64_t{1} << (i & 63);
    }
}

void ReplayBuffer::load(std::size_t s, int which, std::span<float> out) const {
    if (out.size() != static_cast<std::size_t>(preprocess::kStackSize))
        throw DimensionError("replay state output needs " + std::to_string(preprocess::kStackSize) + " values");
    const std::size_t base = (2 * s + static_cast<std::size_t>(which)) * stride_;
    if (storage_ == ReplayStorage::floats) {
        std::copy_n(floats_.begin() + static_cast<std::ptrdiff_t>(base), out.size(), out.begin());
        return;
    }
    const std::uint64_t* words = bits_.data() + base;
    for (std::size_t w = 0; w < stride_; ++w) {
        const std::uint64_t bits = words[w];
        const std::size_t begin = w * 64;
        const std::size_t end = std::min(begin + 64, out.size());
        for (std::size_t i = begin; i < end; ++i) out[i] = static_cast<float>((bits >> (i - begin)) & 1u);
    }
}

namespace {

void require_binary(const FrameStack& stack) {
    for (int c = 0; c < preprocess::kDepth; ++c) {
        for (float v : stack.plane(c).intensities) {
            if (v != 0.0f && v != 1.0f) throw ConsistencyError("bit-packed replay storage needs binarized frames");
        }
    }
}

}  // namespace

void ReplayBuffer::push(const Transition& t, std::uint64_t stamp) {
    if (storage_ == ReplayStorage::bits) {
        require_binary(t.state);
        require_binary(t.next_state);
    }
    std::size_t s;
    if (size_ < capacity_) {
        s = (head_ + size_) % capacity_;
        const std::size_t needed = (s + 1) * 2 * stride_;
        if (storage_ == ReplayStorage::bits) {
            if (bits_.size() < needed) bits_.resize(needed);
        } else if (floats_.size() < needed) {
            floats_.resize(needed);
        }
        if (meta_.size() < s + 1) meta_.resize(s + 1);
    } else {
        s = head_;
    }
    store(s, 0, t.state);
    store(s, 1, t.next_state);
    meta_[s] = Meta{t.action, t.reward, t.terminal, stamp};
    if (size_ < capacity_) {
        ++size_;
    } else {
        head_ = (head_ + 1) % capacity_;
    }
    ++pushes_;
}

Transition ReplayBuffer::at(std::size_t i) const {
    const std::size_t s = slot(i);
    std::vector<float> hwc(preprocess::kStackSize);
    auto unpack = [&](int which) {
        load(s, which, hwc);
        std::array<env::Frame, preprocess::kDepth> planes;
        for (int c = 0; c < preprocess::kDepth; ++c) {
            env::Frame f(preprocess::kSide, preprocess::kSide);
            for (int p = 0; p < preprocess::kPlaneSize; ++p)
                f.intensities[static_cast<std::size_t>(p)] = hwc[static_cast<std::size_t>(p) * preprocess::kDepth + c];
            planes[static_cast<std::size_t>(c)] = std::move(f);
        }
        FrameStack stack = preprocess::stack_reset(planes[0]);
        for (int c = 1; c < preprocess::kDepth; ++c) stack = stack.push(planes[static_cast<std::size_t>(c)]);
        return stack;
    };
    Transition t;
    t.state = unpack(0);
    t.next_state = unpack(1);
    t.action = meta_[s].action;
    t.reward = meta_[s].reward;
    t.terminal = meta_[s].terminal;
    return t;
}

void ReplayBuffer::write_state(std::size_t i, std::span<float> out) const { load(slot(i), 0, out); }

void ReplayBuffer::write_next_state(std::size_t i, std::span<float> out) const { load(slot(i), 1, out); }

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, Rng& rng) {
    if (size < n)
        throw UnderfullBufferError("cannot sample " + std::to_string(n) + " of " + std::to_string(size) + " entries");
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t j = size - n; j < size; ++j) {
        const auto t = static_cast<std::size_t>(rng.below(j + 1));
        if (std::find(out.begin(), out.end(), t) == out.end()) {
            out.push_back(t);
        } else {
            out.push_back(j);
        }
    }
    return out;
}

std::vector<Transition> sample_batch(const ReplayBuffer& buffer, std::size_t n, Rng& rng) {
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i : sample_indices(buffer.size(), n, rng)) out.push_back(buffer.at(i));
    return out;
}

}  // namespace flaprl::dqn
