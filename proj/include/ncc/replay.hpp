#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "ncc/error.hpp"

namespace ncc {

/// Fixed-capacity ring of transitions. Once full, the oldest item is overwritten.
template <class T>
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {
        if (capacity == 0) throw Error(ErrorKind::invalid_argument, "replay capacity must be positive");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    void push(T item) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(item));
        } else {
            items_[next_] = std::move(item);
        }
        next_ = (next_ + 1) % capacity_;
    }

    const T& operator[](std::size_t i) const { return items_.at(i); }

    /// `count` distinct items, uniformly chosen, returned in storage order.
    std::vector<const T*> sample(std::size_t count, std::mt19937_64& rng) const {
        if (count > items_.size())
            throw Error(ErrorKind::invalid_argument, "cannot sample " + std::to_string(count) + " of " +
                                                         std::to_string(items_.size()) + " stored transitions");
        std::vector<std::size_t> all(items_.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::vector<std::size_t> chosen;
        chosen.reserve(count);
        std::sample(all.begin(), all.end(), std::back_inserter(chosen), count, rng);
        std::vector<const T*> out;
        out.reserve(count);
        for (auto i : chosen) out.push_back(&items_[i]);
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<T> items_;
};

} // namespace ncc
