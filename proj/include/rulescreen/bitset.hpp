#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace rulescreen {

/// Fixed-size bitset over observation rows.
class RowBitset {
public:
    RowBitset() = default;
    explicit RowBitset(std::size_t n, bool value = false)
        : n_(n), words_((n + 63) / 64, value ? ~std::uint64_t{0} : 0) {
        if (value)
            trim();
    }

    std::size_t size() const { return n_; }

    void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
    void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_)
            c += std::size_t(std::popcount(w));
        return c;
    }

    bool any() const {
        for (auto w : words_)
            if (w)
                return true;
        return false;
    }

    RowBitset& operator&=(const RowBitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i)
            words_[i] &= o.words_[i];
        return *this;
    }

    RowBitset& operator|=(const RowBitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i)
            words_[i] |= o.words_[i];
        return *this;
    }

    /// this &= ~o
    RowBitset& and_not(const RowBitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i)
            words_[i] &= ~o.words_[i];
        return *this;
    }

    /// Number of bits set in both.
    std::size_t count_and(const RowBitset& o) const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < words_.size(); ++i)
            c += std::size_t(std::popcount(words_[i] & o.words_[i]));
        return c;
    }

    /// Number of bits set here but not in o.
    std::size_t count_and_not(const RowBitset& o) const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < words_.size(); ++i)
            c += std::size_t(std::popcount(words_[i] & ~o.words_[i]));
        return c;
    }

    /// Calls fn(i) for every set bit in increasing order.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits) {
                const int b = std::countr_zero(bits);
                fn(w * 64 + std::size_t(b));
                bits &= bits - 1;
            }
        }
    }

    bool operator==(const RowBitset&) const = default;

private:
    void trim() {
        if (n_ % 64 && !words_.empty())
            words_.back() &= (std::uint64_t{1} << (n_ % 64)) - 1;
    }

    std::size_t n_ = 0;
    std::vector<std::uint64_t> words_;
};

} // namespace rulescreen
