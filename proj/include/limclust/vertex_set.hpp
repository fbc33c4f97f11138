#pragma once

#include <cstdint>
#include <vector>

#include "limclust/error.hpp"

namespace limclust {

// Subset of a structure domain {0..n-1} with bitset semantics.
// All iteration is in ascending vertex order, which keeps every
// downstream computation deterministic.
class VertexSet {
public:
    VertexSet() : n_(0) {}
    explicit VertexSet(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

    static VertexSet full(std::size_t n) {
        VertexSet s(n);
        for (std::size_t v = 0; v < n; ++v) s.set(static_cast<std::uint32_t>(v));
        return s;
    }

    static VertexSet of(std::size_t n, std::initializer_list<std::uint32_t> ids) {
        VertexSet s(n);
        for (auto v : ids) s.set(v);
        return s;
    }

    std::size_t domain_size() const { return n_; }

    void set(std::uint32_t v) {
        check(v);
        words_[v >> 6] |= (std::uint64_t{1} << (v & 63));
    }
    void reset(std::uint32_t v) {
        check(v);
        words_[v >> 6] &= ~(std::uint64_t{1} << (v & 63));
    }
    bool test(std::uint32_t v) const {
        check(v);
        return (words_[v >> 6] >> (v & 63)) & 1;
    }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(__builtin_popcountll(w));
        return c;
    }
    bool empty() const {
        for (auto w : words_) if (w) return false;
        return true;
    }

    VertexSet& operator|=(const VertexSet& o) {
        require_same(o);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }
    VertexSet& operator&=(const VertexSet& o) {
        require_same(o);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
        return *this;
    }
    VertexSet& operator-=(const VertexSet& o) {
        require_same(o);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~o.words_[i];
        return *this;
    }

    friend VertexSet operator|(VertexSet a, const VertexSet& b) { a |= b; return a; }
    friend VertexSet operator&(VertexSet a, const VertexSet& b) { a &= b; return a; }
    friend VertexSet operator-(VertexSet a, const VertexSet& b) { a -= b; return a; }

    VertexSet complement() const {
        VertexSet r(n_);
        for (std::size_t i = 0; i < words_.size(); ++i) r.words_[i] = ~words_[i];
        r.trim();
        return r;
    }

    VertexSet symmetric_difference(const VertexSet& o) const {
        require_same(o);
        VertexSet r(n_);
        for (std::size_t i = 0; i < words_.size(); ++i) r.words_[i] = words_[i] ^ o.words_[i];
        return r;
    }

    bool operator==(const VertexSet& o) const { return n_ == o.n_ && words_ == o.words_; }
    bool operator!=(const VertexSet& o) const { return !(*this == o); }

    bool is_subset_of(const VertexSet& o) const {
        require_same(o);
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }

    bool intersects(const VertexSet& o) const {
        require_same(o);
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & o.words_[i]) return true;
        return false;
    }

    template <typename F>
    void for_each(F&& f) const {
        for (std::size_t i = 0; i < words_.size(); ++i) {
            std::uint64_t w = words_[i];
            while (w) {
                std::uint32_t v = static_cast<std::uint32_t>(i * 64 + __builtin_ctzll(w));
                f(v);
                w &= w - 1;
            }
        }
    }

    std::vector<std::uint32_t> to_vector() const {
        std::vector<std::uint32_t> out;
        out.reserve(count());
        for_each([&](std::uint32_t v) { out.push_back(v); });
        return out;
    }

    static VertexSet from_vector(std::size_t n, const std::vector<std::uint32_t>& ids) {
        VertexSet s(n);
        for (auto v : ids) s.set(v);
        return s;
    }

private:
    void check(std::uint32_t v) const {
        if (v >= n_) throw input_error("vertex id " + std::to_string(v) + " out of range (n=" + std::to_string(n_) + ")");
    }
    void require_same(const VertexSet& o) const {
        if (n_ != o.n_) throw input_error("vertex sets over different domains");
    }
    void trim() {
        if (n_ % 64 != 0 && !words_.empty())
            words_.back() &= (std::uint64_t{1} << (n_ % 64)) - 1;
    }

    std::size_t n_;
    std::vector<std::uint64_t> words_;
};

} // namespace limclust
