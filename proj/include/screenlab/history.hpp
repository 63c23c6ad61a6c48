// Working-status histories: dense (length, bitmask) encoding, oldest decision
// in the lowest bit. Prints oldest-first, e.g. "0011".
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace screenlab {

inline constexpr int kMaxPeriods = 20;  // dense tree stores 2^N - 1 cutoffs

struct WorkHistory {
    int length = 0;
    std::uint32_t bits = 0;

    WorkHistory() = default;
    WorkHistory(int length_, std::uint32_t bits_) : length(length_), bits(bits_) {
        if (length_ < 0 || length_ > kMaxPeriods)
            throw std::invalid_argument("WorkHistory: length out of range");
        if (length_ < 32 && (bits_ >> length_) != 0)
            throw std::invalid_argument("WorkHistory: bits beyond length");
    }

    static WorkHistory empty() { return {}; }
    static WorkHistory all_work(int t) {
        return {t, t == 0 ? 0u : (std::uint32_t{1} << t) - 1u};
    }
    static WorkHistory all_shirk(int t) { return {t, 0u}; }
    static WorkHistory from_string(const std::string& s) {
        WorkHistory w;
        for (char ch : s) {
            if (ch != '0' && ch != '1') throw std::invalid_argument("WorkHistory: bad bit char");
            w = w.append(ch == '1');
        }
        return w;
    }

    bool worked(int period_index) const {  // 0-based, oldest first
        return ((bits >> period_index) & 1u) != 0;
    }
    int work_count() const {
        int c = 0;
        for (int i = 0; i < length; ++i) c += worked(i) ? 1 : 0;
        return c;
    }
    WorkHistory append(bool work) const {
        if (length >= kMaxPeriods) throw std::invalid_argument("WorkHistory: append past max depth");
        return {length + 1, bits | (work ? (std::uint32_t{1} << length) : 0u)};
    }
    WorkHistory prefix(int t) const {
        if (t < 0 || t > length) throw std::invalid_argument("WorkHistory: bad prefix length");
        return {t, t == 0 ? 0u : bits & ((std::uint32_t{1} << t) - 1u)};
    }
    bool all_shirk_history() const { return bits == 0; }

    std::string str() const {
        std::string s;
        s.reserve(length);
        for (int i = 0; i < length; ++i) s.push_back(worked(i) ? '1' : '0');
        return s;
    }

    friend bool operator==(const WorkHistory& a, const WorkHistory& b) {
        return a.length == b.length && a.bits == b.bits;
    }
};

// All histories of a given length in bitmask-ascending order (2^t of them).
inline std::vector<WorkHistory> histories_of_length(int t, int horizon) {
    if (t < 0 || t > horizon) throw std::invalid_argument("histories_of_length: t outside [0, N]");
    std::vector<WorkHistory> out;
    out.reserve(std::size_t{1} << t);
    for (std::uint32_t m = 0; m < (std::uint32_t{1} << t); ++m) out.push_back({t, m});
    return out;
}

// (work child, shirk child)
inline std::pair<WorkHistory, WorkHistory> children(const WorkHistory& w, int horizon) {
    if (w.length >= horizon) throw std::invalid_argument("children: already at leaf depth");
    return {w.append(true), w.append(false)};
}

}  // namespace screenlab
