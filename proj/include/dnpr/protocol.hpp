#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "dnpr/bits.hpp"
#include "dnpr/error.hpp"
#include "dnpr/model.hpp"
#include "dnpr/quantizer.hpp"

namespace dnpr {

/// All derived protocol constants for one problem instance.
///
///   delta  = max{(mb)^{-(2 alpha + 1)/2}, n^{-1/2}}   grid step
///   b0     = index width covering the winsorized grid
///   btilde = floor(b / b0)                             values per machine
///   k      = clamp(floor((mb)^{(2a+1)/(2a+2)} n^{-1/(2a+2)}), 1, m)
///   istar  = min(floor(m btilde / k), floor((mn)^{1/(2a+1)}))
struct ProtocolPlan {
    ProblemConfig config;
    QuantizerSpec quantizer;
    double delta = 1.0;
    int b0 = 1;
    std::uint64_t btilde = 1;
    std::uint64_t k = 1;
    std::uint64_t istar = 1;
};

inline ProtocolPlan make_plan(const ProblemConfig& cfg) {
    const double mb = static_cast<double>(cfg.m) * static_cast<double>(cfg.b);
    const double mn = static_cast<double>(cfg.m) * static_cast<double>(cfg.n);
    const double n = static_cast<double>(cfg.n);
    const double a = static_cast<double>(cfg.alpha);

    ProtocolPlan plan;
    plan.config = cfg;
    plan.delta = std::max(std::pow(mb, -(2.0 * a + 1.0) / 2.0), std::pow(n, -0.5));
    plan.quantizer = make_quantizer(plan.delta, cfg.c_tilde);
    plan.b0 = plan.quantizer.bits_per_value;
    plan.btilde = cfg.b / static_cast<std::uint64_t>(plan.b0);
    if (plan.btilde == 0)
        throw BudgetError("make_plan: budget of " + std::to_string(cfg.b) +
                          " bits cannot carry one " + std::to_string(plan.b0) + "-bit value");
    const double k_raw = std::floor(std::pow(mb, (2.0 * a + 1.0) / (2.0 * a + 2.0)) *
                                    std::pow(n, -1.0 / (2.0 * a + 2.0)));
    plan.k = std::min<std::uint64_t>(
        std::max<std::uint64_t>(k_raw >= 1.0 ? static_cast<std::uint64_t>(k_raw) : 0, 1), cfg.m);
    const std::uint64_t dim = static_cast<std::uint64_t>(std::pow(mn, 1.0 / (2.0 * a + 1.0)));
    plan.istar = std::min(cfg.m * plan.btilde / plan.k, std::max<std::uint64_t>(dim, 1));
    return plan;
}

/// I_j = { ceil((m s + j) / k) : s = 0, ..., btilde - 1 }, in s order.
inline std::vector<std::uint64_t> index_set(const ProtocolPlan& plan, std::uint64_t j) {
    if (j < 1 || j > plan.config.m) throw ValidationError("index_set: machine index out of range");
    std::vector<std::uint64_t> out;
    out.reserve(plan.btilde);
    for (std::uint64_t s = 0; s < plan.btilde; ++s) {
        const std::uint64_t t = plan.config.m * s + j;
        out.push_back((t + plan.k - 1) / plan.k);  // ceil(t / k)
    }
    return out;
}

/// Number of machines whose index set contains i.  Every t in [1, m*btilde]
/// maps to exactly one (j, s) pair, so the count is the size of
/// ((i-1)k, ik] intersected with [1, m*btilde]; in particular it equals k for
/// all i <= floor(m*btilde/k).
inline std::uint64_t coverage_count(const ProtocolPlan& plan, std::uint64_t i) {
    if (i < 1) throw ValidationError("coverage_count: i is 1-based");
    const std::uint64_t total = plan.config.m * plan.btilde;
    const std::uint64_t lo = (i - 1) * plan.k;  // exclusive
    const std::uint64_t hi = i * plan.k;        // inclusive
    if (lo >= total) return 0;
    return std::min(hi, total) - lo;
}

/// Largest coefficient index any machine transmits: ceil(m*btilde / k).
inline std::uint64_t plan_max_index(const ProtocolPlan& plan) {
    return (plan.config.m * plan.btilde + plan.k - 1) / plan.k;
}

/// Bit-exact payload for one machine: btilde indices of b0 bits each, packed
/// big-endian in s order.  Construction enforces the hard per-machine budget.
struct Message {
    std::uint32_t machine = 1;
    std::uint32_t bit_length = 0;
    std::vector<std::uint8_t> payload;
};

inline Message finish_message(std::uint64_t machine, BitWriter&& bits, std::uint64_t budget_bits) {
    if (bits.bit_length() > budget_bits)
        throw BudgetError("message for machine " + std::to_string(machine) + " needs " +
                          std::to_string(bits.bit_length()) + " bits > budget " +
                          std::to_string(budget_bits));
    Message msg;
    msg.machine = static_cast<std::uint32_t>(machine);
    msg.bit_length = static_cast<std::uint32_t>(bits.bit_length());
    msg.payload = std::move(bits).take_bytes();
    return msg;
}

/// Quantize and pack X_{ij} for every i in I_j.  The row must cover max(I_j).
inline Message local_encode(const ProtocolPlan& plan, const ObservationRow& row,
                            std::uint64_t seed) {
    const auto indices = index_set(plan, row.machine);
    if (!indices.empty() && indices.back() > row.values.size())
        throw ValidationError("local_encode: row shorter than its index set");
    BitWriter bits;
    for (const std::uint64_t i : indices) {
        const std::uint64_t idx =
            encode_value(row.values[i - 1], DitherKey{seed, i, row.machine}, plan.quantizer);
        bits.append(idx, plan.b0);
    }
    return finish_message(row.machine, std::move(bits), plan.config.b);
}

/// theta-hat with values for i <= istar; entries beyond istar are zero.
struct Estimate {
    std::vector<double> values;  // size istar
    std::uint64_t istar = 0;

    double at(std::uint64_t i) const {  // 1-based
        return (i >= 1 && i <= values.size()) ? values[i - 1] : 0.0;
    }
};

struct DecodeOptions {
    /// Divide by the nominal replication count k instead of the actual
    /// coverage count (the two coincide for i <= istar).
    bool paper_exact = false;
};

/// Average the decoded values per coefficient and truncate at istar.
inline Estimate central_decode(const ProtocolPlan& plan, const std::vector<Message>& messages,
                               std::uint64_t seed, DecodeOptions options = {}) {
    const std::uint64_t m = plan.config.m;
    if (messages.size() != m)
        throw ValidationError("central_decode: expected one message per machine");
    std::vector<char> seen(m + 1, 0);
    for (const Message& msg : messages) {
        if (msg.machine < 1 || msg.machine > m)
            throw ValidationError("central_decode: machine index out of range");
        if (seen[msg.machine]) throw ValidationError("central_decode: duplicate machine message");
        seen[msg.machine] = 1;
    }

    Estimate est;
    est.istar = plan.istar;
    est.values.assign(plan.istar, 0.0);
    std::vector<std::uint64_t> counts(plan.istar, 0);
    const std::uint32_t expected_bits = static_cast<std::uint32_t>(plan.btilde) *
                                        static_cast<std::uint32_t>(plan.b0);
    for (const Message& msg : messages) {
        if (msg.bit_length != expected_bits)
            throw ValidationError("central_decode: payload length mismatch");
        BitReader bits(msg.payload, msg.bit_length);
        const auto indices = index_set(plan, msg.machine);
        for (const std::uint64_t i : indices) {
            const std::uint64_t idx = bits.read(plan.b0);
            if (i > plan.istar) continue;
            est.values[i - 1] += decode_value(idx, DitherKey{seed, i, msg.machine}, plan.quantizer);
            ++counts[i - 1];
        }
    }
    for (std::uint64_t i = 0; i < plan.istar; ++i) {
        const double divisor =
            options.paper_exact ? static_cast<double>(plan.k) : static_cast<double>(counts[i]);
        est.values[i] = counts[i] > 0 ? est.values[i] / divisor : 0.0;
    }
    return est;
}

// --- message file format ----------------------------------------------------
//
// 8-byte magic "DNPRMSG1", machine index (u32 BE), bit length (u32 BE),
// payload bytes zero-padded to ceil(bit_length / 8).  A transcript is the
// concatenation of the m messages of one trial.

inline constexpr std::array<char, 8> kMessageMagic = {'D', 'N', 'P', 'R', 'M', 'S', 'G', '1'};

namespace detail {

inline void put_u32_be(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> raw = {
        static_cast<char>(v >> 24), static_cast<char>((v >> 16) & 0xff),
        static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    os.write(raw.data(), raw.size());
}

inline std::uint32_t get_u32_be(std::istream& is) {
    std::array<unsigned char, 4> raw{};
    is.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (!is) throw ValidationError("message file: truncated header field");
    return (std::uint32_t{raw[0]} << 24) | (std::uint32_t{raw[1]} << 16) |
           (std::uint32_t{raw[2]} << 8) | std::uint32_t{raw[3]};
}

}  // namespace detail

inline void write_message(std::ostream& os, const Message& msg) {
    os.write(kMessageMagic.data(), kMessageMagic.size());
    detail::put_u32_be(os, msg.machine);
    detail::put_u32_be(os, msg.bit_length);
    const std::size_t n_bytes = (msg.bit_length + 7) / 8;
    if (msg.payload.size() < n_bytes)
        throw ValidationError("write_message: payload shorter than bit length");
    os.write(reinterpret_cast<const char*>(msg.payload.data()),
             static_cast<std::streamsize>(n_bytes));
}

inline Message read_message(std::istream& is) {
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMessageMagic) throw ValidationError("message file: bad magic");
    Message msg;
    msg.machine = detail::get_u32_be(is);
    msg.bit_length = detail::get_u32_be(is);
    const std::size_t n_bytes = (msg.bit_length + 7) / 8;
    msg.payload.resize(n_bytes);
    is.read(reinterpret_cast<char*>(msg.payload.data()), static_cast<std::streamsize>(n_bytes));
    if (!is) throw ValidationError("message file: truncated payload");
    return msg;
}

inline void write_transcript(std::ostream& os, const std::vector<Message>& messages) {
    for (const Message& msg : messages) write_message(os, msg);
}

inline std::vector<Message> read_transcript(std::istream& is) {
    std::vector<Message> out;
    while (is.peek() != std::istream::traits_type::eof()) out.push_back(read_message(is));
    return out;
}

}  // namespace dnpr
