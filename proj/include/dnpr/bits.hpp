#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dnpr/error.hpp"

namespace dnpr {

/// Append-only bit stream; values are packed MSB-first (big-endian within the
/// stream), fixed width per append.
class BitWriter {
public:
    void append(std::uint64_t value, int width) {
        if (width < 1 || width > 64) throw ValidationError("BitWriter: width must be in [1, 64]");
        if (width < 64 && (value >> width) != 0)
            throw ValidationError("BitWriter: value does not fit in width");
        int remaining = width;
        while (remaining > 0) {
            if (bit_length_ % 8 == 0) bytes_.push_back(0);
            const int free_bits = 8 - static_cast<int>(bit_length_ % 8);
            const int take = remaining < free_bits ? remaining : free_bits;
            const std::uint64_t chunk = (value >> (remaining - take)) & ((1ULL << take) - 1);
            bytes_.back() |= static_cast<std::uint8_t>(chunk << (free_bits - take));
            bit_length_ += static_cast<std::size_t>(take);
            remaining -= take;
        }
    }

    std::size_t bit_length() const noexcept { return bit_length_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::vector<std::uint8_t> take_bytes() && noexcept { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t bit_length_ = 0;
};

class BitReader {
public:
    BitReader(std::span<const std::uint8_t> bytes, std::size_t bit_length)
        : bytes_(bytes), bit_length_(bit_length) {
        if (bit_length_ > bytes_.size() * 8)
            throw ValidationError("BitReader: bit length exceeds buffer");
    }

    std::uint64_t read(int width) {
        if (width < 1 || width > 64) throw ValidationError("BitReader: width must be in [1, 64]");
        if (pos_ + static_cast<std::size_t>(width) > bit_length_)
            throw ValidationError("BitReader: read past end of stream");
        std::uint64_t value = 0;
        int remaining = width;
        while (remaining > 0) {
            const std::size_t byte = pos_ / 8;
            const int offset = static_cast<int>(pos_ % 8);
            const int avail = 8 - offset;
            const int take = remaining < avail ? remaining : avail;
            const std::uint8_t chunk =
                static_cast<std::uint8_t>(bytes_[byte] >> (avail - take)) &
                static_cast<std::uint8_t>((1u << take) - 1);
            value = (value << take) | chunk;
            pos_ += static_cast<std::size_t>(take);
            remaining -= take;
        }
        return value;
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t bit_length() const noexcept { return bit_length_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t bit_length_;
    std::size_t pos_ = 0;
};

}  // namespace dnpr
