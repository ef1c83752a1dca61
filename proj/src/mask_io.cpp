// Copyright 2026 The dyst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// DYSTMSK1 layout, all integers little-endian:
//   magic    8 bytes  "DYSTMSK1"
//   version  u32      1
//   n        u64
//   n rows:  u32 count, then count x (u64 begin, u64 end)
//   crc32    u32      over every preceding byte

#include "dyst/error.hpp"
#include "dyst/mask.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <unordered_map>

namespace dyst {

namespace {

constexpr std::array<char, 8> kMagic{'D', 'Y', 'S', 'T', 'M', 'S', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t> &out, T value) {
    for (std::size_t k = 0; k < sizeof(T); ++k) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * k)));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if (bytes_.size() - pos_ < sizeof(T)) {
            throw FormatError("truncated mask stream at byte " + std::to_string(pos_));
        }
        T value = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k) {
            value |= static_cast<T>(bytes_[pos_ + k]) << (8 * k);
        }
        pos_ += sizeof(T);
        return value;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths
    constexpr std::size_t chunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += chunk) {
        auto len = std::min(chunk, bytes.size() - off);
        crc = crc32(crc, bytes.data() + off, static_cast<uInt>(len));
    }
    return static_cast<std::uint32_t>(crc);
}

struct ListHash {
    std::size_t operator()(const IntervalList &list) const {
        std::size_t h = list.size();
        for (const auto &iv : list) {
            h ^= std::hash<std::uint64_t>{}(iv.begin) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h ^= std::hash<std::uint64_t>{}(iv.end) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
};

} // namespace

std::vector<std::uint8_t> serialize_mask(const AttentionMask &mask) {
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        auto row = mask.row(i);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(row.size()));
        for (const auto &iv : row) {
            put<std::uint64_t>(out, iv.begin);
            put<std::uint64_t>(out, iv.end);
        }
    }
    put<std::uint32_t>(out, crc_of(out));
    return out;
}

AttentionMask deserialize_mask(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError("bad magic: not a DYSTMSK1 file");
    }
    if (bytes.size() < kMagic.size() + 4 + 8 + 4) {
        throw FormatError("truncated mask stream: header incomplete");
    }
    Reader header(bytes.subspan(kMagic.size()));
    auto version = header.get<std::uint32_t>();
    if (version != kVersion) {
        throw FormatError("unsupported mask format version " + std::to_string(version));
    }
    auto payload = bytes.first(bytes.size() - 4);
    Reader tail(bytes.last(4));
    if (tail.get<std::uint32_t>() != crc_of(payload)) {
        throw FormatError("CRC32 mismatch: mask stream is corrupt or truncated");
    }

    Reader in(payload.subspan(kMagic.size() + 4));
    auto n = in.get<std::uint64_t>();
    // every row needs at least its count word
    if (n > in.remaining() / 4) {
        throw FormatError("truncated mask stream: " + std::to_string(n) + " rows declared");
    }
    std::vector<IntervalList> patterns;
    std::vector<std::uint32_t> row_pattern(n);
    std::unordered_map<IntervalList, std::uint32_t, ListHash> seen;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto count = in.get<std::uint32_t>();
        if (count > in.remaining() / 16) {
            throw FormatError("truncated mask stream in row " + std::to_string(i));
        }
        IntervalList row(count);
        for (auto &iv : row) {
            iv.begin = in.get<std::uint64_t>();
            iv.end = in.get<std::uint64_t>();
        }
        auto [it, inserted] = seen.try_emplace(std::move(row), static_cast<std::uint32_t>(patterns.size()));
        if (inserted) {
            patterns.push_back(it->first);
        }
        row_pattern[i] = it->second;
    }
    if (in.remaining() != 0) {
        throw FormatError("trailing bytes after the last row");
    }
    try {
        return AttentionMask(n, std::move(patterns), std::move(row_pattern));
    } catch (const InvariantError &e) {
        throw FormatError(e.what());
    }
}

} // namespace dyst
