#pragma once

// Binary timestamp files, little-endian:
//   header (16 bytes): "PATS", u32 version = 1, u64 record count
//   record (16 bytes): u64 pulse index, u8 channel (0 backward, 1 forward),
//                      3 zero bytes, i32 time relative to the pulse edge in 1/16 ns

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pulse_atom/detection.hpp"
#include "pulse_atom/errors.hpp"

namespace pulse_atom {

inline constexpr std::array<char, 4> kTimestampMagic{'P', 'A', 'T', 'S'};
inline constexpr std::uint32_t kTimestampVersion = 1;
inline constexpr std::size_t kTimestampHeaderBytes = 16;
inline constexpr std::size_t kTimestampRecordBytes = 16;

namespace detail {

template <class T>
void put_le(unsigned char* out, T value) {
    auto u = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out[i] = static_cast<unsigned char>(u & 0xffu);
        u = static_cast<decltype(u)>(u >> 8);
    }
}

template <class T>
T get_le(const unsigned char* in) {
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) {
        u = static_cast<decltype(u)>((u << 8) | in[i]);
    }
    return static_cast<T>(u);
}

} // namespace detail

inline void write_timestamps(std::span<const TimestampRecord> records, std::ostream& out) {
    std::array<unsigned char, kTimestampHeaderBytes> header{};
    std::memcpy(header.data(), kTimestampMagic.data(), 4);
    detail::put_le<std::uint32_t>(header.data() + 4, kTimestampVersion);
    detail::put_le<std::uint64_t>(header.data() + 8, records.size());
    out.write(reinterpret_cast<const char*>(header.data()), header.size());

    std::vector<unsigned char> buffer;
    buffer.reserve(std::min<std::size_t>(records.size(), 65536) * kTimestampRecordBytes);
    auto flush = [&] {
        out.write(reinterpret_cast<const char*>(buffer.data()),
                  static_cast<std::streamsize>(buffer.size()));
        buffer.clear();
    };
    for (const auto& r : records) {
        unsigned char rec[kTimestampRecordBytes] = {};
        detail::put_le<std::uint64_t>(rec, r.pulse_index);
        rec[8] = static_cast<unsigned char>(r.channel);
        detail::put_le<std::int32_t>(rec + 12, r.ticks);
        buffer.insert(buffer.end(), rec, rec + kTimestampRecordBytes);
        if (buffer.size() >= 65536 * kTimestampRecordBytes) flush();
    }
    flush();
    if (!out) throw IoError("failed writing timestamp stream");
}

inline void write_timestamps(std::span<const TimestampRecord> records,
                             const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_timestamps(records, out);
}

inline std::vector<TimestampRecord> read_timestamps(std::istream& in) {
    std::array<unsigned char, kTimestampHeaderBytes> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    if (in.gcount() != static_cast<std::streamsize>(header.size())) {
        throw MalformedFile("timestamp header truncated", static_cast<std::uint64_t>(in.gcount()));
    }
    if (std::memcmp(header.data(), kTimestampMagic.data(), 4) != 0) {
        throw MalformedFile("bad magic, not a PATS timestamp file", 0);
    }
    const auto version = detail::get_le<std::uint32_t>(header.data() + 4);
    if (version != kTimestampVersion) {
        throw VersionMismatch("timestamp file version " + std::to_string(version) +
                              ", expected " + std::to_string(kTimestampVersion));
    }
    const auto count = detail::get_le<std::uint64_t>(header.data() + 8);

    std::vector<TimestampRecord> records;
    records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
    unsigned char rec[kTimestampRecordBytes];
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t offset = kTimestampHeaderBytes + i * kTimestampRecordBytes;
        in.read(reinterpret_cast<char*>(rec), kTimestampRecordBytes);
        const auto got = static_cast<std::uint64_t>(in.gcount());
        if (got != kTimestampRecordBytes) {
            throw MalformedFile("record " + std::to_string(i) + " truncated after " +
                                    std::to_string(got) + " of 16 bytes",
                                offset + got);
        }
        if (rec[8] > 1) {
            throw MalformedFile("record " + std::to_string(i) + " has invalid channel " +
                                    std::to_string(rec[8]),
                                offset + 8);
        }
        if (rec[9] != 0 || rec[10] != 0 || rec[11] != 0) {
            throw MalformedFile("record " + std::to_string(i) + " has non-zero padding", offset + 9);
        }
        records.push_back({detail::get_le<std::uint64_t>(rec), static_cast<Channel>(rec[8]),
                           detail::get_le<std::int32_t>(rec + 12)});
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw MalformedFile("trailing bytes after " + std::to_string(count) + " records",
                            kTimestampHeaderBytes + count * kTimestampRecordBytes);
    }
    return records;
}

inline std::vector<TimestampRecord> read_timestamps(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_timestamps(in);
}

} // namespace pulse_atom
