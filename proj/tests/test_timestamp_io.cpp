#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pulse_atom/timestamp_io.hpp"

using namespace pulse_atom;

namespace {

std::string encode(const std::vector<TimestampRecord>& records) {
    std::ostringstream out;
    write_timestamps(records, out);
    return out.str();
}

std::vector<TimestampRecord> decode(const std::string& bytes) {
    std::istringstream in(bytes);
    return read_timestamps(in);
}

} // namespace

TEST(TimestampIo, EmptyStreamIsHeaderOnly) {
    const auto bytes = encode({});
    ASSERT_EQ(bytes.size(), 16u);
    EXPECT_EQ(bytes.substr(0, 4), "PATS");
    EXPECT_TRUE(decode(bytes).empty());
}

TEST(TimestampIo, BitExactLayout) {
    const auto bytes = encode({{0x0102030405060708ULL, Channel::Forward, -2}});
    ASSERT_EQ(bytes.size(), 32u);
    const unsigned char expected[32] = {'P', 'A', 'T', 'S', 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0,
                                        8, 7, 6, 5, 4, 3, 2, 1, 1, 0, 0, 0, 0xfe, 0xff, 0xff, 0xff};
    for (std::size_t i = 0; i < 32; ++i) {
        EXPECT_EQ(static_cast<unsigned char>(bytes[i]), expected[i]) << "byte " << i;
    }
}

TEST(TimestampIo, RandomRecordsRoundTrip) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<TimestampRecord> records(1000);
        for (auto& r : records) {
            r.pulse_index = rng();
            r.channel = static_cast<Channel>(rng() & 1u);
            r.ticks = static_cast<std::int32_t>(static_cast<std::uint32_t>(rng()));
        }
        EXPECT_EQ(decode(encode(records)), records);
    }
}

TEST(TimestampIo, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "pulse_atom_io_test.pats";
    const std::vector<TimestampRecord> records{{0, Channel::Backward, 5}, {7, Channel::Forward, -80}};
    write_timestamps(records, path);
    EXPECT_EQ(std::filesystem::file_size(path), 48u);
    EXPECT_EQ(read_timestamps(path), records);
    std::filesystem::remove(path);
    EXPECT_THROW(read_timestamps(path), IoError);
}

TEST(TimestampIo, TruncatedFinalRecordNamesOffset) {
    auto bytes = encode({{1, Channel::Backward, 1}, {2, Channel::Backward, 2}, {3, Channel::Forward, 3}});
    bytes.resize(bytes.size() - 5);
    try {
        decode(bytes);
        FAIL() << "expected MalformedFile";
    } catch (const MalformedFile& e) {
        EXPECT_EQ(e.byte_offset(), 16u + 2 * 16 + 11);
        EXPECT_NE(std::string(e.what()).find("record 2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("59"), std::string::npos);
    }
}

TEST(TimestampIo, RejectsCorruption) {
    const auto good = encode({{1, Channel::Backward, 1}});
    auto version = good;
    version[4] = 2;
    EXPECT_THROW(decode(version), VersionMismatch);
    auto magic = good;
    magic[0] = 'X';
    EXPECT_THROW(decode(magic), MalformedFile);
    auto channel = good;
    channel[16 + 8] = 7;
    EXPECT_THROW(decode(channel), MalformedFile);
    auto padding = good;
    padding[16 + 10] = 1;
    EXPECT_THROW(decode(padding), MalformedFile);
    EXPECT_THROW(decode(good + "x"), MalformedFile);
    EXPECT_THROW(decode(good.substr(0, 10)), MalformedFile);
}
