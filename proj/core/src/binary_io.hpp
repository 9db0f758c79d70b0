#pragma once

// Little-endian fixed-width encoding and read-only file mapping shared by
// the on-disk index formats.

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "verifai/error.hpp"

namespace verifai::detail {

using Magic = std::array<char, 4>;

class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path);

    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { raw(b.data(), b.size()); }
    void string(std::string_view s);
    void header(const Magic& magic, std::uint32_t version);

    /// Flushes and throws IndexError if any write failed.
    void close();
    std::uint64_t position() const { return written_; }

private:
    void raw(const void* p, std::size_t n);

    std::filesystem::path path_;
    std::ofstream out_;
    std::uint64_t written_ = 0;
};

/// Read-only shared mapping of a whole file. Empty files map to an empty span.
class MappedFile {
public:
    MappedFile() = default;
    explicit MappedFile(const std::filesystem::path& path);
    ~MappedFile();

    MappedFile(const MappedFile&) = delete;
    MappedFile& operator=(const MappedFile&) = delete;
    MappedFile(MappedFile&& other) noexcept;
    MappedFile& operator=(MappedFile&& other) noexcept;

    std::span<const std::uint8_t> bytes() const { return {data_, size_}; }
    std::size_t size() const { return size_; }

private:
    void release() noexcept;

    const std::uint8_t* data_ = nullptr;
    std::size_t size_ = 0;
};

class BinaryReader {
public:
    BinaryReader(std::span<const std::uint8_t> data, std::string what)
        : data_(data), what_(std::move(what)) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32() { return std::bit_cast<float>(u32()); }
    std::string string();
    std::span<const std::uint8_t> bytes(std::size_t n);

    /// Checks magic and version; throws IndexError naming the file otherwise.
    void expect_header(const Magic& magic, std::uint32_t version);

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n);

    std::span<const std::uint8_t> data_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline float load_f32_le(const std::uint8_t* p) {
    std::uint32_t v = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                      static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
    return std::bit_cast<float>(v);
}

}  // namespace verifai::detail
