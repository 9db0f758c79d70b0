#include "binary_io.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <utility>

namespace verifai::detail {

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IndexError("cannot create " + path.string());
}

void BinaryWriter::raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    written_ += n;
}

void BinaryWriter::u32(std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    raw(b, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
}

void BinaryWriter::string(std::string_view s) {
    if (s.size() > UINT32_MAX) throw IndexError("string too long for index format");
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
}

void BinaryWriter::header(const Magic& magic, std::uint32_t version) {
    raw(magic.data(), magic.size());
    u32(version);
}

void BinaryWriter::close() {
    out_.flush();
    if (!out_) throw IndexError("write failed: " + path_.string());
    out_.close();
}

MappedFile::MappedFile(const std::filesystem::path& path) {
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) throw IndexError("cannot open " + path.string());
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw IndexError("cannot stat " + path.string());
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
        void* p = ::mmap(nullptr, size_, PROT_READ, MAP_SHARED, fd, 0);
        if (p == MAP_FAILED) {
            ::close(fd);
            throw IndexError("mmap failed for " + path.string());
        }
        data_ = static_cast<const std::uint8_t*>(p);
    }
    ::close(fd);
}

MappedFile::~MappedFile() { release(); }

MappedFile::MappedFile(MappedFile&& other) noexcept
    : data_(std::exchange(other.data_, nullptr)), size_(std::exchange(other.size_, 0)) {}

MappedFile& MappedFile::operator=(MappedFile&& other) noexcept {
    if (this != &other) {
        release();
        data_ = std::exchange(other.data_, nullptr);
        size_ = std::exchange(other.size_, 0);
    }
    return *this;
}

void MappedFile::release() noexcept {
    if (data_) ::munmap(const_cast<std::uint8_t*>(data_), size_);
    data_ = nullptr;
    size_ = 0;
}

void BinaryReader::need(std::size_t n) {
    if (remaining() < n) throw IndexError(what_ + ": truncated file");
}

std::uint8_t BinaryReader::u8() {
    need(1);
    return data_[pos_++];
}

std::uint32_t BinaryReader::u32() {
    need(4);
    const auto* p = data_.data() + pos_;
    pos_ += 4;
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint64_t BinaryReader::u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
}

std::string BinaryReader::string() {
    auto n = u32();
    auto b = bytes(n);
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

std::span<const std::uint8_t> BinaryReader::bytes(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

void BinaryReader::expect_header(const Magic& magic, std::uint32_t version) {
    auto m = bytes(4);
    if (std::memcmp(m.data(), magic.data(), 4) != 0) throw IndexError(what_ + ": bad magic bytes");
    auto v = u32();
    if (v != version)
        throw IndexError(what_ + ": unsupported format version " + std::to_string(v) + " (expected " +
                         std::to_string(version) + ")");
}

}  // namespace verifai::detail
