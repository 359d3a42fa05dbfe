#pragma once

// Little-endian binary streams for artifact files. Every artifact starts with
// a header of (magic, format version, config hash).

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "cfedit/error.hpp"

namespace cfe::detail {

inline constexpr std::uint32_t kArtifactVersion = 1;

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(std::string_view s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
    void header(std::string_view magic, std::uint64_t config_hash) {
        raw(magic.data(), magic.size());
        u32(kArtifactVersion);
        u64(config_hash);
    }
    void finish() {
        out_.flush();
        if (!out_) throw Error(Errc::io, "failed writing artifact");
    }

private:
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

    std::ostream& out_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

    std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
    double f64() { double v; raw(&v, sizeof v); return v; }
    std::string str() {
        const auto n = u64();
        if (n > (1ull << 32)) fail("string length out of range");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    // Verifies magic and version; the stored config hash must equal `expected_hash`.
    void header(std::string_view magic, std::uint64_t expected_hash) {
        std::string got(magic.size(), '\0');
        raw(got.data(), got.size());
        if (got != magic) fail("bad magic, not a " + std::string(magic) + " file");
        const auto version = u32();
        if (version != kArtifactVersion) fail("unsupported format version " + std::to_string(version));
        const auto hash = u64();
        if (hash != expected_hash) {
            throw Error(Errc::precondition,
                        name_ + ": config hash mismatch (artifact was built with a different "
                                "configuration; rerun `index`)");
        }
    }
    [[noreturn]] void fail(const std::string& why) const { throw Error(Errc::format, name_ + ": " + why); }

private:
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
    }

    std::istream& in_;
    std::string name_;
};

}  // namespace cfe::detail
