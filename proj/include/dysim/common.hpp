#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dysim {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define DYSIM_ERROR(name)                       \
    struct name : Error {                       \
        using Error::Error;                     \
    }

DYSIM_ERROR(NotFound);
DYSIM_ERROR(UnsupportedFormat);
DYSIM_ERROR(CorruptHeader);
DYSIM_ERROR(IoError);
DYSIM_ERROR(EmptySignal);
DYSIM_ERROR(InconsistentMetadata);
DYSIM_ERROR(FactorOutOfRange);
DYSIM_ERROR(InvariantViolation);
DYSIM_ERROR(NonPositiveEnvelope);
DYSIM_ERROR(KindMismatch);
DYSIM_ERROR(RangeViolation);
DYSIM_ERROR(TooShort);
DYSIM_ERROR(ShapeMismatch);
DYSIM_ERROR(EmptyTrainingSet);
DYSIM_ERROR(TooFewVoicedFrames);
DYSIM_ERROR(ZeroHealthyVariance);
DYSIM_ERROR(EmptyAlsStats);
DYSIM_ERROR(TooFewPoints);
DYSIM_ERROR(SingleClass);
DYSIM_ERROR(SchemaMismatch);
DYSIM_ERROR(ParseError);
DYSIM_ERROR(DuplicateEntry);
DYSIM_ERROR(MissingFile);
DYSIM_ERROR(NoCounterpartGender);
DYSIM_ERROR(ArtifactMissing);

#undef DYSIM_ERROR

inline constexpr double kPi = 3.14159265358979323846;

// ---- little-endian binary I/O ------------------------------------------

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

inline void write_i16(std::ostream& os, std::int16_t v) {
    write_u16(os, static_cast<std::uint16_t>(v));
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v & 0xffffffffu));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    write_u64(os, bits);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("unexpected end of stream");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    if (!is) throw IoError("unexpected end of stream");
    return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[0]) |
                                      (static_cast<std::uint16_t>(b[1]) << 8));
}

inline std::int16_t read_i16(std::istream& is) {
    return static_cast<std::int16_t>(read_u16(is));
}

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t lo = read_u32(is);
    std::uint64_t hi = read_u32(is);
    return lo | (hi << 32);
}

inline double read_f64(std::istream& is) {
    std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

// ---- deterministic seed derivation -------------------------------------

// splitmix64 finalizer; used to derive independent child seeds from a
// (master seed, stream index) pair so parallel and serial runs agree.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// ---- worker pool --------------------------------------------------------

// Runs fn(i) for i in [0, n). Results must be written to per-index slots;
// chunks are static so the work division does not depend on timing.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dysim
