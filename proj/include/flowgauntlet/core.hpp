#pragma once

#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fg {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Error taxonomy.  ConfigError maps to exit code 1, DataError to 2, and any
// other Error (or std::exception) to 3 in the CLI.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct MissingColumnError : DataError {
    std::string column;
    explicit MissingColumnError(std::string col)
        : DataError("missing column '" + col + "'"), column(std::move(col)) {}
};

struct NonNumericCellError : DataError {
    std::size_t row;  // zero-based data row (header excluded)
    std::string column;
    NonNumericCellError(std::size_t r, std::string col)
        : DataError("non-numeric cell at row " + std::to_string(r) + ", column '" + col + "'"),
          row(r),
          column(std::move(col)) {}
};

struct EmptyFileError : DataError {
    using DataError::DataError;
};

struct EmptyPartitionError : DataError {
    using DataError::DataError;
};

struct TooFewRecordsError : DataError {
    using DataError::DataError;
};

struct ScaleMismatchError : DataError {
    using DataError::DataError;
};

struct NonStandardizedInputError : DataError {
    using DataError::DataError;
};

struct LengthMismatchError : Error {
    using Error::Error;
};

struct EmptyInputError : Error {
    using Error::Error;
};

struct FeatureMismatchError : Error {
    using Error::Error;
};

struct WrongModelKindError : Error {
    using Error::Error;
};

struct UnknownFeatureError : Error {
    using Error::Error;
};

struct EmptyScoresError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Logging.  Level comes from FLOWGAUNTLET_LOG (error|warn|info|debug); the
// default is warn.  All output goes to stderr so stdout stays machine-usable.
// ---------------------------------------------------------------------------

enum class LogLevel : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("FLOWGAUNTLET_LOG");
        if (env == nullptr) return LogLevel::Warn;
        const std::string v(env);
        if (v == "error") return LogLevel::Error;
        if (v == "warn") return LogLevel::Warn;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_at(LogLevel lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    static std::mutex mu;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "[" << names[static_cast<int>(lvl)] << "] " << msg << "\n";
}

inline void log_error(const std::string& msg) { log_at(LogLevel::Error, msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_at(LogLevel::Debug, msg); }

// ---------------------------------------------------------------------------
// Deterministic float formatting: shortest round-trip decimal form, the same
// on every run and platform.  Used by every CSV/SVG writer.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, bool& ok) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    double value = 0.0;
    auto res = std::from_chars(begin, end, value);
    ok = (res.ec == std::errc() && res.ptr == end && begin != end);
    return value;
}

// FNV-1a, used to fingerprint the effective run configuration in manifests.
inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

// ---------------------------------------------------------------------------
// parallel_for: run fn(i) for i in [0, n) on `jobs` threads.  jobs <= 1 runs
// inline.  The first exception thrown by any worker is rethrown to the caller.
// Work items must not depend on execution order; results should be written to
// pre-sized slots so output is identical regardless of scheduling.
// ---------------------------------------------------------------------------

inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (jobs <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace fg
