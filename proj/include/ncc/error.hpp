#pragma once

#include <cstddef>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ncc {

enum class ErrorKind {
    shape_mismatch,
    domain,
    invalid_argument,
    invalid_axis,
    missing_grad,
    not_scalar,
    config,
    io,
    numeric,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::domain: return "domain";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::invalid_axis: return "invalid_axis";
    case ErrorKind::missing_grad: return "missing_grad";
    case ErrorKind::not_scalar: return "not_scalar";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
}

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-checkable kind next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

namespace detail {
struct WarningSink {
    std::mutex mutex;
    std::set<std::string> seen;
    bool quiet = false;
    std::size_t count = 0;
};

inline WarningSink& warning_sink() {
    static WarningSink sink;
    return sink;
}
} // namespace detail

/// Emits a warning to stderr once per distinct message.
inline void warn(const std::string& message) {
    auto& sink = detail::warning_sink();
    std::lock_guard lock(sink.mutex);
    ++sink.count;
    if (!sink.seen.insert(message).second || sink.quiet) return;
    std::cerr << "[ncc warning] " << message << '\n';
}

inline void set_warnings_quiet(bool quiet) {
    auto& sink = detail::warning_sink();
    std::lock_guard lock(sink.mutex);
    sink.quiet = quiet;
}

inline bool warnings_quiet() {
    auto& sink = detail::warning_sink();
    std::lock_guard lock(sink.mutex);
    return sink.quiet;
}

/// Silences warnings until destroyed, then restores the previous setting.
class QuietWarnings {
public:
    QuietWarnings() : previous_(warnings_quiet()) { set_warnings_quiet(true); }
    ~QuietWarnings() { set_warnings_quiet(previous_); }
    QuietWarnings(const QuietWarnings&) = delete;
    QuietWarnings& operator=(const QuietWarnings&) = delete;

private:
    bool previous_;
};

/// Total warnings raised so far, including suppressed duplicates.
inline std::size_t warning_count() {
    auto& sink = detail::warning_sink();
    std::lock_guard lock(sink.mutex);
    return sink.count;
}

} // namespace ncc
