#pragma once

// JSON documents that remember where each value came from, so schema
// violations can be reported as "file:line: message".

#include <cstddef>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncc/error.hpp"

namespace ncc {

using Json = nlohmann::json;
using JsonPointer = nlohmann::json::json_pointer;

namespace detail {

/// Character iterator that tracks the line of the last non-whitespace
/// character consumed (the lexer's one-character lookahead past a number
/// must not advance the reported line).
class LineCountingIterator {
public:
    using iterator_category = std::input_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    LineCountingIterator() = default;
    LineCountingIterator(const char* pos, std::size_t* line, std::size_t* significant_line)
        : pos_(pos), line_(line), significant_line_(significant_line) {}

    reference operator*() const { return *pos_; }

    LineCountingIterator& operator++() {
        const char c = *pos_;
        if (c == '\n') ++*line_;
        else if (c != ' ' && c != '\t' && c != '\r') *significant_line_ = *line_;
        ++pos_;
        return *this;
    }

    LineCountingIterator operator++(int) {
        auto copy = *this;
        ++*this;
        return copy;
    }

    bool operator==(const LineCountingIterator& other) const { return pos_ == other.pos_; }
    bool operator!=(const LineCountingIterator& other) const { return pos_ != other.pos_; }

private:
    const char* pos_ = nullptr;
    std::size_t* line_ = nullptr;
    std::size_t* significant_line_ = nullptr;
};

/// SAX consumer that only records the source line of every JSON pointer.
class LineRecorder : public nlohmann::json_sax<Json> {
public:
    explicit LineRecorder(const std::size_t* line) : line_(line) {}

    std::map<std::string, std::size_t> lines;

    bool null() override { return scalar(); }
    bool boolean(bool) override { return scalar(); }
    bool number_integer(number_integer_t) override { return scalar(); }
    bool number_unsigned(number_unsigned_t) override { return scalar(); }
    bool number_float(number_float_t, const string_t&) override { return scalar(); }
    bool string(string_t&) override { return scalar(); }
    bool binary(binary_t&) override { return scalar(); }
    bool start_object(std::size_t) override { return open(false); }
    bool start_array(std::size_t) override { return open(true); }
    bool end_object() override { return close(); }
    bool end_array() override { return close(); }
    bool key(string_t& k) override {
        frames_.back().key = k;
        record();
        return true;
    }
    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override { return false; }

private:
    struct Frame {
        bool array = false;
        std::size_t index = 0;
        std::string key;
    };

    std::string pointer() const {
        std::string out;
        for (const auto& f : frames_) {
            out += '/';
            out += f.array ? std::to_string(f.index) : escape(f.key);
        }
        return out;
    }

    static std::string escape(const std::string& key) {
        std::string out;
        for (char c : key) {
            if (c == '~') out += "~0";
            else if (c == '/') out += "~1";
            else out += c;
        }
        return out;
    }

    void record() { lines.emplace(pointer(), *line_); }

    void advance() {
        if (!frames_.empty() && frames_.back().array) ++frames_.back().index;
    }

    bool scalar() {
        record();
        advance();
        return true;
    }

    bool open(bool array) {
        record();
        frames_.push_back({array, 0, {}});
        return true;
    }

    bool close() {
        frames_.pop_back();
        advance();
        return true;
    }

    const std::size_t* line_;
    std::vector<Frame> frames_;
};

} // namespace detail

/// A parsed JSON document plus the 1-based source line of every value.
class JsonSource {
public:
    static JsonSource from_text(std::string text, std::string name) {
        JsonSource src;
        src.name_ = std::move(name);
        src.text_ = std::move(text);
        try {
            src.root_ = Json::parse(src.text_);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::config, src.name_ + ":" + std::to_string(src.line_of_byte(e.byte)) +
                                               ": malformed JSON (" + e.what() + ")");
        }
        std::size_t line = 1, significant = 1;
        detail::LineRecorder recorder(&significant);
        const char* begin = src.text_.data();
        detail::LineCountingIterator first(begin, &line, &significant);
        detail::LineCountingIterator last(begin + src.text_.size(), &line, &significant);
        Json::sax_parse(first, last, &recorder);
        src.lines_ = std::move(recorder.lines);
        return src;
    }

    static JsonSource from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::io, "cannot open " + path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        return from_text(buffer.str(), path);
    }

    const Json& root() const { return root_; }
    const std::string& name() const { return name_; }

    std::size_t line_of(const JsonPointer& ptr) const {
        auto p = ptr;
        while (true) {
            auto it = lines_.find(p.to_string());
            if (it != lines_.end()) return it->second;
            if (p.empty()) return 1;
            p = p.parent_pointer();
        }
    }

    [[noreturn]] void fail(const JsonPointer& ptr, const std::string& message) const {
        throw Error(ErrorKind::config, name_ + ":" + std::to_string(line_of(ptr)) + ": " +
                                           (ptr.empty() ? std::string("document") : ptr.to_string()) + ": " + message);
    }

private:
    std::size_t line_of_byte(std::size_t byte) const {
        std::size_t line = 1;
        for (std::size_t i = 0; i + 1 < byte && i < text_.size(); ++i)
            if (text_[i] == '\n') ++line;
        return line;
    }

    std::string name_;
    std::string text_;
    Json root_;
    std::map<std::string, std::size_t> lines_;
};

/// Strict reader over one JSON object: unknown keys are rejected up front and
/// every accessor reports type errors with the value's source line.
class ObjectReader {
public:
    ObjectReader(const JsonSource& source, JsonPointer ptr, const std::set<std::string>& allowed)
        : source_(source), ptr_(std::move(ptr)) {
        const Json& value = source_.root().at(ptr_);
        if (!value.is_object()) source_.fail(ptr_, "expected an object");
        for (const auto& [key, _] : value.items())
            if (!allowed.count(key)) source_.fail(ptr_ / key, "unknown key '" + key + "'");
    }

    const JsonSource& source() const { return source_; }
    const JsonPointer& pointer() const { return ptr_; }
    JsonPointer child(const std::string& key) const { return ptr_ / key; }
    bool has(const std::string& key) const { return object().contains(key); }
    const Json& raw(const std::string& key) const {
        if (!has(key)) source_.fail(ptr_, "missing required key '" + key + "'");
        return object().at(key);
    }

    double number(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_number()) source_.fail(child(key), "expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    std::int64_t integer(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_number_integer()) source_.fail(child(key), "expected an integer");
        return v.get<std::int64_t>();
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) const {
        return has(key) ? integer(key) : fallback;
    }

    std::size_t count(const std::string& key) const {
        const auto v = integer(key);
        if (v < 0) source_.fail(child(key), "must be non-negative");
        return static_cast<std::size_t>(v);
    }
    std::size_t count(const std::string& key, std::size_t fallback) const { return has(key) ? count(key) : fallback; }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) source_.fail(child(key), "expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_string()) source_.fail(child(key), "expected a string");
        return v.get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }

    /// Number of elements of an array-valued key.
    std::size_t array_size(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_array()) source_.fail(child(key), "expected an array");
        return v.size();
    }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        source_.fail(key.empty() ? ptr_ : child(key), message);
    }

private:
    const Json& object() const { return source_.root().at(ptr_); }

    const JsonSource& source_;
    JsonPointer ptr_;
};

} // namespace ncc
