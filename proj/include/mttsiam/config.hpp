#pragma once

// Flat, ordered key-value configuration document.
//
//   # comment
//   bag.n = 6
//   bag.fusion_weights = 0.30, 0.20, 0.14, 0.14, 0.11, 0.11
//
// Keys are `section.name`; values run to the end of the line (a `#` starts a
// trailing comment). Duplicate keys are an error.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mttsiam/error.hpp"
#include "mttsiam/text.hpp"

namespace mttsiam {

struct ConfigEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

class ConfigDocument {
public:
    ConfigDocument() = default;

    static ConfigDocument parse(std::string_view content, const std::string& source = "<config>") {
        ConfigDocument doc;
        doc.source_ = source;
        std::size_t lineno = 0;
        std::size_t pos = 0;
        while (pos <= content.size()) {
            const auto end = content.find('\n', pos);
            std::string_view line =
                content.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
            pos = end == std::string_view::npos ? content.size() + 1 : end + 1;
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = text::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key(text::trim(line.substr(0, eq)));
            const std::string value(text::trim(line.substr(eq + 1)));
            if (key.empty() || key.find('.') == std::string::npos || key.front() == '.' || key.back() == '.')
                throw ConfigError(source + ":" + std::to_string(lineno) + ": key '" + key +
                                  "' must look like section.name");
            if (doc.find(key))
                throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            doc.entries_.push_back({key, value, lineno});
        }
        return doc;
    }

    static ConfigDocument load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError(path.string() + ": cannot open config");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path.string());
    }

    const std::string& source() const { return source_; }
    const std::vector<ConfigEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    const ConfigEntry* find(std::string_view key) const {
        for (const auto& e : entries_)
            if (e.key == key) return &e;
        return nullptr;
    }

    /// Adds or replaces a key, keeping first-seen order.
    void set(const std::string& key, const std::string& value) {
        for (auto& e : entries_) {
            if (e.key == key) {
                e.value = value;
                return;
            }
        }
        entries_.push_back({key, value, 0});
    }

    /// Location prefix for messages about `e`.
    std::string where(const ConfigEntry& e) const {
        return e.line ? source_ + ":" + std::to_string(e.line) : source_;
    }

    void write(std::ostream& os) const {
        for (const auto& e : entries_) os << e.key << " = " << e.value << '\n';
    }

private:
    std::string source_ = "<config>";
    std::vector<ConfigEntry> entries_;
};

/// Typed reads over a document that remember which keys were consumed, so
/// leftovers can be reported as unknown.
class ConfigReader {
public:
    explicit ConfigReader(const ConfigDocument& doc) : doc_(&doc) {}

    const ConfigEntry* take(std::string_view key) {
        const auto* e = doc_->find(key);
        if (e) used_.insert(e->key);
        return e;
    }

    std::optional<double> number(std::string_view key) {
        const auto* e = take(key);
        if (!e) return std::nullopt;
        const auto v = text::parse_double(e->value);
        if (!v) fail(*e, "expected a number");
        return v;
    }

    std::optional<long long> integer(std::string_view key) {
        const auto* e = take(key);
        if (!e) return std::nullopt;
        const auto v = text::parse_int(e->value);
        if (!v) fail(*e, "expected an integer");
        return v;
    }

    std::optional<std::size_t> count(std::string_view key) {
        const auto* e = doc_->find(key);
        const auto v = integer(key);
        if (v && *v < 0) fail(*e, "expected a non-negative integer");
        return v ? std::optional<std::size_t>(static_cast<std::size_t>(*v)) : std::nullopt;
    }

    std::optional<bool> flag(std::string_view key) {
        const auto* e = take(key);
        if (!e) return std::nullopt;
        if (e->value == "true" || e->value == "1" || e->value == "on") return true;
        if (e->value == "false" || e->value == "0" || e->value == "off") return false;
        fail(*e, "expected true or false");
        return std::nullopt;
    }

    std::optional<std::string> string(std::string_view key) {
        const auto* e = take(key);
        if (!e) return std::nullopt;
        return e->value;
    }

    /// Comma-separated numbers; an empty value is an empty list.
    std::optional<std::vector<double>> numbers(std::string_view key) {
        const auto* e = take(key);
        if (!e) return std::nullopt;
        std::vector<double> out;
        if (text::trim(e->value).empty()) return out;
        for (auto f : text::split(e->value, ",")) {
            const auto v = text::parse_double(f);
            if (!v) fail(*e, "bad list element '" + std::string(f) + "'");
            out.push_back(*v);
        }
        return out;
    }

    /// Lookup of a named choice.
    template <class Enum, std::size_t N>
    std::optional<Enum> choice(std::string_view key, const std::pair<const char*, Enum> (&options)[N]) {
        const auto* e = take(key);
        if (!e) return std::nullopt;
        for (const auto& [name, value] : options)
            if (e->value == name) return value;
        std::string allowed;
        for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
        fail(*e, "expected one of: " + allowed);
        return std::nullopt;
    }

    [[noreturn]] void fail(const ConfigEntry& e, const std::string& why) const {
        throw ConfigError(doc_->where(e) + ": " + e.key + ": " + why);
    }

    /// Throws on the first key nobody asked for.
    void reject_unknown() const {
        for (const auto& e : doc_->entries())
            if (!used_.count(e.key)) throw ConfigError(doc_->where(e) + ": unknown key '" + e.key + "'");
    }

private:
    const ConfigDocument* doc_;
    std::set<std::string, std::less<>> used_;
};

}  // namespace mttsiam
