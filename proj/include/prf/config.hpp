#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace prf {

// Flat key=value text. '#' starts a comment, blank lines are ignored, later
// assignments win. Typed getters remember which keys were read so that
// misspelled keys can be reported with reject_unused().
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, std::string origin = "<config>");
    static KeyValueConfig load(const std::filesystem::path& path);

    // Command-line overrides go through here.
    void set(const std::string& key, std::string value);
    bool has(const std::string& key) const { return values_.contains(key); }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Items separated by ';', surrounding blanks trimmed, empty items dropped.
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

    void reject_unused() const;

    const std::string& origin() const noexcept { return origin_; }

private:
    std::optional<std::string> lookup(const std::string& key) const;

    std::string origin_;
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

std::string trim(std::string_view s);

} // namespace prf
