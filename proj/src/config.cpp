#include "prf/config.hpp"

#include "prf/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace prf {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string origin) {
    KeyValueConfig cfg;
    cfg.origin_ = std::move(origin);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string body = trim(line);
        if (body.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw config_error(fmt::format("{}:{}: expected key=value, got '{}'", cfg.origin_, line_no, body));
        }
        std::string key = trim(std::string_view(body).substr(0, eq));
        if (key.empty()) throw config_error(fmt::format("{}:{}: empty key", cfg.origin_, line_no));
        cfg.values_[key] = trim(std::string_view(body).substr(eq + 1));
        if (end == text.size()) break;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error(fmt::format("cannot open config {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void KeyValueConfig::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

std::optional<std::string> KeyValueConfig::lookup(const std::string& key) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return lookup(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = lookup(key);
    if (!v) return fallback;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size() || !std::isfinite(out)) {
        throw config_error(fmt::format("{}: '{}' is not a number for key '{}'", origin_, *v, key));
    }
    return out;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    const auto v = lookup(key);
    if (!v) return fallback;
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
        throw config_error(fmt::format("{}: '{}' is not an integer for key '{}'", origin_, *v, key));
    }
    return out;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = lookup(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
        throw config_error(fmt::format("{}: '{}' is not an unsigned integer for key '{}'", origin_, *v, key));
    }
    return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = lookup(key);
    if (!v) return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw config_error(fmt::format("{}: '{}' is not a boolean for key '{}'", origin_, *v, key));
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& fallback) const {
    const auto v = lookup(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= v->size()) {
        const auto end = std::min(v->find(';', pos), v->size());
        std::string item = trim(std::string_view(*v).substr(pos, end - pos));
        if (!item.empty()) out.push_back(std::move(item));
        pos = end + 1;
    }
    return out;
}

void KeyValueConfig::reject_unused() const {
    std::vector<std::string> unknown;
    for (const auto& [key, value] : values_) {
        if (!used_.contains(key)) unknown.push_back(key);
    }
    if (!unknown.empty()) {
        throw config_error(fmt::format("{}: unknown key(s): {}", origin_, fmt::join(unknown, ", ")));
    }
}

} // namespace prf
