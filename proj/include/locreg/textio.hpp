#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace locreg {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

/// Splits on `sep` and parses each field as a double. Throws io-error on junk.
std::vector<double> parse_double_list(const std::string& line, char sep);

/// Flat `key=value` file. Lines starting with '#' are comments.
class KeyValues {
public:
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::string get(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

    void write(const std::filesystem::path& path) const;
    static KeyValues read(const std::filesystem::path& path);

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace locreg
