#include "locreg/textio.hpp"

#include "locreg/error.hpp"

#include <charconv>
#include <fstream>

namespace locreg {

std::string format_double(double value)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::vector<double> parse_double_list(const std::string& line, char sep)
{
    std::vector<double> out;
    const char* p = line.data();
    const char* end = p + line.size();
    while (end > p && (end[-1] == '\r' || end[-1] == ' '))
        --end;
    while (p <= end) {
        while (p < end && *p == ' ')
            ++p;
        double v = 0.0;
        const auto res = std::from_chars(p, end, v);
        if (res.ec != std::errc())
            throw Error(ErrorCode::io_error, "cannot parse number in '" + line + "'");
        out.push_back(v);
        p = res.ptr;
        if (p == end)
            break;
        if (*p != sep)
            throw Error(ErrorCode::io_error, "unexpected character in '" + line + "'");
        ++p;
    }
    return out;
}

std::string KeyValues::get(const std::string& key) const
{
    const auto it = entries_.find(key);
    if (it == entries_.end())
        throw Error(ErrorCode::config_error, "missing key '" + key + "'");
    return it->second;
}

std::string KeyValues::get(const std::string& key, const std::string& fallback) const
{
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

void KeyValues::write(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
    for (const auto& [k, v] : entries_)
        out << k << '=' << v << '\n';
}

KeyValues KeyValues::read(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::io_error, "cannot read " + path.string());
    KeyValues kv;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::config_error, "expected key=value in " + path.string());
        kv.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return kv;
}

}  // namespace locreg
