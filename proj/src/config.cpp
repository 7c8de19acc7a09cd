#include "qdiff/config.hpp"

#include <fstream>
#include <sstream>

#include "qdiff/errors.hpp"

namespace qdiff {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double x = std::stod(v, &used);
        if (trim(v.substr(used)).empty()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": missing '='");
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        c.kv_[key] = trim(line.substr(eq + 1));
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

const std::string& Config::raw(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
}

std::string Config::str(const std::string& key, const std::string& def) const {
    return has(key) ? raw(key) : def;
}

double Config::num(const std::string& key) const { return to_double(key, raw(key)); }

double Config::num(const std::string& key, double def) const {
    return has(key) ? num(key) : def;
}

int Config::integer(const std::string& key, int def) const {
    if (!has(key)) return def;
    double x = num(key);
    if (x != static_cast<int>(x)) throw ConfigError("key '" + key + "' expects an integer");
    return static_cast<int>(x);
}

std::vector<double> Config::list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(raw(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_double(key, item));
    }
    return out;
}

std::string Config::dump() const {
    std::string s;
    for (const auto& [k, v] : kv_) s += k + " = " + v + "\n";
    return s;
}

}  // namespace qdiff
