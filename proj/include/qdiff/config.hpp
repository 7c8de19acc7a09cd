#pragma once

#include <map>
#include <string>
#include <vector>

namespace qdiff {

// Flat "key = value" configuration. Lines starting with '#' are comments,
// list values are comma separated.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    const std::string& raw(const std::string& key) const;

    std::string str(const std::string& key, const std::string& def) const;
    double num(const std::string& key) const;
    double num(const std::string& key, double def) const;
    int integer(const std::string& key, int def) const;
    std::vector<double> list(const std::string& key) const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    const std::map<std::string, std::string>& entries() const { return kv_; }

    // Canonical text form; equal configs give equal dumps.
    std::string dump() const;

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace qdiff
