#ifndef ETSDM_CONFIG_HPP
#define ETSDM_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>

namespace etsdm {

// Flat key=value run configuration. '#' starts a comment; whitespace around
// keys and values is ignored. CLI flags are merged on top of the file.
class KvConfig {
  public:
    static KvConfig parse(const std::string& text);
    static KvConfig load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    // Later entries win.
    void merge(const KvConfig& overrides);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    uint64_t get_u64(const std::string& key, uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Throwing variant for required keys.
    std::string require(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // FNV-1a over the sorted key=value pairs; stable under key reordering in
    // the source text.
    uint64_t hash() const;
    std::string to_text() const;

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace etsdm

#endif
