#pragma once

#include "obm/model.hpp"
#include "obm/sampler.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace obm {

using json = nlohmann::json;

inline constexpr const char* kLibraryVersion = "1.0.0";

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

[[nodiscard]] inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline json params_json(const ModelParams& p) {
    return {{"alpha", p.alpha}, {"beta", p.beta}, {"rho", p.rho}};
}

inline std::ofstream open_output(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw IoError("cannot open " + file.string() + " for writing");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    return out;
}

inline void write_json(const std::filesystem::path& file, const json& j) {
    auto out = open_output(file);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + file.string());
}

[[nodiscard]] inline json read_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError("invalid JSON in " + file.string() + ": " + e.what());
    }
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    return p;
}

// Two-column CSV with the given header.
inline void write_columns(const std::filesystem::path& file, const std::string& a,
                          const std::string& b, const std::vector<double>& xs,
                          const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("write_columns: size mismatch");
    auto out = open_output(file);
    out << a << ',' << b << '\n';
    for (std::size_t i = 0; i < xs.size(); ++i) out << xs[i] << ',' << ys[i] << '\n';
    if (!out) throw IoError("write failed: " + file.string());
}

struct PathMetadata {
    ModelParams params;
    std::uint64_t seed{0};
    std::uint64_t stream_id{0};
};

inline void write_path(const std::filesystem::path& csv, const PathSample& path,
                       const PathMetadata& meta) {
    auto out = open_output(csv);
    out << "k,x\n";
    for (std::size_t k = 0; k <= path.n(); ++k) out << k << ',' << path[k] << '\n';
    if (!out) throw IoError("write failed: " + csv.string());
    write_json(sidecar_path(csv), {{"n", path.n()},
                                   {"x0", path.x0()},
                                   {"alpha", meta.params.alpha},
                                   {"beta", meta.params.beta},
                                   {"rho", meta.params.rho},
                                   {"seed", meta.seed},
                                   {"stream_id", meta.stream_id}});
}

[[nodiscard]] inline PathSample read_path(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw IoError("cannot open " + csv.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(csv.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "k,x") throw IoError(csv.string() + ": expected header 'k,x'");
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError(csv.string() + ": malformed line " + std::to_string(lineno));
        try {
            const auto k = std::stoull(line.substr(0, comma));
            if (k != values.size())
                throw IoError(csv.string() + ": index out of order at line " + std::to_string(lineno));
            values.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw IoError(csv.string() + ": malformed number at line " + std::to_string(lineno));
        }
    }
    try {
        return PathSample(std::move(values));
    } catch (const std::invalid_argument& e) {
        throw IoError(csv.string() + ": " + e.what());
    }
}

} // namespace obm
