#include "adasde/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adasde {

std::string format_double(double v) {
    char buf[40];
    // %.17g always round-trips; prefer the shortest representation that does.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string cloud_to_csv(const PointCloud& cloud) {
    std::string out;
    out.reserve(cloud.size() * 24);
    for (const Vec2& p : cloud.points) {
        out += format_double(p.x);
        out += ',';
        out += format_double(p.y);
        out += '\n';
    }
    return out;
}

PointCloud cloud_from_csv(const std::string& csv) {
    PointCloud cloud;
    std::istringstream in(csv);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("cloud CSV line " + std::to_string(lineno) + ": expected x,y");
        char* end = nullptr;
        const double x = std::strtod(line.c_str(), &end);
        const double y = std::strtod(line.c_str() + comma + 1, &end);
        cloud.points.push_back({x, y});
    }
    return cloud;
}

void save_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud) {
    write_text_file(path, cloud_to_csv(cloud));
}

PointCloud load_cloud_csv(const std::filesystem::path& path) {
    return cloud_from_csv(read_text_file(path));
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(const std::string& bytes) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

}  // namespace adasde
