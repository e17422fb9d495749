#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "vdt/trace_model.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("vdt-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Session with 1 Hz full KPIs over [1, duration] and MOS every `mos_step` seconds.
inline vdt::Session make_session(const std::string& id, int duration, int mos_step, double snr = 5.0, double mos = 4.0) {
    vdt::Session s;
    s.id = id;
    for (int t = 1; t <= duration; ++t) {
        s.kpi.push_back({static_cast<double>(t), -90.0 + 0.1 * t, -10.0, snr + 0.01 * t, 40.0});
    }
    for (int t = mos_step; t <= duration; t += mos_step) s.mos.push_back({static_cast<double>(t), mos});
    return s;
}

}  // namespace testing
