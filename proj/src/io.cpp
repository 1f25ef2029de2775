#include "mpda/io.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

namespace mpda::io {

namespace {

std::mutex log_mutex;
std::vector<std::filesystem::path>& log_storage()
{
    static std::vector<std::filesystem::path> log;
    return log;
}

}  // namespace

std::string read_file(const std::filesystem::path& path)
{
    {
        std::lock_guard lock(log_mutex);
        log_storage().push_back(path);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw IoError("error while reading '" + path.string() + "'");
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("error while writing '" + path.string() + "'");
}

std::vector<std::filesystem::path> access_log()
{
    std::lock_guard lock(log_mutex);
    return log_storage();
}

void clear_access_log()
{
    std::lock_guard lock(log_mutex);
    log_storage().clear();
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state)
{
    for (unsigned char c : bytes) {
        state ^= c;
        state *= 0x100000001b3ULL;
    }
    return state;
}

std::string digest_hex(std::string_view bytes)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

}  // namespace mpda::io
