#include "stq/blob_store.hpp"

#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "stq/error.hpp"
#include "stq/text.hpp"

namespace fs = std::filesystem;

namespace stq {

namespace {

bool valid_segment_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
           c == '_' || c == '-';
}

bool valid_segment(std::string_view seg) {
    if (seg.empty() || seg == "." || seg == "..") {
        return false;
    }
    return std::all_of(seg.begin(), seg.end(), valid_segment_char);
}

} // namespace

BlobKey::BlobKey(std::string key) : key_(std::move(key)) {
    if (!is_valid(key_)) {
        throw KeyError("invalid blob key: \"" + key_ + "\"");
    }
}

bool BlobKey::is_valid(std::string_view key) {
    if (key.empty() || key.size() > kMaxLength) {
        return false;
    }
    auto segments = split(key, '/');
    return std::all_of(segments.begin(), segments.end(), valid_segment);
}

bool BlobStore::exists(const BlobKey& key) const {
    try {
        (void)get(key);
        return true;
    } catch (const NotFoundError&) {
        return false;
    }
}

FsBlobStore::FsBlobStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec || !fs::is_directory(root_)) {
        throw IoError("cannot create blob store root " + root_.string() + ": " + ec.message());
    }
    if (::access(root_.c_str(), W_OK) != 0) {
        throw IoError("blob store root is not writable: " + root_.string());
    }
}

fs::path FsBlobStore::path_of(const BlobKey& key) const { return root_ / key.str(); }

void FsBlobStore::put(const BlobKey& key, std::string_view bytes) {
    auto target = path_of(key);
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) {
        throw IoError("put " + key.str() + ": " + ec.message());
    }
    // '~' is outside the key alphabet, so temporaries never show up in listings.
    auto tmp = target;
    tmp += ".~tmp" + std::to_string(::getpid()) + "_" + std::to_string(tmp_counter_++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("put " + key.str() + ": cannot open " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp, ec);
            throw IoError("put " + key.str() + ": write failed");
        }
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("put " + key.str() + ": rename failed");
    }
}

std::string FsBlobStore::get(const BlobKey& key) const {
    auto path = path_of(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        if (errno == ENOENT || errno == ENOTDIR || !fs::exists(path)) {
            throw NotFoundError("blob not found: " + key.str());
        }
        throw IoError("get " + key.str() + ": " + std::strerror(errno));
    }
    if (fs::is_directory(path)) {
        throw NotFoundError("blob not found: " + key.str());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw IoError("get " + key.str() + ": read failed");
    }
    return std::move(buf).str();
}

std::vector<BlobKey> FsBlobStore::list_prefix(std::string_view prefix) const {
    // Only the directory named by the prefix's complete segments can hold
    // matches; walk from there.
    auto slash = prefix.rfind('/');
    fs::path start = root_;
    if (slash != std::string_view::npos) {
        auto dir = prefix.substr(0, slash);
        if (!BlobKey::is_valid(dir)) {
            return {};
        }
        start /= std::string(dir);
    }
    std::vector<BlobKey> out;
    std::error_code ec;
    if (!fs::is_directory(start, ec)) {
        return out;
    }
    fs::recursive_directory_iterator it(start, ec), end;
    if (ec) {
        throw IoError("list " + std::string(prefix) + ": " + ec.message());
    }
    for (; it != end; it.increment(ec)) {
        if (ec) {
            throw IoError("list " + std::string(prefix) + ": " + ec.message());
        }
        if (!it->is_regular_file()) {
            continue;
        }
        auto rel = fs::relative(it->path(), root_).generic_string();
        if (BlobKey::is_valid(rel) && rel.starts_with(prefix)) {
            out.emplace_back(std::move(rel));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void FsBlobStore::remove(const BlobKey& key) {
    std::error_code ec;
    auto path = path_of(key);
    if (fs::is_directory(path, ec)) {
        return;
    }
    fs::remove(path, ec);
    if (ec && ec != std::errc::no_such_file_or_directory) {
        throw IoError("delete " + key.str() + ": " + ec.message());
    }
}

} // namespace stq
