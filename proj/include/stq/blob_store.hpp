#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stq {

/// Validated storage key: '/'-separated segments of [A-Za-z0-9._-]+, no
/// empty segments, no leading '/', at most 512 bytes. "." and ".." are not
/// valid segments.
class BlobKey {
public:
    static constexpr std::size_t kMaxLength = 512;

    /// Throws KeyError on an invalid key.
    explicit BlobKey(std::string key);

    static bool is_valid(std::string_view key);

    const std::string& str() const { return key_; }

    friend bool operator==(const BlobKey&, const BlobKey&) = default;
    friend auto operator<=>(const BlobKey&, const BlobKey&) = default;

private:
    std::string key_;
};

/// Shared storage through which every function exchanges shards, partial
/// results and final answers. Implementations must be safe for concurrent
/// use from any number of threads.
class BlobStore {
public:
    virtual ~BlobStore() = default;

    /// Atomic overwrite: concurrent readers see either the old or the new
    /// bytes, never a mix.
    virtual void put(const BlobKey& key, std::string_view bytes) = 0;

    /// Throws NotFoundError if the key was never written or was deleted.
    virtual std::string get(const BlobKey& key) const = 0;

    /// Keys whose text starts with `prefix`, sorted lexicographically.
    virtual std::vector<BlobKey> list_prefix(std::string_view prefix) const = 0;

    /// Deleting a missing key is a no-op.
    virtual void remove(const BlobKey& key) = 0;

    bool exists(const BlobKey& key) const;
};

/// Local-filesystem backend. Each key segment is one path component below
/// the root; writes go to a sibling temporary file and are renamed into place.
class FsBlobStore final : public BlobStore {
public:
    /// Creates the root directory if needed. Throws IoError if it cannot be
    /// created or is not writable.
    explicit FsBlobStore(std::filesystem::path root);

    void put(const BlobKey& key, std::string_view bytes) override;
    std::string get(const BlobKey& key) const override;
    std::vector<BlobKey> list_prefix(std::string_view prefix) const override;
    void remove(const BlobKey& key) override;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path path_of(const BlobKey& key) const;

    std::filesystem::path root_;
    std::atomic<std::uint64_t> tmp_counter_{0};
};

} // namespace stq
