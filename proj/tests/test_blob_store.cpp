#include <fstream>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "stq/error.hpp"

using namespace stq;

TEST_CASE("blob keys") {
    CHECK(BlobKey::is_valid("a/b"));
    CHECK(BlobKey::is_valid("results/q1/map/c9_18_t0.json"));
    for (const char* bad : {"", "/a", "a/", "a//b", "a b", "a/./b", "..", "a/../b", "ä"}) {
        INFO(std::string(bad));
        CHECK_FALSE(BlobKey::is_valid(bad));
        CHECK_THROWS_AS((void)BlobKey(bad), KeyError);
    }
    CHECK(BlobKey::is_valid(std::string(512, 'a')));
    CHECK_FALSE(BlobKey::is_valid(std::string(513, 'a')));
}

TEST_CASE("put/get/list/remove") {
    test::ScratchStore s;
    auto& store = s.store;
    BlobKey ab("a/b");
    store.put(ab, std::string("\x01\x02\x03", 3));
    CHECK(store.get(ab) == std::string("\x01\x02\x03", 3));
    store.put(ab, "second");
    CHECK(store.get(ab) == "second");
    CHECK_THROWS_AS(store.get(BlobKey("never")), NotFoundError);

    CHECK(store.list_prefix("zzz").empty());
    store.put(BlobKey("r/1"), "x");
    store.put(BlobKey("r/2"), "y");
    store.put(BlobKey("s/1"), "z");
    CHECK(store.list_prefix("r/") == std::vector<BlobKey>{BlobKey("r/1"), BlobKey("r/2")});
    CHECK(store.list_prefix("") ==
          std::vector<BlobKey>{ab, BlobKey("r/1"), BlobKey("r/2"), BlobKey("s/1")});
    CHECK(store.list_prefix("r").size() == 2);

    store.remove(BlobKey("r/1"));
    CHECK_THROWS_AS(store.get(BlobKey("r/1")), NotFoundError);
    CHECK_NOTHROW(store.remove(BlobKey("r/1")));
    CHECK(store.list_prefix("r/") == std::vector<BlobKey>{BlobKey("r/2")});
    CHECK(store.exists(BlobKey("r/2")));
    CHECK_FALSE(store.exists(BlobKey("r/1")));
}

TEST_CASE("empty store lists nothing") {
    test::ScratchStore s;
    CHECK(s.store.list_prefix("").empty());
}

TEST_CASE("root that cannot be a directory") {
    TempDir dir;
    auto file = dir.path() / "plain";
    std::ofstream(file) << "x";
    CHECK_THROWS_AS(FsBlobStore(file / "sub"), IoError);
}

TEST_CASE("concurrent readers never see torn writes") {
    test::ScratchStore s;
    BlobKey key("hot/blob");
    const std::string a(1 << 18, 'a');
    const std::string b(1 << 18, 'b');
    s.store.put(key, a);
    std::atomic<bool> done{false};
    std::atomic<int> torn{0};
    std::thread writer([&] {
        for (int i = 0; i < 100; ++i) {
            s.store.put(key, i % 2 ? a : b);
        }
        done = true;
    });
    while (!done) {
        auto got = s.store.get(key);
        if (got != a && got != b) {
            ++torn;
        }
    }
    writer.join();
    CHECK(torn == 0);
    // Temporary files never show up in listings.
    CHECK(s.store.list_prefix("") == std::vector<BlobKey>{key});
}
