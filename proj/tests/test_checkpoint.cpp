#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ngpbo/checkpoint.hpp"
#include "test_util.hpp"

using namespace ngpbo;
using testutil::random_model;
using testutil::small_config;

TEST_CASE("model checkpoints round-trip exactly for every ablation") {
    for (int ablation = 0; ablation < 4; ++ablation) {
        const NgpModel model = random_model(small_config(ablation, 3, 2), 100 + ablation);
        const std::string path = "/tmp/ngpbo_test_ck_" + std::to_string(ablation) + ".json";
        save_model(model, path, {{"best_epoch", 7}});

        nlohmann::json meta;
        const NgpModel back = load_model(path, &meta);
        CHECK(back.config.variant_name() == model.config.variant_name());
        CHECK(back.pack_params() == model.pack_params());
        CHECK(back.log_noise_variance == model.log_noise_variance);
        CHECK(meta.at("best_epoch") == 7);

        // Re-serialization is byte-stable.
        const std::string again = path + ".2";
        save_model(back, again, {{"best_epoch", 7}});
        std::ifstream a(path), b(again);
        const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
        std::remove(path.c_str());
        std::remove(again.c_str());
    }
}

TEST_CASE("load_model rejects malformed checkpoints") {
    const std::string path = "/tmp/ngpbo_test_ck_bad.json";
    std::ofstream(path) << "{\"config\": {}}";
    CHECK_THROWS_AS(load_model(path), ConfigError);
    std::ofstream(path) << "not json";
    CHECK_THROWS_AS(load_model(path), ConfigError);
    std::remove(path.c_str());
    CHECK_THROWS(load_model("/tmp/ngpbo_does_not_exist.json"));
}

TEST_CASE("digests are stable and content-sensitive") {
    CHECK(bytes_digest("abc") == bytes_digest("abc"));
    CHECK(bytes_digest("abc") != bytes_digest("abd"));
    CHECK(bytes_digest("abc").size() == 16);

    const std::string path = "/tmp/ngpbo_test_digest.txt";
    std::ofstream(path) << "abc";
    CHECK(file_digest(path) == bytes_digest("abc"));
    std::remove(path.c_str());
}
